#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "distreg/engine.hpp"
#include "distreg/error.hpp"
#include "distreg/synth.hpp"
#include "helpers.hpp"

using namespace distreg;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd v1(double x) { return VectorXd::Constant(1, x); }

DataTable smooth_table(std::size_t n, double amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i) {
        x.push_back(U(rng));
        y.push_back(amplitude * std::sin(2.0 * M_PI * x.back()) + N(rng));
    }
    DataTable t;
    t.add_numeric("x", x);
    t.add_numeric("y", y);
    return t;
}

}

TEST_SUITE("engine") {
    TEST_CASE("working quantities") {
        auto g = gaussian_family();
        VectorXd y(3);
        y << 0.5, -1.0, 2.0;
        std::vector<VectorXd> eta{VectorXd::Constant(3, 0.3), VectorXd::Constant(3, std::log(2.0))};
        WorkingQuantities wq = working_quantities(*g, 0, y, eta);
        CHECK((wq.z - y).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(wq.w[0] == doctest::Approx(0.25));

        auto b = binomial_family();
        WorkingQuantities wb = working_quantities(*b, 0, v1(1.0), {v1(0.0)});
        CHECK(wb.w[0] == doctest::Approx(0.25));
        CHECK(wb.z[0] == doctest::Approx(2.0));

        // sigma score is zero when (y - mu)^2 = sigma^2
        WorkingQuantities ws = working_quantities(*g, 1, v1(2.3), {v1(0.3), v1(std::log(2.0))});
        CHECK(ws.z[0] == doctest::Approx(std::log(2.0)));
    }

    TEST_CASE("iwls_update") {
        MatrixXd X(2, 2);
        X << 1, 0, 1, 1;
        IwlsSolution s = iwls_update(X, MatrixXd(), 1.0, VectorXd::Ones(2), VectorXd(Eigen::Vector2d(0, 1)));
        CHECK(s.beta[0] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(s.beta[1] == doctest::Approx(1.0));
        CHECK(s.edf == doctest::Approx(2.0));

        MatrixXd X1 = MatrixXd::Ones(2, 1);
        MatrixXd G = MatrixXd::Constant(1, 1, 2.0);
        IwlsSolution p = iwls_update(X1, G, 1.0, VectorXd::Ones(2), VectorXd(Eigen::Vector2d(1, 3)));
        CHECK(p.beta[0] == doctest::Approx(1.0));

        std::mt19937_64 rng(9);
        std::normal_distribution<double> N(0.0, 1.0);
        MatrixXd A(30, 5);
        VectorXd r(30);
        for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = N(rng);
        for (auto& v : r) v = N(rng);
        VectorXd ols = A.colPivHouseholderQr().solve(r);
        MatrixXd K = difference_matrix(5, 2).transpose() * difference_matrix(5, 2);
        IwlsSolution big = iwls_update(A, K, 1e12, VectorXd::Ones(30), r);
        CHECK((big.beta - ols).cwiseAbs().maxCoeff() < 1e-6);
    }

    TEST_CASE("update_tau2 follows the signal") {
        std::vector<double> edfs;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            DataTable noise = smooth_table(200, 0.0, seed);
            ModelFrame f0 = testing::frame_for({"y ~ s(x)"}, noise, gaussian_family());
            const TermBlock& b0 = f0.params[0].blocks[1];
            VectorXd r0 = f0.y.array() - f0.y.mean();
            double t0 = update_tau2(b0, 1.0, VectorXd::Ones(200), r0, 1.0);
            edfs.push_back(iwls_update(b0.X, b0.K, t0, VectorXd::Ones(200), r0).edf);
        }
        std::nth_element(edfs.begin(), edfs.begin() + 10, edfs.end());
        CHECK(edfs[10] <= 2.5);

        DataTable sig = smooth_table(200, 3.0, 4);
        ModelFrame f1 = testing::frame_for({"y ~ s(x)"}, sig, gaussian_family());
        const TermBlock& b1 = f1.params[0].blocks[1];
        VectorXd r1 = f1.y.array() - f1.y.mean();
        double t1 = update_tau2(b1, 1.0, VectorXd::Ones(200), r1, 1.0);
        CHECK(iwls_update(b1.X, b1.K, t1, VectorXd::Ones(200), r1).edf >= 5.0);

        CHECK(update_tau2(f1.params[0].blocks[0], 3.5, VectorXd::Ones(200), r1) == 3.5);
    }

    TEST_CASE("backfit: gaussian linear model equals OLS") {
        DataTable d = simulate_linear(200, 4, 3);
        ModelFrame f = testing::frame_for({"y ~ x1 + x2 + x3", "sigma ~ 1"}, d, gaussian_family());
        BackfitOptions o;
        o.eps = 1e-10;
        FitState s = backfit(f, o);
        const MatrixXd& X = f.params[0].blocks[0].X;
        VectorXd ols = X.colPivHouseholderQr().solve(f.y);
        CHECK(s.converged);
        CHECK(((s.beta[0][0] - ols).array().abs() / ols.array().abs()).maxCoeff() < 1e-8);
        double rss = (f.y - X * ols).squaredNorm();
        CHECK(s.beta[1][0][0] == doctest::Approx(0.5 * std::log(rss / 200.0)).epsilon(1e-6));

        ModelFrame fl = testing::frame_for({"y ~ x1 + x2 + x3"}, d, lm_family(4));
        FitState sl = backfit(fl);
        CHECK(sl.iterations <= 2);
        CHECK(((sl.beta[0][0] - ols).array().abs() / ols.array().abs()).maxCoeff() < 1e-8);
    }

    TEST_CASE("backfit: logistic regression recovers known coefficients") {
        std::mt19937_64 rng(17);
        std::normal_distribution<double> N(0.0, 1.0);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const Eigen::Vector3d truth(-0.5, 1.2, -0.8);
        std::vector<double> x1, x2, y;
        for (int i = 0; i < 500; ++i) {
            x1.push_back(N(rng));
            x2.push_back(N(rng));
            double eta = truth[0] + truth[1] * x1.back() + truth[2] * x2.back();
            y.push_back(U(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0);
        }
        DataTable t;
        t.add_numeric("y", y);
        t.add_numeric("x1", x1);
        t.add_numeric("x2", x2);
        ModelFrame f = testing::frame_for({"y ~ x1 + x2"}, t, binomial_family());
        FitState s = backfit(f);
        const MatrixXd& X = f.params[0].blocks[0].X;
        VectorXd p = f.family->map_to_params(s.eta)[0];
        VectorXd w = (p.array() * (1.0 - p.array())).matrix();
        MatrixXd cov = (X.transpose() * w.asDiagonal() * X).inverse();
        for (int j = 0; j < 3; ++j) CHECK(std::abs(s.beta[0][0][j] - truth[j]) < 3.0 * std::sqrt(cov(j, j)));
    }

    TEST_CASE("backfit: smooth location-scale model improves the fit") {
        DataTable d = smooth_table(300, 2.0, 8);
        ModelFrame f = testing::frame_for({"y ~ s(x)", "sigma ~ 1"}, d, gaussian_family());
        FitState s = backfit(f);
        CHECK(s.converged);
        CHECK(s.edf > 3.0);
        CHECK(s.beta[1][0][0] == doctest::Approx(0.0).epsilon(0.15));
        auto named = named_parameters(f, s);
        CHECK(named.count("mu.s.s(x).tau21") == 1);
    }

    TEST_CASE("boost selects the informative covariate") {
        std::mt19937_64 rng(23);
        std::normal_distribution<double> N(0.0, 1.0);
        DataTable t;
        std::vector<std::vector<double>> x(6);
        std::vector<double> y;
        for (int i = 0; i < 500; ++i) {
            for (auto& c : x) c.push_back(N(rng));
            y.push_back(1.5 * x[0].back() + N(rng));
        }
        t.add_numeric("y", y);
        for (int j = 0; j < 6; ++j) t.add_numeric("x" + std::to_string(j + 1), x[static_cast<std::size_t>(j)]);
        ModelFrame f = testing::frame_for({"y ~ x1 + x2 + x3 + x4 + x5 + x6", "sigma ~ 1"}, t, gaussian_family());
        FitState s = boost(f);
        REQUIRE(!s.selection.empty());
        CHECK(s.boost_terms[static_cast<std::size_t>(s.selection[0])] == "x1.mu");
        const auto& last = s.contribution.back();
        double total = 0.0, x1 = 0.0;
        for (std::size_t j = 0; j < last.size(); ++j) {
            if (s.boost_terms[j].rfind("x", 0) != 0) continue;
            total += last[j];
            if (s.boost_terms[j] == "x1.mu") x1 = last[j];
        }
        CHECK(x1 >= 0.9 * total);
        for (std::size_t it = 1; it < s.contribution.size(); ++it)
            for (std::size_t j = 0; j < last.size(); ++j) CHECK(s.contribution[it][j] >= s.contribution[it - 1][j]);
    }

    TEST_CASE("boost on pure noise keeps contributions small") {
        std::mt19937_64 rng(29);
        std::normal_distribution<double> N(0.0, 1.0);
        DataTable t;
        std::vector<double> y, a, b;
        for (int i = 0; i < 500; ++i) {
            y.push_back(N(rng));
            a.push_back(N(rng));
            b.push_back(N(rng));
        }
        t.add_numeric("y", y);
        t.add_numeric("a", a);
        t.add_numeric("b", b);
        ModelFrame f = testing::frame_for({"y ~ a + s(b)"}, t, gaussian_family());
        FitState s = boost(f);
        FitState null = initial_state(f);
        const double null_dev = std::abs(-2.0 * null.loglik);
        for (std::size_t j = 0; j < s.boost_terms.size(); ++j)
            if (!s.contribution.empty()) CHECK(s.contribution.back()[j] < 0.01 * null_dev);
    }

    TEST_CASE("start values override family init") {
        DataTable d = simulate_linear(50, 2, 1);
        ModelFrame f = testing::frame_for({"y ~ x1"}, d, gaussian_family());
        FitState s = initial_state(f, {{"mu.p.x1", 0.75}});
        CHECK(s.beta[0][0][1] == 0.75);
        CHECK_THROWS_AS(initial_state(f, {{"mu.p.nope", 1.0}}), ConfigError);
    }
}
