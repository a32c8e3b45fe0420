#include "doctest.h"

#include <cmath>
#include <random>

#include "distreg/diagnostics.hpp"
#include "distreg/error.hpp"
#include "distreg/family.hpp"

using namespace distreg;
using Eigen::VectorXd;

namespace {

VectorXd v1(double x) { return VectorXd::Constant(1, x); }

double fd_score(const Family& f, std::size_t k, double y, std::vector<double> eta) {
    auto ll = [&](double e) {
        std::vector<VectorXd> et;
        for (std::size_t j = 0; j < eta.size(); ++j) et.push_back(v1(j == k ? e : eta[j]));
        return f.loglik(v1(y), f.map_to_params(et));
    };
    const double h = 1e-4 * std::max(1.0, std::abs(eta[k]));
    return (8.0 * (ll(eta[k] + h) - ll(eta[k] - h)) - (ll(eta[k] + 2 * h) - ll(eta[k] - 2 * h))) / (12.0 * h);
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}

TEST_SUITE("family") {
    TEST_CASE("gaussian scores") {
        auto g = gaussian_family();
        ParamValues par{v1(1.5), v1(2.0)};
        CHECK(g->score(0, v1(1.5), par)[0] == doctest::Approx(0.0));
        CHECK(g->score(1, v1(1.5), par)[0] == doctest::Approx(-1.0));
        CHECK(g->score(1, v1(3.5), par)[0] == doctest::Approx(0.0));

        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> U(-2.0, 2.0);
        for (int i = 0; i < 100; ++i) {
            std::vector<double> eta{3.0 * U(rng), U(rng)};
            double y = eta[0] + std::exp(eta[1]) * U(rng);
            ParamValues p = g->map_to_params({v1(eta[0]), v1(eta[1])});
            for (std::size_t k = 0; k < 2; ++k) CHECK(rel(g->score(k, v1(y), p)[0], fd_score(*g, k, y, eta)) < 1e-6);
        }
    }

    TEST_CASE("binomial") {
        auto b = binomial_family();
        ParamValues half{v1(0.5)};
        CHECK(b->score(0, v1(1.0), half)[0] == doctest::Approx(0.5));
        CHECK(b->hess(0, v1(1.0), half)[0] == doctest::Approx(0.25));
        CHECK(b->score(0, v1(1.0), {v1(1.0 - 1e-12)})[0] == doctest::Approx(0.0).epsilon(1e-9));
        for (double e : {-3.0, -0.2, 0.7, 2.5})
            for (double y : {0.0, 1.0}) CHECK(rel(b->score(0, v1(y), b->map_to_params({v1(e)}))[0], fd_score(*b, 0, y, {e})) < 1e-6);
        CHECK_THROWS_AS(b->check_response(v1(0.5)), DataError);
    }

    TEST_CASE("ztnbinom density, summation and scores") {
        auto z = ztnbinom_family();
        ParamValues par{v1(5.0), v1(2.0)};
        CHECK(z->density(v1(0.0), par, false)[0] == 0.0);
        double total = 0.0;
        for (int y = 1; y <= 10000; ++y) total += std::exp(ztnb::log_density(y, 5.0, 2.0));
        CHECK(std::abs(1.0 - total) < 1e-8);
        for (double mu : {0.5, 5.0, 50.0})
            for (double th : {0.1, 1.0, 10.0})
                for (double y : {1.0, 3.0, 40.0}) {
                    std::vector<double> eta{std::log(mu), std::log(th)};
                    ParamValues p{v1(mu), v1(th)};
                    for (std::size_t k = 0; k < 2; ++k) {
                        CHECK(rel(z->score(k, v1(y), p)[0], fd_score(*z, k, y, eta)) < 1e-5);
                        CHECK(z->hess(k, v1(y), p)[0] >= 1e-10);
                    }
                }
        CHECK_THROWS_AS(z->check_response(v1(0.0)), DataError);
        CHECK_THROWS_AS(z->check_response(v1(2.5)), DataError);
        CHECK_THROWS_AS(z->check_params({v1(-1.0), v1(1.0)}), DataError);
    }

    TEST_CASE("lm plug-in sigma") {
        VectorXd y(4), mu(4);
        y << 1, 2, 3, 4;
        mu << 0, 2, 4, 4;
        CHECK(lm::plugin_sigma(y, mu, 2) == doctest::Approx(1.0));
        auto f = lm_family(2);
        auto g = gaussian_family();
        VectorXd dl = f->density(y, {mu}, true);
        VectorXd dg = g->density(y, {mu, VectorXd::Ones(4)}, true);
        CHECK((dl - dg).cwiseAbs().maxCoeff() < 1e-12);
        CHECK_THROWS_AS(f->density(y, {y}, true), NumericalError);
        CHECK_THROWS_AS(lm::plugin_sigma(y, mu, 4), DataError);
    }

    TEST_CASE("random draws follow the cdf") {
        std::mt19937_64 rng(11);
        const Eigen::Index n = 50000;
        struct Case {
            FamilyPtr f;
            ParamValues par;
        };
        std::vector<Case> cases = {{gaussian_family(), {VectorXd::Constant(n, 1.0), VectorXd::Constant(n, 2.0)}},
                                   {ztnbinom_family(), {VectorXd::Constant(n, 3.0), VectorXd::Constant(n, 1.5)}},
                                   {binomial_family(), {VectorXd::Constant(n, 0.3)}}};
        for (auto& c : cases) {
            VectorXd y = c.f->random(c.par, rng);
            std::vector<double> s(y.data(), y.data() + n);
            std::sort(s.begin(), s.end());
            double worst = 0.0;
            ParamValues point;
            for (const auto& v : c.par) point.push_back(v1(v[0]));
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto si = static_cast<std::size_t>(i);
                if (i + 1 < n && s[si + 1] == s[si]) continue;
                double F = c.f->cdf(v1(s[si]), point)[0];
                worst = std::max(worst, std::abs(F - static_cast<double>(i + 1) / static_cast<double>(n)));
            }
            CHECK(worst < 0.02);
        }
    }

    TEST_CASE("quantile inverts cdf") {
        auto g = gaussian_family();
        VectorXd u(3);
        u << 0.1, 0.5, 0.9;
        ParamValues par{VectorXd::Constant(3, 2.0), VectorXd::Constant(3, 0.5)};
        VectorXd q = g->quantile(u, par);
        CHECK((g->cdf(q, par) - u).cwiseAbs().maxCoeff() < 1e-10);
    }
}
