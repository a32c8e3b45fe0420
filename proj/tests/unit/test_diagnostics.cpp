#include "doctest.h"

#include <cmath>
#include <random>

#include "distreg/diagnostics.hpp"
#include "distreg/family.hpp"

using namespace distreg;
using Eigen::VectorXd;

namespace {

VectorXd constant(Eigen::Index n, double v) { return VectorXd::Constant(n, v); }

}

TEST_SUITE("diagnostics") {
    TEST_CASE("CRPS closed-form examples") {
        auto g = gaussian_family();
        CrpsResult r = crps_numeric(*g, constant(1, 0.0), {constant(1, 0.0), constant(1, 1.0)});
        const double exact = 2.0 * std::exp(-0.5 * 0.0) / std::sqrt(2.0 * M_PI) - 1.0 / std::sqrt(M_PI);
        CHECK(r.crps[0] == doctest::Approx(0.23370).epsilon(1e-4));
        CHECK(std::abs(r.crps[0] - exact) < 1e-6);
        CHECK(r.converged[0]);
        CHECK(crps_gaussian(0.0, 1.0, 0.0) == doctest::Approx(exact));

        CrpsResult point = crps_numeric(*g, constant(1, 3.0), {constant(1, 3.0), constant(1, 1e-6)});
        CHECK(point.crps[0] < 1e-5);
    }

    TEST_CASE("CRPS is nonnegative") {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const Eigen::Index n = 500;
        VectorXd y(n), mu(n), sigma(n), cy(n), cmu(n), cth(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = -5 + 10 * U(rng);
            sigma[i] = std::exp(-2 + 4 * U(rng));
            y[i] = -10 + 20 * U(rng);
            cmu[i] = std::exp(3 * U(rng));
            cth[i] = std::exp(-1 + 3 * U(rng));
            cy[i] = 1 + std::floor(20 * U(rng));
        }
        CHECK(crps_numeric(*gaussian_family(), y, {mu, sigma}).crps.minCoeff() >= 0.0);
        CHECK(crps_numeric(*ztnbinom_family(), cy, {cmu, cth}).crps.minCoeff() >= 0.0);
    }

    TEST_CASE("quantile residuals") {
        auto g = gaussian_family();
        ResidualSet r = quantile_residuals(*g, constant(1, 2.0), {constant(1, 2.0), constant(1, 3.0)});
        CHECK(std::abs(r.residuals[0]) < 1e-12);

        Rng rng(8);
        const Eigen::Index n = 2000;
        ParamValues par{constant(n, 1.0), constant(n, 0.5)};
        VectorXd y = g->random(par, rng);
        CHECK(ks_normal_distance(quantile_residuals(*g, y, par).residuals) < 0.035);

        auto z = ztnbinom_family();
        ParamValues zp{constant(n, 4.0), constant(n, 2.0)};
        VectorXd cy = z->random(zp, rng);
        ResidualSet a = quantile_residuals(*z, cy, zp, 77), b = quantile_residuals(*z, cy, zp, 77);
        CHECK(a.residuals == b.residuals);
        CHECK(a.seed.has_value());
        CHECK(ks_normal_distance(a.residuals) < 0.035);
    }

    TEST_CASE("rootogram frequencies") {
        auto z = ztnbinom_family();
        Rng rng(10);
        const Eigen::Index n = 5000;
        ParamValues par{constant(n, 6.0), constant(n, 1.0)};
        VectorXd y = z->random(par, rng);
        Rootogram rg = rootogram_freq(*z, y, par, 50);
        CHECK(rg.min_count == 1);
        CHECK(rg.observed.size() == 50);
        const double in_range = static_cast<double>((y.array() <= 50.0).count());
        CHECK(rg.observed.sum() == in_range);
        const double tail = n * (1.0 - ztnb::cdf(50.0, 6.0, 1.0));
        CHECK(rg.expected.sum() <= n);
        CHECK(n - rg.expected.sum() == doctest::Approx(tail).epsilon(1e-6));
        for (Eigen::Index j = 0; j < rg.expected.size(); ++j)
            if (rg.expected[j] >= 5.0) CHECK(std::abs(rg.observed[j] - rg.expected[j]) / std::sqrt(rg.expected[j]) <= 4.0);
    }

    TEST_CASE("acf") {
        Rng rng(12);
        std::normal_distribution<double> N(0.0, 1.0);
        const Eigen::Index n = 10000;
        Eigen::MatrixXd d(n, 2);
        double prev = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            d(i, 0) = N(rng);
            prev = 0.8 * prev + N(rng);
            d(i, 1) = prev;
        }
        AcfSummary s = acf_summary(d, 10);
        CHECK(s.acf(0, 0) == 1.0);
        CHECK(s.acf(0, 1) == 1.0);
        CHECK(std::abs(s.acf(1, 0)) < 0.03);
        CHECK(s.acf(1, 1) >= 0.75);
        CHECK(s.acf(1, 1) <= 0.85);
        CHECK(s.max_acf[1] == doctest::Approx(s.acf(1, 1)));
        CHECK(effective_sample_size(d.col(0)) > 0.8 * n);
        CHECK(effective_sample_size(d.col(1)) < 0.2 * n);
    }

    TEST_CASE("c95 and quantile7") {
        Interval95 c = c95(VectorXd::Constant(10, 2.5));
        CHECK(c.lower == 2.5);
        CHECK(c.mean == 2.5);
        CHECK(c.upper == 2.5);
        Interval95 s = c95(VectorXd::LinSpaced(100, 1.0, 100.0));
        CHECK(s.lower == doctest::Approx(3.475));
        CHECK(s.mean == doctest::Approx(50.5));
        CHECK(s.upper == doctest::Approx(97.525));
        VectorXd sym(200);
        for (int i = 0; i < 100; ++i) {
            sym[i] = i + 1.0;
            sym[100 + i] = -(i + 1.0);
        }
        Interval95 m = c95(sym);
        CHECK(m.mean == doctest::Approx(0.5 * (m.lower + m.upper)));
    }
}
