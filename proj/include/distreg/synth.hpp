#pragma once

#include <cstdint>
#include <string>

#include "distreg/data_table.hpp"

namespace distreg {

/** Artificial regression data with known components.
 *
 * x1, x2, x3 ~ U(0, 1), fac uniform over {high, low, medium}, err ~ N(0, 0.3^2).
 *   num = 0.2 - 0.6 x1 + sin(2 pi x2) + 4 (x3 - 0.5)^2 + 0.3 [fac = low] + err
 *   bin = "yes" when num > median(num), else "no"
 *   cnt ~ Poisson(exp(0.5 + sin(2 pi x2)))
 */
DataTable simulate_gamart(std::size_t n, std::uint64_t seed);

/** Linear model with an intercept and p - 1 standard-normal covariates x1..x{p-1}.
 *
 * y = 1 + sum_j beta_j x_j + N(0, sigma^2) with beta_j = (-1)^j * j / p and sigma = 0.5.
 */
DataTable simulate_linear(std::size_t n, std::size_t p, std::uint64_t seed);

/** Zero-truncated negative binomial counts.
 *
 * x1..x4 ~ U(0, 1); log mu = 1 + 1.5 sin(2 pi x1); log theta = 0.5. Only x1 carries signal.
 */
DataTable simulate_ztnb(std::size_t n, std::uint64_t seed);

/// True log mu of simulate_ztnb.
double ztnb_true_log_mu(double x1);

/** Heteroskedastic growth data on time = 1..n.
 *
 * y ~ N(2 + 1 / (1 + exp(0.5 (15 - time))), exp(-3 + 2 cos(time / 30 * 6 - 3))^2).
 */
DataTable simulate_growth(std::size_t n, std::uint64_t seed);

double growth_true_mean(double time);
double growth_true_log_sigma(double time);

/// Dispatches on "gamart", "linear", "ztnb", "growth"; `p` is used by "linear".
DataTable simulate(const std::string& kind, std::size_t n, std::uint64_t seed, std::size_t p = 6);

}
