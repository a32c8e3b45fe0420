#include "distreg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>


#include "distreg/error.hpp"
#include "distreg/family.hpp"

namespace distreg {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

std::vector<double> uniform_column(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}

DataTable simulate_gamart(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    auto x1 = uniform_column(n, rng);
    auto x2 = uniform_column(n, rng);
    auto x3 = uniform_column(n, rng);
    std::uniform_int_distribution<int> level(0, 2);
    std::normal_distribution<double> err(0.0, 0.3);
    const char* levels[] = {"high", "low", "medium"};
    std::vector<std::string> fac(n);
    std::vector<double> num(n), cnt(n);
    for (std::size_t i = 0; i < n; ++i) {
        fac[i] = levels[level(rng)];
        num[i] = 0.2 - 0.6 * x1[i] + std::sin(two_pi * x2[i]) + 4.0 * (x3[i] - 0.5) * (x3[i] - 0.5) +
                 (fac[i] == "low" ? 0.3 : 0.0) + err(rng);
        std::poisson_distribution<int> pois(std::exp(0.5 + std::sin(two_pi * x2[i])));
        cnt[i] = pois(rng);
    }
    std::vector<double> sorted = num;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
    const double med = n ? sorted[n / 2] : 0.0;
    std::vector<std::string> bin(n);
    for (std::size_t i = 0; i < n; ++i) bin[i] = num[i] > med ? "yes" : "no";
    DataTable t;
    t.add_numeric("num", num);
    t.add_categorical("bin", bin);
    t.add_numeric("cnt", cnt);
    t.add_numeric("x1", x1);
    t.add_numeric("x2", x2);
    t.add_numeric("x3", x3);
    t.add_categorical("fac", fac);
    return t;
}

DataTable simulate_linear(std::size_t n, std::size_t p, std::uint64_t seed) {
    if (p < 1) throw ConfigError("simulate_linear: p must be at least 1");
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<std::vector<double>> x(p - 1, std::vector<double>(n));
    for (auto& col : x)
        for (auto& v : col) v = z(rng);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double m = 1.0;
        for (std::size_t j = 1; j < p; ++j) m += (j % 2 ? -1.0 : 1.0) * static_cast<double>(j) / static_cast<double>(p) * x[j - 1][i];
        y[i] = m + 0.5 * z(rng);
    }
    DataTable t;
    t.add_numeric("y", y);
    for (std::size_t j = 1; j < p; ++j) t.add_numeric("x" + std::to_string(j), x[j - 1]);
    return t;
}

double ztnb_true_log_mu(double x1) { return 1.0 + 1.5 * std::sin(two_pi * x1); }

DataTable simulate_ztnb(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> x;
    for (int j = 0; j < 4; ++j) x.push_back(uniform_column(n, rng));
    const double theta = std::exp(0.5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mu = std::exp(ztnb_true_log_mu(x[0][i]));
        // Gamma-Poisson mixture, redrawn until positive.
        std::gamma_distribution<double> g(theta, mu / theta);
        int v = 0;
        while (v == 0) {
            std::poisson_distribution<int> pois(g(rng));
            v = pois(rng);
        }
        y[i] = v;
    }
    DataTable t;
    t.add_numeric("y", y);
    for (int j = 0; j < 4; ++j) t.add_numeric("x" + std::to_string(j + 1), x[static_cast<std::size_t>(j)]);
    return t;
}

double growth_true_mean(double time) { return 2.0 + 1.0 / (1.0 + std::exp(0.5 * (15.0 - time))); }
double growth_true_log_sigma(double time) { return -3.0 + 2.0 * std::cos(time / 30.0 * 6.0 - 3.0); }

DataTable simulate_growth(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> time(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        time[i] = static_cast<double>(i + 1);
        y[i] = growth_true_mean(time[i]) + std::exp(growth_true_log_sigma(time[i])) * z(rng);
    }
    DataTable t;
    t.add_numeric("time", time);
    t.add_numeric("y", y);
    return t;
}

DataTable simulate(const std::string& kind, std::size_t n, std::uint64_t seed, std::size_t p) {
    if (kind == "gamart") return simulate_gamart(n, seed);
    if (kind == "linear") return simulate_linear(n, p, seed);
    if (kind == "ztnb") return simulate_ztnb(n, seed);
    if (kind == "growth") return simulate_growth(n, seed);
    throw ConfigError("unknown simulation '" + kind + "'");
}

}
