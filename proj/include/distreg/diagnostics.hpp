#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "distreg/design.hpp"
#include "distreg/engine.hpp"
#include "distreg/sampler.hpp"

namespace distreg {

/** Point parameters per observation: posterior means of the parameter-scale values when
 * samples are given, otherwise the mode.
 */
ParamValues point_parameters(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                             const DataTable* newdata = nullptr);

struct ResidualSet {
    Eigen::VectorXd residuals;
    std::string type = "quantile";
    std::optional<std::uint64_t> seed;  ///< set for discrete responses
};

/// Quantile residuals from explicit parameters.
ResidualSet quantile_residuals(const Family& family, const Eigen::VectorXd& y, const ParamValues& par,
                               std::uint64_t seed = 1);
ResidualSet quantile_residuals(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                               std::uint64_t seed = 1);

struct CrpsResult {
    Eigen::VectorXd crps;
    std::vector<bool> converged;
};

/// Numerical CRPS per observation: two semi-infinite integrals of the squared difference
/// between the predictive cdf and the step function at y.
CrpsResult crps_numeric(const Family& family, const Eigen::VectorXd& y, const ParamValues& par,
                        double abs_tol = 1e-6);
CrpsResult crps_numeric(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                        const DataTable* newdata = nullptr);

/// Closed-form CRPS of N(mu, sigma^2) at y.
double crps_gaussian(double mu, double sigma, double y);

struct Rootogram {
    int min_count = 1;
    Eigen::VectorXd observed;  ///< index j -> count min_count + j
    Eigen::VectorXd expected;
};

Rootogram rootogram_freq(const Family& family, const Eigen::VectorXd& y, const ParamValues& par,
                         int max_count = 50, std::optional<int> min_count = std::nullopt);
Rootogram rootogram_freq(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                         const DataTable* newdata = nullptr, int max_count = 50);

struct AcfSummary {
    Eigen::MatrixXd acf;      ///< (max_lag + 1) x columns
    Eigen::VectorXd max_acf;  ///< per lag >= 1, maximum |acf| over columns (entry 0 is 1)
};

AcfSummary acf_summary(const Eigen::MatrixXd& draws, int max_lag = 40);
Eigen::VectorXd acf(const Eigen::VectorXd& x, int max_lag);

struct Interval95 {
    double lower = 0.0;
    double mean = 0.0;
    double upper = 0.0;
};

/// Type-7 empirical quantile.
double quantile7(std::vector<double> v, double p);
Interval95 c95(const Eigen::VectorXd& x);

/// Effective sample size via Geyer's initial monotone sequence.
double effective_sample_size(const Eigen::VectorXd& x);
/// Monte-Carlo standard error of the mean.
double mc_standard_error(const Eigen::VectorXd& x);

/// Kolmogorov distance between the empirical cdf of x and the standard normal cdf.
double ks_normal_distance(const Eigen::VectorXd& x);

}
