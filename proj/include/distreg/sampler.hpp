#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "distreg/design.hpp"
#include "distreg/engine.hpp"

namespace distreg {

/** Posterior draws: one row per retained iteration, one named column per quantity. */
struct SampleMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd draws;
    int n_iter = 0;
    int burnin = 0;
    int thin = 1;
    std::uint64_t seed = 0;
    double runtime = 0.0;
    /// Per-block acceptance rates and other scalar run metadata.
    std::map<std::string, double> info;

    int column(const std::string& name) const;  ///< -1 when absent
    Eigen::VectorXd col(const std::string& name) const;
    std::size_t nsave() const { return static_cast<std::size_t>(draws.rows()); }
};

/// Retained iteration indices burnin, burnin+thin, ... <= n_iter (iteration 0 is the start).
std::vector<int> thinning_grid(int n_iter, int burnin, int thin);

struct McmcOptions {
    int n_iter = 1200;
    int burnin = 200;
    int thin = 1;
    std::uint64_t seed = 1;
    bool verbose = false;
};

inline constexpr std::size_t max_block_size = 2000;

/** Blockwise Metropolis-Hastings with IWLS proposals, slice moves for special terms and
 * inverse-gamma Gibbs steps for smoothing variances.
 */
SampleMatrix gmcmc(const ModelFrame& frame, const FitState& start, const McmcOptions& opts);

/// Convenience: start from named values (missing entries use family init).
SampleMatrix gmcmc(const ModelFrame& frame, const StartValues& start, const McmcOptions& opts);

/** Univariate slice sampler with stepping out and shrinkage. */
double slice_step(const std::function<double(double)>& log_target, double x0, Rng& rng,
                  double w = 1.0, int m_expand = 50);

struct GibbsPrior {
    Eigen::VectorXd m;
    Eigen::MatrixXd M;
    double a = 1.0;
    double b = 1e-4;

    /// m repeated p times, M = scale * I.
    static GibbsPrior isotropic(std::size_t p, double m = 0.0, double M = 1e5, double a = 1.0, double b = 1e-4);
};

struct GibbsOptions {
    int n_iter = 12000;
    int burnin = 2000;
    int thin = 10;
    std::uint64_t seed = 1;
};

/// Shape of the inverse-gamma full conditional of sigma^2: a + n/2 + p/2.
double gibbs_shape(double a, std::size_t n, std::size_t p);

/** Conjugate Gibbs sampler for y = X beta + e, e ~ N(0, sigma^2). Columns are
 * `mu.p.<column>` followed by `sigma`.
 */
SampleMatrix gibbs_lm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const std::vector<std::string>& column_names, const GibbsPrior& prior,
                      const GibbsOptions& opts, const Eigen::VectorXd& start = {});

/// Runs gibbs_lm on the parametric block of a frame's single parameter.
SampleMatrix gibbs_lm(const ModelFrame& frame, const GibbsPrior& prior, const GibbsOptions& opts,
                      const StartValues& start = {});

/// Coefficients stored in one row of a sample matrix (entries absent from it keep `fallback`).
Coefficients coefficients_from_row(const ModelFrame& frame, const SampleMatrix& s, std::size_t row,
                                   const Coefficients& fallback);
/// Column means mapped back into coefficient blocks.
Coefficients posterior_mean_coefficients(const ModelFrame& frame, const SampleMatrix& s);

struct SampleStats {
    double dic = 0.0;
    double pd = 0.0;
    double loglik = 0.0;   ///< log-likelihood at the posterior mean
    double mean_deviance = 0.0;
};

SampleStats samplestats(const SampleMatrix& samples, const ModelFrame& frame);

struct Waic {
    double waic = 0.0;
    double p_waic = 0.0;
    double lppd = 0.0;
};

/// WAIC = -2 (lppd - pWAIC), pWAIC = sum over observations of the sample variance of the
/// pointwise log density.
Waic waic(const SampleMatrix& samples, const ModelFrame& frame);

/// Pointwise log density for every retained draw (rows = draws).
Eigen::MatrixXd pointwise_log_density(const SampleMatrix& samples, const ModelFrame& frame);

void write_samples_csv(const SampleMatrix& s, const std::string& path);
SampleMatrix read_samples_csv(const std::string& path);

}
