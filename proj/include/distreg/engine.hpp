#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "distreg/design.hpp"

namespace distreg {

/** IWLS weights and working response for one parameter. */
struct WorkingQuantities {
    Eigen::VectorXd w;
    Eigen::VectorXd z;
};

inline constexpr double weight_floor = 1e-10;
inline constexpr double weight_ceiling = 1e10;

/// z = eta_k + score_k / w_k with w_k = hess_k clamped to [1e-10, 1e10].
WorkingQuantities working_quantities(const Family& family, std::size_t k, const Eigen::VectorXd& y,
                                     const std::vector<Eigen::VectorXd>& eta);

struct IwlsSolution {
    Eigen::VectorXd beta;
    double edf = 0.0;
    bool jittered = false;
};

/** Solves (X'WX + G) beta = X'W r through a Cholesky factorization.
 *
 * G is K / tau2, or zero when K is empty. A ridge of at most 1e-7 * trace is added when
 * the system is not positive definite; anything worse is a NumericalError.
 */
IwlsSolution iwls_update(const Eigen::MatrixXd& X, const Eigen::MatrixXd& K, double tau2,
                         const Eigen::VectorXd& w, const Eigen::VectorXd& partial_residual);

/// Precision matrix X'WX + K/tau2.
Eigen::MatrixXd penalized_precision(const Eigen::MatrixXd& X, const Eigen::MatrixXd& K, double tau2,
                                    const Eigen::VectorXd& w);

/** Picks tau2 by golden-section search on log tau2 in [-20, 20], minimizing the AICc of
 * the block's weighted working model. `edf_other` is the edf of all remaining blocks.
 */
double update_tau2(const TermBlock& block, double tau2, const Eigen::VectorXd& w,
                   const Eigen::VectorXd& partial_residual, double edf_other = 0.0);

/// Hyperparameters of the inverse-gamma prior on smoothing variances.
inline constexpr double tau2_prior_a = 1.0;
inline constexpr double tau2_prior_b = 1e-4;

struct FitState {
    Coefficients beta;
    std::vector<std::vector<double>> tau2;
    std::vector<std::vector<double>> edf_block;
    std::vector<Eigen::VectorXd> eta;
    double loglik = 0.0;
    double logpost = 0.0;
    double edf = 0.0;
    double aicc = 0.0;
    bool converged = false;
    int iterations = 0;
    double runtime = 0.0;

    // Boosting only.
    std::vector<std::string> boost_terms;            ///< "<term>.<param>"
    std::vector<int> selection;                      ///< selected term per iteration
    std::vector<std::vector<double>> contribution;   ///< cumulative gain per iteration and term
};

/// Named starting values; keys follow the coefficient naming convention.
using StartValues = std::map<std::string, double>;

/// Starting state: family init for intercepts, then any overrides from `start`.
FitState initial_state(const ModelFrame& frame, const StartValues& start = {});

/// Log-likelihood, log-prior terms, edf and AICc of a state.
void evaluate_state(const ModelFrame& frame, FitState& state);
double log_prior(const TermBlock& block, const Eigen::VectorXd& beta, double tau2);

struct BackfitOptions {
    int max_iter = 400;
    double eps = 1e-4;
    bool update_variances = true;
    bool verbose = false;
};

/** Posterior-mode estimation by blockwise IWLS backfitting. */
FitState backfit(const ModelFrame& frame, const BackfitOptions& opts = {}, const StartValues& start = {});

struct BoostOptions {
    int maxit = 1000;
    double nu = 0.1;
    double df = 4.0;  ///< target edf of smooth base learners
    bool verbose = false;
};

/** Componentwise gradient boosting over all terms of all parameters. */
FitState boost(const ModelFrame& frame, const BoostOptions& opts = {}, const StartValues& start = {});

/// Named coefficient vector of a state (registry order), plus tau2 entries.
std::map<std::string, double> named_parameters(const ModelFrame& frame, const FitState& state);

}
