#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "distreg/family.hpp"

namespace distreg {

/** A model term whose fit is an arbitrary (possibly nonlinear) function of its coefficients.
 *
 * A term is built over the raw training column and owns its centering. Engines only talk
 * to it through fitted()/predict() and the update()/propose() hooks.
 */
class SpecialTerm {
    public:
        /// Log-likelihood of the whole model as a function of this term's coefficients.
        using LogLikFn = std::function<double(const Eigen::VectorXd&)>;

        SpecialTerm(std::string label, Eigen::VectorXd x, bool center);
        virtual ~SpecialTerm() = default;

        const std::string& label() const { return label_; }
        const Eigen::VectorXd& x() const { return x_; }
        bool centered() const { return center_; }

        virtual std::size_t n_params() const = 0;
        virtual Eigen::VectorXd start() const = 0;
        virtual double edf() const = 0;
        /// Uncentered curve evaluated at x.
        virtual Eigen::VectorXd fit_fun(const Eigen::VectorXd& x, const Eigen::VectorXd& beta) const = 0;
        virtual double log_prior(const Eigen::VectorXd& beta) const = 0;
        /// Residual vector rho with -2 log_prior(beta) = |rho|^2 + const; empty for flat priors.
        virtual Eigen::VectorXd prior_residuals(const Eigen::VectorXd& beta) const;

        /// Fitted values on the training rows (mean-centered when centering is set).
        Eigen::VectorXd fitted(const Eigen::VectorXd& beta) const;
        /// Values at new covariates, shifted by the training-row mean when centered.
        Eigen::VectorXd predict(const Eigen::VectorXd& x_new, const Eigen::VectorXd& beta) const;

        /// Optimizer hook: improves beta against the weighted partial residual.
        virtual Eigen::VectorXd update(const Eigen::VectorXd& beta, const Eigen::VectorXd& w,
                                       const Eigen::VectorXd& partial_residual) const;
        /// Sampler hook: one rejection-free draw from the full conditional.
        virtual Eigen::VectorXd propose(const Eigen::VectorXd& beta, const LogLikFn& loglik, Rng& rng) const;

    private:
        std::string label_;
        Eigen::VectorXd x_;
        bool center_;
};

using SpecialTermPtr = std::shared_ptr<const SpecialTerm>;

/** Gompertz growth curve b1 * exp(-b2 * exp(-b3 * x)). */
class GompertzTerm : public SpecialTerm {
    public:
        GompertzTerm(std::string label, Eigen::VectorXd x, bool center = true);

        std::size_t n_params() const override { return 3; }
        Eigen::VectorXd start() const override;
        double edf() const override { return 3.0; }
        Eigen::VectorXd fit_fun(const Eigen::VectorXd& x, const Eigen::VectorXd& beta) const override;
        double log_prior(const Eigen::VectorXd& beta) const override;
        Eigen::VectorXd prior_residuals(const Eigen::VectorXd& beta) const override;

        static constexpr double prior_sd = 1000.0;
};

SpecialTermPtr gompertz_term(const Eigen::VectorXd& x, std::string label = "s2(x)");

/// Weighted penalized least-squares update used by the default update() hook.
/// Objective: sum w (r - fitted(beta))^2 - 2 log_prior(beta); never increases it.
Eigen::VectorXd special_update(const SpecialTerm& term, const Eigen::VectorXd& beta,
                               const Eigen::VectorXd& w, const Eigen::VectorXd& partial_residual);

/// Coordinate-wise slice sampling of loglik(beta) + log_prior(beta).
Eigen::VectorXd special_propose(const SpecialTerm& term, const Eigen::VectorXd& beta,
                                const SpecialTerm::LogLikFn& loglik, Rng& rng);

/// Value of the penalized least-squares objective minimized by special_update().
double special_objective(const SpecialTerm& term, const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& w, const Eigen::VectorXd& partial_residual);

/** Constructors for `s2(var, bs = "<code>")` terms. */
using SpecialFactory = std::function<SpecialTermPtr(const std::string& label, const Eigen::VectorXd& x)>;

void register_special(const std::string& code, SpecialFactory factory);
bool has_special(const std::string& code);
SpecialTermPtr make_special(const std::string& code, const std::string& label, const Eigen::VectorXd& x);

}
