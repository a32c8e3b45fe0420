#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace distreg {

using Rng = std::mt19937_64;

/** Monotone map between a parameter and its additive predictor. */
class Link {
    public:
        enum class Kind { identity, log, logit };

        explicit Link(Kind kind = Kind::identity) : kind_{kind} {}
        static Link from_name(const std::string& name);

        Kind kind() const { return kind_; }
        std::string name() const;

        /// parameter -> predictor
        double link(double theta) const;
        /// predictor -> parameter
        double inverse(double eta) const;
        Eigen::VectorXd inverse(const Eigen::VectorXd& eta) const;

    private:
        Kind kind_;
};

/// Evaluated parameters on the parameter scale, one column per family parameter.
using ParamValues = std::vector<Eigen::VectorXd>;

/** Distribution contract shared by all engines.
 *
 * `par` always holds parameter-scale values in family order; each entry has one value
 * per observation. score(k, ...) is the derivative of the log-likelihood with respect to
 * the predictor of parameter k, and hess(k, ...) the matching negative second derivative
 * (or its expectation). Both are pointwise.
 */
class Family {
    public:
        virtual ~Family() = default;

        virtual std::string name() const = 0;
        const std::vector<std::string>& params() const { return params_; }
        const std::vector<Link>& links() const { return links_; }
        std::size_t nparams() const { return params_.size(); }
        /// Index of a parameter name, or -1.
        int param_index(const std::string& name) const;

        virtual bool discrete() const { return false; }
        virtual bool has_cdf() const { return true; }
        /// Smallest value of the support for count families.
        virtual int support_min() const { return 0; }

        virtual Eigen::VectorXd density(const Eigen::VectorXd& y, const ParamValues& par, bool log) const = 0;
        virtual Eigen::VectorXd cdf(const Eigen::VectorXd& y, const ParamValues& par) const = 0;
        virtual Eigen::VectorXd quantile(const Eigen::VectorXd& u, const ParamValues& par) const = 0;
        virtual Eigen::VectorXd random(const ParamValues& par, Rng& rng) const = 0;
        virtual double loglik(const Eigen::VectorXd& y, const ParamValues& par) const;

        virtual Eigen::VectorXd score(std::size_t k, const Eigen::VectorXd& y, const ParamValues& par) const = 0;
        virtual Eigen::VectorXd hess(std::size_t k, const Eigen::VectorXd& y, const ParamValues& par) const = 0;

        /// Constant starting value for predictor k.
        virtual double init(std::size_t k, const Eigen::VectorXd& y) const = 0;

        /// Throws DataError for responses outside the support.
        virtual void check_response(const Eigen::VectorXd& y) const;
        /// Throws DataError for invalid parameter values.
        virtual void check_params(const ParamValues& par) const;

        /// Applies the inverse links to a set of predictors.
        ParamValues map_to_params(const std::vector<Eigen::VectorXd>& eta) const;

    protected:
        Family(std::vector<std::string> params, std::vector<Link> links);

    private:
        std::vector<std::string> params_;
        std::vector<Link> links_;
};

using FamilyPtr = std::shared_ptr<const Family>;

/// Normal distribution: mu (identity), sigma (log).
FamilyPtr gaussian_family();
/// Bernoulli response with logit link on pi.
FamilyPtr binomial_family();
/// Zero-truncated negative binomial: mu (log), theta (log).
FamilyPtr ztnbinom_family();
/// Linear model with a plug-in residual standard deviation.
FamilyPtr lm_family(int p_effective);

/// Looks up a family by its short name: gaussian, binomial, ztnbinom, lm.
FamilyPtr make_family(const std::string& name, int p_effective = 0);

namespace ztnb {
/// log P(Y = y) for the zero-truncated negative binomial with mean mu and size theta.
double log_density(double y, double mu, double theta);
/// P(Y <= y).
double cdf(double y, double mu, double theta);
/// Probability of zero for the untruncated negative binomial.
double p_zero(double mu, double theta);
}

namespace lm {
/// Plug-in residual standard deviation sqrt(RSS / (n - p)).
double plugin_sigma(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, int p_effective);
}

}
