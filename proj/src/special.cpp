#include "distreg/special.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "distreg/error.hpp"
#include "distreg/sampler.hpp"

namespace distreg {

using Eigen::VectorXd;

SpecialTerm::SpecialTerm(std::string label, VectorXd x, bool center)
    : label_{std::move(label)}, x_{std::move(x)}, center_{center} {}

VectorXd SpecialTerm::prior_residuals(const VectorXd&) const { return {}; }

VectorXd SpecialTerm::fitted(const VectorXd& beta) const {
    VectorXd f = fit_fun(x_, beta);
    if (center_) f.array() -= f.mean();
    return f;
}

VectorXd SpecialTerm::predict(const VectorXd& x_new, const VectorXd& beta) const {
    VectorXd f = fit_fun(x_new, beta);
    if (center_) f.array() -= fit_fun(x_, beta).mean();
    return f;
}

VectorXd SpecialTerm::update(const VectorXd& beta, const VectorXd& w, const VectorXd& partial_residual) const {
    return special_update(*this, beta, w, partial_residual);
}

VectorXd SpecialTerm::propose(const VectorXd& beta, const LogLikFn& loglik, Rng& rng) const {
    return special_propose(*this, beta, loglik, rng);
}

GompertzTerm::GompertzTerm(std::string label, VectorXd x, bool center)
    : SpecialTerm(std::move(label), std::move(x), center) {}

VectorXd GompertzTerm::start() const { return VectorXd{{0.0, 0.5, 0.1}}; }

VectorXd GompertzTerm::fit_fun(const VectorXd& x, const VectorXd& beta) const {
    return (beta[0] * (-beta[1] * (-beta[2] * x.array()).exp()).exp()).matrix();
}

double GompertzTerm::log_prior(const VectorXd& beta) const {
    const double c = -std::log(prior_sd) - 0.5 * std::log(2.0 * std::numbers::pi);
    return 3.0 * c - 0.5 * beta.squaredNorm() / (prior_sd * prior_sd);
}

VectorXd GompertzTerm::prior_residuals(const VectorXd& beta) const { return beta / prior_sd; }

SpecialTermPtr gompertz_term(const VectorXd& x, std::string label) {
    return std::make_shared<GompertzTerm>(std::move(label), x);
}

double special_objective(const SpecialTerm& term, const VectorXd& beta, const VectorXd& w,
                         const VectorXd& partial_residual) {
    VectorXd e = partial_residual - term.fitted(beta);
    double v = (w.array() * e.array().square()).sum() - 2.0 * term.log_prior(beta);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

namespace {

struct LsqFunctor {
    using Scalar = double;
    using InputType = VectorXd;
    using ValueType = VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const SpecialTerm* term;
    VectorXd sw;
    VectorXd r;
    int m;

    int inputs() const { return static_cast<int>(term->n_params()); }
    int values() const { return m; }

    int operator()(const VectorXd& beta, VectorXd& fvec) const {
        const Eigen::Index n = r.size();
        fvec.head(n) = sw.cwiseProduct(r - term->fitted(beta));
        VectorXd pr = term->prior_residuals(beta);
        fvec.tail(m - n) = pr;
        for (Eigen::Index i = 0; i < fvec.size(); ++i)
            if (!std::isfinite(fvec[i])) fvec[i] = 1e10;
        return 0;
    }
};

VectorXd run_lm(const SpecialTerm& term, VectorXd beta, const VectorXd& w, const VectorXd& r) {
    LsqFunctor f{&term, w.cwiseSqrt(), r, 0};
    f.m = static_cast<int>(r.size() + term.prior_residuals(beta).size());
    if (f.m < f.inputs()) f.m = f.inputs();
    Eigen::NumericalDiff<LsqFunctor> nd(f);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<LsqFunctor>> lm(nd);
    lm.parameters.maxfev = 400 * (f.inputs() + 1);
    lm.minimize(beta);
    return beta;
}

}

VectorXd special_update(const SpecialTerm& term, const VectorXd& beta, const VectorXd& w,
                        const VectorXd& partial_residual) {
    const double f0 = special_objective(term, beta, w, partial_residual);
    VectorXd best = beta;
    double fbest = f0;
    for (const VectorXd& from : {beta, term.start()}) {
        VectorXd cand = run_lm(term, from, w, partial_residual);
        double fc = cand.allFinite() ? special_objective(term, cand, w, partial_residual)
                                     : std::numeric_limits<double>::infinity();
        if (fc < fbest) {
            best = cand;
            fbest = fc;
        }
        if (std::isfinite(fbest) && fbest <= f0) break;
    }
    if (!std::isfinite(fbest))
        throw NumericalError("special term " + term.label() + ": optimizer failed after restart");
    return best;
}

VectorXd special_propose(const SpecialTerm& term, const VectorXd& beta, const SpecialTerm::LogLikFn& loglik,
                         Rng& rng) {
    VectorXd cur = beta;
    for (Eigen::Index i = 0; i < cur.size(); ++i) {
        auto target = [&](double v) {
            VectorXd b = cur;
            b[i] = v;
            double lp = loglik(b) + term.log_prior(b);
            return std::isfinite(lp) ? lp : -std::numeric_limits<double>::infinity();
        };
        if (!std::isfinite(target(cur[i])))
            throw NumericalError("special term " + term.label() + ": non-finite conditional at current state");
        cur[i] = slice_step(target, cur[i], rng);
    }
    return cur;
}

namespace {

std::mutex registry_mutex;

std::map<std::string, SpecialFactory>& registry() {
    static std::map<std::string, SpecialFactory> r{
        {"gc", [](const std::string& label, const VectorXd& x) { return gompertz_term(x, label); }}};
    return r;
}

}

void register_special(const std::string& code, SpecialFactory factory) {
    std::lock_guard lock(registry_mutex);
    registry()[code] = std::move(factory);
}

bool has_special(const std::string& code) {
    std::lock_guard lock(registry_mutex);
    return registry().count(code) > 0;
}

SpecialTermPtr make_special(const std::string& code, const std::string& label, const VectorXd& x) {
    SpecialFactory f;
    {
        std::lock_guard lock(registry_mutex);
        auto it = registry().find(code);
        if (it == registry().end()) throw FormulaError("unknown special term code '" + code + "'");
        f = it->second;
    }
    return f(label, x);
}

}
