#include "distreg/family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "distreg/error.hpp"

namespace distreg {

using Eigen::VectorXd;

namespace {

constexpr double log_2pi = 1.8378770664093454835606594728112;

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double norm_quantile(double u) {
    if (u <= 0.0) return -std::numeric_limits<double>::infinity();
    if (u >= 1.0) return std::numeric_limits<double>::infinity();
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

void check_sizes(const VectorXd& y, const ParamValues& par, std::size_t k) {
    if (par.size() != k) throw DataError("expected " + std::to_string(k) + " parameter columns");
    for (const auto& p : par)
        if (p.size() != y.size() && p.size() != 1)
            throw DataError("parameter column length does not match the response");
}

double at(const VectorXd& v, Eigen::Index i) { return v.size() == 1 ? v[0] : v[i]; }

}

Link Link::from_name(const std::string& name) {
    if (name == "identity") return Link(Kind::identity);
    if (name == "log") return Link(Kind::log);
    if (name == "logit") return Link(Kind::logit);
    throw ConfigError("unknown link '" + name + "'");
}

std::string Link::name() const {
    switch (kind_) {
        case Kind::identity: return "identity";
        case Kind::log: return "log";
        case Kind::logit: return "logit";
    }
    return {};
}

double Link::link(double theta) const {
    switch (kind_) {
        case Kind::identity: return theta;
        case Kind::log: return std::log(theta);
        case Kind::logit: return std::log(theta) - std::log1p(-theta);
    }
    return theta;
}

double Link::inverse(double eta) const {
    switch (kind_) {
        case Kind::identity: return eta;
        case Kind::log: return std::exp(std::min(eta, 700.0));
        case Kind::logit:
            if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
            else {
                double e = std::exp(eta);
                return e / (1.0 + e);
            }
    }
    return eta;
}

VectorXd Link::inverse(const VectorXd& eta) const {
    VectorXd out(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) out[i] = inverse(eta[i]);
    return out;
}

Family::Family(std::vector<std::string> params, std::vector<Link> links)
    : params_{std::move(params)}, links_{std::move(links)} {}

int Family::param_index(const std::string& name) const {
    auto it = std::find(params_.begin(), params_.end(), name);
    return it == params_.end() ? -1 : static_cast<int>(it - params_.begin());
}

double Family::loglik(const VectorXd& y, const ParamValues& par) const {
    return density(y, par, true).sum();
}

void Family::check_response(const VectorXd& y) const {
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (!std::isfinite(y[i])) throw DataError("non-finite response value");
}

void Family::check_params(const ParamValues& par) const {
    if (par.size() != nparams()) throw DataError("wrong number of parameter columns for " + name());
}

ParamValues Family::map_to_params(const std::vector<VectorXd>& eta) const {
    ParamValues par;
    par.reserve(eta.size());
    for (std::size_t k = 0; k < eta.size(); ++k) par.push_back(links_[k].inverse(eta[k]));
    return par;
}

namespace {

class GaussianFamily : public Family {
    public:
        GaussianFamily() : Family({"mu", "sigma"}, {Link(Link::Kind::identity), Link(Link::Kind::log)}) {}

        std::string name() const override { return "gaussian"; }

        void check_params(const ParamValues& par) const override {
            Family::check_params(par);
            for (Eigen::Index i = 0; i < par[1].size(); ++i)
                if (!(par[1][i] > 0.0)) throw DataError("gaussian: sigma must be positive");
        }

        VectorXd density(const VectorXd& y, const ParamValues& par, bool log) const override {
            check_sizes(y, par, 2);
            check_params(par);
            VectorXd d(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                double s = at(par[1], i), z = (y[i] - at(par[0], i)) / s;
                d[i] = -0.5 * log_2pi - std::log(s) - 0.5 * z * z;
            }
            return log ? d : VectorXd(d.array().exp());
        }

        VectorXd cdf(const VectorXd& y, const ParamValues& par) const override {
            check_sizes(y, par, 2);
            check_params(par);
            VectorXd p(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) p[i] = norm_cdf((y[i] - at(par[0], i)) / at(par[1], i));
            return p;
        }

        VectorXd quantile(const VectorXd& u, const ParamValues& par) const override {
            check_sizes(u, par, 2);
            VectorXd q(u.size());
            for (Eigen::Index i = 0; i < u.size(); ++i) q[i] = at(par[0], i) + at(par[1], i) * norm_quantile(u[i]);
            return q;
        }

        VectorXd random(const ParamValues& par, Rng& rng) const override {
            std::normal_distribution<double> nd;
            VectorXd out(par[0].size());
            for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = at(par[0], i) + at(par[1], i) * nd(rng);
            return out;
        }

        VectorXd score(std::size_t k, const VectorXd& y, const ParamValues& par) const override {
            VectorXd s(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                double r = y[i] - at(par[0], i), s2 = at(par[1], i) * at(par[1], i);
                s[i] = k == 0 ? r / s2 : -1.0 + r * r / s2;
            }
            return s;
        }

        VectorXd hess(std::size_t k, const VectorXd& y, const ParamValues& par) const override {
            VectorXd h(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                double s = at(par[1], i);
                h[i] = k == 0 ? 1.0 / (s * s) : 2.0;
            }
            return h;
        }

        double init(std::size_t k, const VectorXd& y) const override {
            double m = y.mean();
            if (k == 0) return m;
            double v = y.size() > 1 ? (y.array() - m).square().sum() / static_cast<double>(y.size() - 1) : 1.0;
            return std::log(std::sqrt(std::max(v, 1e-10)));
        }
};

class BinomialFamily : public Family {
    public:
        BinomialFamily() : Family({"pi"}, {Link(Link::Kind::logit)}) {}

        std::string name() const override { return "binomial"; }
        bool discrete() const override { return true; }

        void check_response(const VectorXd& y) const override {
            for (Eigen::Index i = 0; i < y.size(); ++i)
                if (y[i] != 0.0 && y[i] != 1.0) throw DataError("binomial: response must be 0 or 1");
        }

        void check_params(const ParamValues& par) const override {
            Family::check_params(par);
            for (Eigen::Index i = 0; i < par[0].size(); ++i)
                if (!(par[0][i] >= 0.0 && par[0][i] <= 1.0)) throw DataError("binomial: pi must be in [0, 1]");
        }

        VectorXd density(const VectorXd& y, const ParamValues& par, bool log) const override {
            check_sizes(y, par, 1);
            check_params(par);
            VectorXd d(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                double p = at(par[0], i);
                if (y[i] == 1.0) d[i] = std::log(p);
                else if (y[i] == 0.0) d[i] = std::log1p(-p);
                else d[i] = -std::numeric_limits<double>::infinity();
            }
            return log ? d : VectorXd(d.array().exp());
        }

        VectorXd cdf(const VectorXd& y, const ParamValues& par) const override {
            check_sizes(y, par, 1);
            VectorXd out(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i)
                out[i] = y[i] < 0.0 ? 0.0 : (y[i] < 1.0 ? 1.0 - at(par[0], i) : 1.0);
            return out;
        }

        VectorXd quantile(const VectorXd& u, const ParamValues& par) const override {
            VectorXd q(u.size());
            for (Eigen::Index i = 0; i < u.size(); ++i) q[i] = u[i] <= 1.0 - at(par[0], i) ? 0.0 : 1.0;
            return q;
        }

        VectorXd random(const ParamValues& par, Rng& rng) const override {
            std::uniform_real_distribution<double> unif;
            VectorXd out(par[0].size());
            for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = unif(rng) < at(par[0], i) ? 1.0 : 0.0;
            return out;
        }

        VectorXd score(std::size_t, const VectorXd& y, const ParamValues& par) const override {
            VectorXd s(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) s[i] = y[i] - at(par[0], i);
            return s;
        }

        VectorXd hess(std::size_t, const VectorXd& y, const ParamValues& par) const override {
            VectorXd h(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                double p = at(par[0], i);
                h[i] = p * (1.0 - p);
            }
            return h;
        }

        double init(std::size_t, const VectorXd& y) const override {
            double m = std::clamp(y.mean(), 0.01, 0.99);
            return std::log(m / (1.0 - m));
        }
};

}

namespace ztnb {

double p_zero(double mu, double theta) {
    return std::exp(-theta * std::log1p(mu / theta));
}

namespace {
// 1 - P(NB = 0), accurate when mu / theta is small.
double one_minus_p0(double mu, double theta) { return -std::expm1(-theta * std::log1p(mu / theta)); }
}

double log_density(double y, double mu, double theta) {
    if (y < 1.0 || y != std::floor(y)) return -std::numeric_limits<double>::infinity();
    double lnb = std::lgamma(y + theta) - std::lgamma(theta) - std::lgamma(y + 1.0) -
                 theta * std::log1p(mu / theta) + y * (std::log(mu) - std::log(theta + mu));
    return lnb - std::log(one_minus_p0(mu, theta));
}

double cdf(double y, double mu, double theta) {
    if (y < 1.0) return 0.0;
    double yf = std::floor(y);
    double p = theta / (theta + mu);
    // P(NB > y) = I_{1-p}(y + 1, theta); the truncated survival is that over 1 - p0.
    double upper = boost::math::ibeta(yf + 1.0, theta, 1.0 - p);
    return std::clamp(1.0 - upper / one_minus_p0(mu, theta), 0.0, 1.0);
}

}

namespace {

class ZtnbFamily : public Family {
    public:
        ZtnbFamily() : Family({"mu", "theta"}, {Link(Link::Kind::log), Link(Link::Kind::log)}) {}

        std::string name() const override { return "ztnbinom"; }
        bool discrete() const override { return true; }
        int support_min() const override { return 1; }

        void check_response(const VectorXd& y) const override {
            for (Eigen::Index i = 0; i < y.size(); ++i)
                if (!(y[i] >= 1.0) || y[i] != std::floor(y[i]))
                    throw DataError("ztnbinom: response must be an integer >= 1");
        }

        void check_params(const ParamValues& par) const override {
            Family::check_params(par);
            for (std::size_t k = 0; k < 2; ++k)
                for (Eigen::Index i = 0; i < par[k].size(); ++i)
                    if (!(par[k][i] > 0.0) || !std::isfinite(par[k][i]))
                        throw DataError("ztnbinom: " + params()[k] + " must be positive");
        }

        VectorXd density(const VectorXd& y, const ParamValues& par, bool log) const override {
            check_sizes(y, par, 2);
            check_params(par);
            VectorXd d(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) d[i] = ztnb::log_density(y[i], at(par[0], i), at(par[1], i));
            return log ? d : VectorXd(d.array().exp());
        }

        double loglik(const VectorXd& y, const ParamValues& par) const override {
            check_response(y);
            return density(y, par, true).sum();
        }

        VectorXd cdf(const VectorXd& y, const ParamValues& par) const override {
            check_sizes(y, par, 2);
            check_params(par);
            VectorXd out(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = ztnb::cdf(y[i], at(par[0], i), at(par[1], i));
            return out;
        }

        VectorXd quantile(const VectorXd& u, const ParamValues& par) const override {
            VectorXd q(u.size());
            for (Eigen::Index i = 0; i < u.size(); ++i) q[i] = quantile_one(u[i], at(par[0], i), at(par[1], i));
            return q;
        }

        VectorXd random(const ParamValues& par, Rng& rng) const override {
            std::uniform_real_distribution<double> unif;
            VectorXd out(par[0].size());
            for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = quantile_one(unif(rng), at(par[0], i), at(par[1], i));
            return out;
        }

        VectorXd score(std::size_t k, const VectorXd& y, const ParamValues& par) const override {
            VectorXd s(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                Terms t(y[i], at(par[0], i), at(par[1], i));
                s[i] = k == 0 ? t.score_mu() : t.score_theta();
            }
            return s;
        }

        VectorXd hess(std::size_t k, const VectorXd& y, const ParamValues& par) const override {
            VectorXd h(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                Terms t(y[i], at(par[0], i), at(par[1], i));
                h[i] = std::max(k == 0 ? t.hess_mu() : t.hess_theta(), 1e-10);
            }
            return h;
        }

        double init(std::size_t k, const VectorXd& y) const override {
            double m = y.mean();
            if (k == 0) return std::log(std::max(m, 1e-3));
            double v = y.size() > 1 ? (y.array() - m).square().sum() / static_cast<double>(y.size() - 1) : m;
            double theta = v > m ? m * m / (v - m) : 10.0;
            return std::log(std::clamp(theta, 1e-3, 1e3));
        }

    private:
        // Derivatives of log d with respect to eta_mu = log mu and eta_theta = log theta.
        // With a = theta / (theta + mu) and q = p0 / (1 - p0):
        //   log p0 = theta log a, d log p0 / d eta_mu = -theta (1 - a),
        //   d log p0 / d theta = log a + mu / (theta + mu) =: h.
        struct Terms {
            double y, mu, theta, a, q, L;
            Terms(double y_, double mu_, double theta_) : y{y_}, mu{mu_}, theta{theta_} {
                a = theta / (theta + mu);
                L = -std::log1p(mu / theta);
                double omp0 = -std::expm1(theta * L);
                q = std::exp(theta * L) / omp0;
            }
            double score_mu() const { return a * (y - mu) - q * theta * (1.0 - a); }
            double hess_mu() const {
                return a * (1.0 - a) * (y - mu) + a * mu - theta * theta * q * (1.0 + q) * (1.0 - a) * (1.0 - a) +
                       theta * q * a * (1.0 - a);
            }
            double g() const {
                using boost::math::digamma;
                return digamma(y + theta) - digamma(theta) + L + (mu - y) / (theta + mu);
            }
            double h() const { return L + mu / (theta + mu); }
            double score_theta() const { return theta * (g() + q * h()); }
            double hess_theta() const {
                using boost::math::trigamma;
                double tm = theta + mu;
                double gp = trigamma(y + theta) - trigamma(theta) + mu / (theta * tm) - (mu - y) / (tm * tm);
                double hp = mu / (theta * tm) - mu / (tm * tm);
                double hv = h();
                double dS = g() + theta * gp + q * (1.0 + q) * theta * hv * hv + q * hv + q * theta * hp;
                return -theta * dS;
            }
        };

        static double quantile_one(double u, double mu, double theta) {
            if (u <= 0.0) return 1.0;
            double p = theta / (theta + mu);
            double p0 = ztnb::p_zero(mu, theta);
            double target = p0 + u * (1.0 - p0);
            if (target >= 1.0) return std::numeric_limits<double>::infinity();
            using Policy = boost::math::policies::policy<
                boost::math::policies::discrete_quantile<boost::math::policies::integer_round_up>>;
            boost::math::negative_binomial_distribution<double, Policy> nb(theta, p);
            double k = boost::math::quantile(nb, target);
            // The boost search works on the untruncated cdf; confirm against the truncated one.
            k = std::max(k, 1.0);
            while (k > 1.0 && ztnb::cdf(k - 1.0, mu, theta) >= u) k -= 1.0;
            while (ztnb::cdf(k, mu, theta) < u) k += 1.0;
            return k;
        }
};

}

namespace lm {

double plugin_sigma(const VectorXd& y, const VectorXd& mu, int p_effective) {
    const auto n = y.size();
    if (n <= p_effective) throw DataError("lm: need more observations than coefficients");
    double rss = (y - mu).squaredNorm();
    if (!(rss > 0.0)) throw NumericalError("lm: residuals are all zero, plug-in sigma degenerates");
    return std::sqrt(rss / static_cast<double>(n - p_effective));
}

}

namespace {

class LmFamily : public Family {
    public:
        explicit LmFamily(int p) : Family({"mu"}, {Link(Link::Kind::identity)}), p_{p} {}

        std::string name() const override { return "lm"; }
        bool has_cdf() const override { return true; }

        VectorXd density(const VectorXd& y, const ParamValues& par, bool log) const override {
            check_sizes(y, par, 1);
            VectorXd mu = broadcast(par[0], y.size());
            double s = lm::plugin_sigma(y, mu, p_);
            VectorXd z = (y - mu) / s;
            VectorXd d = (-0.5 * log_2pi - std::log(s) - 0.5 * z.array().square()).matrix();
            return log ? d : VectorXd(d.array().exp());
        }

        VectorXd cdf(const VectorXd& y, const ParamValues& par) const override {
            VectorXd mu = broadcast(par[0], y.size());
            double s = lm::plugin_sigma(y, mu, p_);
            VectorXd p(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) p[i] = norm_cdf((y[i] - mu[i]) / s);
            return p;
        }

        VectorXd quantile(const VectorXd&, const ParamValues&) const override {
            throw DataError("lm: the plug-in sigma needs the response, quantiles are undefined");
        }
        VectorXd random(const ParamValues&, Rng&) const override {
            throw DataError("lm: the plug-in sigma needs the response, cannot simulate");
        }

        // loglik = -n/2 log(2 pi) - n log sigma - (n - p)/2 with sigma^2 = RSS/(n - p), so
        // d loglik / d eta_i = n r_i / RSS.
        VectorXd score(std::size_t, const VectorXd& y, const ParamValues& par) const override {
            VectorXd r = y - broadcast(par[0], y.size());
            double rss = r.squaredNorm();
            if (!(rss > 0.0)) throw NumericalError("lm: residuals are all zero");
            return r * (static_cast<double>(y.size()) / rss);
        }

        // n / RSS, the observed curvature without its r_i^2 term.
        VectorXd hess(std::size_t, const VectorXd& y, const ParamValues& par) const override {
            VectorXd r = y - broadcast(par[0], y.size());
            double rss = r.squaredNorm();
            if (!(rss > 0.0)) throw NumericalError("lm: residuals are all zero");
            return VectorXd::Constant(y.size(), static_cast<double>(y.size()) / rss);
        }

        double init(std::size_t, const VectorXd& y) const override { return y.mean(); }

    private:
        static VectorXd broadcast(const VectorXd& v, Eigen::Index n) {
            return v.size() == 1 ? VectorXd::Constant(n, v[0]) : v;
        }
        int p_;
};

}

FamilyPtr gaussian_family() { return std::make_shared<GaussianFamily>(); }
FamilyPtr binomial_family() { return std::make_shared<BinomialFamily>(); }
FamilyPtr ztnbinom_family() { return std::make_shared<ZtnbFamily>(); }

FamilyPtr lm_family(int p_effective) {
    if (p_effective < 0) throw ConfigError("lm: p_effective must be >= 0");
    return std::make_shared<LmFamily>(p_effective);
}

FamilyPtr make_family(const std::string& name, int p_effective) {
    if (name == "gaussian") return gaussian_family();
    if (name == "binomial") return binomial_family();
    if (name == "ztnbinom") return ztnbinom_family();
    if (name == "lm") return lm_family(p_effective);
    throw ConfigError("unknown family '" + name + "'");
}

}
