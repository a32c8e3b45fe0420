#include "distreg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "distreg/error.hpp"
#include "distreg/predict.hpp"

namespace distreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double norm_quantile(double u) {
    u = std::clamp(u, 1e-16, 1.0 - 1e-16);
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

ParamValues row_params(const ParamValues& par, Eigen::Index i) {
    ParamValues out;
    for (const auto& p : par) out.push_back(VectorXd::Constant(1, p.size() == 1 ? p[0] : p[i]));
    return out;
}

double cdf_at(const Family& f, double t, const ParamValues& p1) { return f.cdf(VectorXd::Constant(1, t), p1)[0]; }

/// Response column of new data, encoded like the training response.
VectorXd response_of(const ModelFrame& frame, const DataTable& data) {
    const Column& c = data.column(frame.response);
    VectorXd y(static_cast<Eigen::Index>(c.size()));
    if (c.categorical) {
        if (frame.response_levels.size() != 2) throw DataError("categorical response is not supported for this family");
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (c.cat[i] != frame.response_levels[0] && c.cat[i] != frame.response_levels[1])
                throw DataError("unseen response level '" + c.cat[i] + "'");
            y[static_cast<Eigen::Index>(i)] = c.cat[i] == frame.response_levels[1] ? 1.0 : 0.0;
        }
    } else {
        for (std::size_t i = 0; i < c.size(); ++i) y[static_cast<Eigen::Index>(i)] = c.num[i];
    }
    if (!y.allFinite()) throw DataError("response has missing values");
    return y;
}

}

ParamValues point_parameters(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                             const DataTable* newdata) {
    if (!fit && !samples) throw ConfigError("no fit or samples to evaluate");
    if (!samples) {
        if (!newdata) return frame.family->map_to_params(compute_eta(frame, fit->beta));
        return frame.family->map_to_params(predict_eta(frame, fit->beta, *newdata));
    }
    if (samples->nsave() == 0) throw DataError("empty sample matrix");
    if (newdata) {
        PredictionRequest req;
        req.target = PredictTarget::parameter;
        req.functional = Functional::mean;
        ParamValues out;
        for (auto& p : predict(frame, nullptr, samples, *newdata, req)) out.push_back(p.values.col(0));
        return out;
    }
    const Coefficients base = start_coefficients(frame);
    ParamValues acc(frame.params.size(), VectorXd::Zero(static_cast<Eigen::Index>(frame.n)));
    for (std::size_t i = 0; i < samples->nsave(); ++i) {
        ParamValues p = frame.family->map_to_params(compute_eta(frame, coefficients_from_row(frame, *samples, i, base)));
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p[k];
    }
    for (auto& a : acc) a /= static_cast<double>(samples->nsave());
    return acc;
}

ResidualSet quantile_residuals(const Family& family, const VectorXd& y, const ParamValues& par, std::uint64_t seed) {
    if (!family.has_cdf()) throw DataError(family.name() + " has no cdf");
    ResidualSet out;
    VectorXd F = family.cdf(y, par);
    out.residuals.resize(y.size());
    if (!family.discrete()) {
        for (Eigen::Index i = 0; i < y.size(); ++i) out.residuals[i] = norm_quantile(F[i]);
        return out;
    }
    VectorXd Flo = family.cdf((y.array() - 1.0).matrix(), par);
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double u = Flo[i] + unif(rng) * (F[i] - Flo[i]);
        out.residuals[i] = norm_quantile(u);
    }
    out.seed = seed;
    return out;
}

ResidualSet quantile_residuals(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                               std::uint64_t seed) {
    return quantile_residuals(*frame.family, frame.y, point_parameters(frame, fit, samples), seed);
}

double crps_gaussian(double mu, double sigma, double y) {
    double z = (y - mu) / sigma;
    return sigma * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - 1.0 / std::sqrt(std::numbers::pi));
}

CrpsResult crps_numeric(const Family& family, const VectorXd& y, const ParamValues& par, double abs_tol) {
    if (!family.has_cdf()) throw DataError(family.name() + " has no cdf");
    if (family.name() == "lm") throw DataError("lm: the plug-in cdf is not defined per observation");
    using boost::math::quadrature::gauss_kronrod;
    CrpsResult out;
    out.crps.resize(y.size());
    out.converged.assign(static_cast<std::size_t>(y.size()), true);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const ParamValues p1 = row_params(par, i);
        const double yi = y[i];
        if (family.discrete()) {
            // The cdf is a step function: integrate exactly over unit intervals.
            double s = 0.0;
            const double lo = std::min<double>(family.support_min(), std::floor(yi));
            for (double j = lo;; j += 1.0) {
                double F = cdf_at(family, j, p1);
                double d = F - (j >= yi ? 1.0 : 0.0);
                s += d * d;
                if (j >= yi && 1.0 - F < 1e-14) break;
                if (j - lo > 1e7) {
                    out.converged[static_cast<std::size_t>(i)] = false;
                    break;
                }
            }
            out.crps[i] = s;
            continue;
        }
        auto lower = [&](double u) {
            if (u >= 1.0) return 0.0;
            double t = yi - u / (1.0 - u);
            double F = cdf_at(family, t, p1);
            return F * F / ((1.0 - u) * (1.0 - u));
        };
        auto upper = [&](double u) {
            if (u >= 1.0) return 0.0;
            double t = yi + u / (1.0 - u);
            double S = 1.0 - cdf_at(family, t, p1);
            return S * S / ((1.0 - u) * (1.0 - u));
        };
        double e1 = 0.0, e2 = 0.0;
        double a = gauss_kronrod<double, 31>::integrate(lower, 0.0, 1.0, 15, 1e-10, &e1);
        double b = gauss_kronrod<double, 31>::integrate(upper, 0.0, 1.0, 15, 1e-10, &e2);
        out.crps[i] = a + b;
        out.converged[static_cast<std::size_t>(i)] = std::isfinite(a + b) && e1 + e2 <= abs_tol;
    }
    return out;
}

CrpsResult crps_numeric(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                        const DataTable* newdata) {
    ParamValues par = point_parameters(frame, fit, samples, newdata);
    VectorXd y = newdata ? response_of(frame, *newdata) : frame.y;
    return crps_numeric(*frame.family, y, par);
}

Rootogram rootogram_freq(const Family& family, const VectorXd& y, const ParamValues& par, int max_count,
                         std::optional<int> min_count) {
    if (!family.discrete()) throw DataError(family.name() + " is not a count family");
    Rootogram r;
    r.min_count = min_count.value_or(family.support_min());
    if (max_count < r.min_count) throw ConfigError("max_count below the smallest count");
    const Eigen::Index bins = max_count - r.min_count + 1;
    r.observed = VectorXd::Zero(bins);
    r.expected = VectorXd::Zero(bins);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double v = y[i];
        if (v == std::floor(v) && v >= r.min_count && v <= max_count) r.observed[static_cast<Eigen::Index>(v) - r.min_count] += 1.0;
    }
    for (Eigen::Index j = 0; j < bins; ++j) {
        VectorXd yj = VectorXd::Constant(y.size(), static_cast<double>(r.min_count + j));
        r.expected[j] = family.density(yj, par, false).sum();
    }
    return r;
}

Rootogram rootogram_freq(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                         const DataTable* newdata, int max_count) {
    ParamValues par = point_parameters(frame, fit, samples, newdata);
    VectorXd y = newdata ? response_of(frame, *newdata) : frame.y;
    return rootogram_freq(*frame.family, y, par, max_count);
}

VectorXd acf(const VectorXd& x, int max_lag) {
    const Eigen::Index n = x.size();
    if (max_lag < 0 || n < max_lag + 2) throw DataError("acf: need at least max_lag + 2 draws");
    VectorXd d = x.array() - x.mean();
    const double c0 = d.squaredNorm();
    VectorXd out = VectorXd::Zero(max_lag + 1);
    out[0] = 1.0;
    if (c0 == 0.0) return out;
    for (int l = 1; l <= max_lag; ++l) out[l] = d.head(n - l).dot(d.tail(n - l)) / c0;
    return out;
}

AcfSummary acf_summary(const MatrixXd& draws, int max_lag) {
    AcfSummary s;
    s.acf.resize(max_lag + 1, draws.cols());
    for (Eigen::Index j = 0; j < draws.cols(); ++j) s.acf.col(j) = acf(draws.col(j), max_lag);
    s.max_acf = VectorXd::Zero(max_lag + 1);
    s.max_acf[0] = 1.0;
    if (draws.cols() > 0)
        for (int l = 1; l <= max_lag; ++l) s.max_acf[l] = s.acf.row(l).cwiseAbs().maxCoeff();
    return s;
}

double quantile7(std::vector<double> v, double p) {
    if (v.empty()) throw DataError("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    double h = (static_cast<double>(v.size()) - 1.0) * p;
    auto lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Interval95 c95(const VectorXd& x) {
    if (x.size() == 0) throw DataError("c95 of an empty sample");
    std::vector<double> v(x.data(), x.data() + x.size());
    return {quantile7(v, 0.025), x.mean(), quantile7(v, 0.975)};
}

double effective_sample_size(const VectorXd& x) {
    const Eigen::Index n = x.size();
    if (n < 4) return static_cast<double>(n);
    VectorXd d = x.array() - x.mean();
    const double g0 = d.squaredNorm() / static_cast<double>(n);
    if (g0 == 0.0) return static_cast<double>(n);
    auto gamma = [&](Eigen::Index t) { return d.head(n - t).dot(d.tail(n - t)) / static_cast<double>(n); };
    double sum = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
        double G = gamma(2 * m) + gamma(2 * m + 1);
        if (G <= 0.0) break;
        G = std::min(G, prev);
        prev = G;
        sum += G;
    }
    double tau = -g0 + 2.0 * sum;
    if (!(tau > 0.0)) return static_cast<double>(n);
    return static_cast<double>(n) * g0 / tau;
}

double mc_standard_error(const VectorXd& x) {
    if (x.size() < 2) throw DataError("need at least two draws for a Monte-Carlo standard error");
    double var = (x.array() - x.mean()).square().sum() / static_cast<double>(x.size() - 1);
    return std::sqrt(var / effective_sample_size(x));
}

double ks_normal_distance(const VectorXd& x) {
    std::vector<double> v(x.data(), x.data() + x.size());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        double F = norm_cdf(v[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - F, F - static_cast<double>(i) / n});
    }
    return d;
}

}
