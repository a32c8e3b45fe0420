#include "distreg/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "distreg/error.hpp"

namespace distreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

int SampleMatrix::column(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

VectorXd SampleMatrix::col(const std::string& name) const {
    int c = column(name);
    if (c < 0) throw DataError("no sample column '" + name + "'");
    return draws.col(c);
}

std::vector<int> thinning_grid(int n_iter, int burnin, int thin) {
    if (n_iter < 0 || burnin < 0 || thin < 1) throw ConfigError("invalid n_iter/burnin/thin");
    if (burnin > n_iter) throw ConfigError("burnin exceeds n_iter");
    std::vector<int> g;
    for (int i = burnin; i <= n_iter; i += thin) g.push_back(i);
    return g;
}

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

double total_loglik(const ModelFrame& frame, const std::vector<VectorXd>& eta) {
    double ll = frame.family->loglik(frame.y, frame.family->map_to_params(eta));
    return std::isfinite(ll) ? ll : neg_inf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

VectorXd standard_normal(Eigen::Index n, Rng& rng) {
    std::normal_distribution<double> nd;
    VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = nd(rng);
    return z;
}

double inverse_gamma_draw(double shape, double scale, Rng& rng) {
    std::gamma_distribution<double> g(shape, 1.0 / scale);
    return 1.0 / g(rng);
}

/// Gaussian IWLS proposal N(m, P^-1) evaluated at one state.
struct Proposal {
    VectorXd mean;
    Eigen::LLT<MatrixXd> llt;
    double half_logdet = 0.0;

    double log_density(const VectorXd& x) const {
        VectorXd d = llt.matrixU() * (x - mean);
        return half_logdet - 0.5 * d.squaredNorm();
    }
};

Proposal make_proposal(const ModelFrame& frame, const TermBlock& b, std::size_t k, const VectorXd& beta,
                       double tau2, const std::vector<VectorXd>& eta) {
    WorkingQuantities wq = working_quantities(*frame.family, k, frame.y, eta);
    VectorXd r = wq.z - eta[k] + b.fitted(beta);
    MatrixXd XtW = b.X.transpose() * wq.w.asDiagonal();
    MatrixXd P = XtW * b.X;
    if (b.K.size() > 0) P += b.K / tau2;
    Proposal q;
    q.llt.compute(P);
    if (q.llt.info() != Eigen::Success) {
        const double tr = std::max(P.trace(), 1e-300);
        bool ok = false;
        for (double eps = 1e-12; eps <= 1e-7 * (1 + 1e-9) && !ok; eps *= 10.0) {
            q.llt.compute(P + MatrixXd::Identity(P.rows(), P.cols()) * (eps * tr));
            ok = q.llt.info() == Eigen::Success;
        }
        if (!ok) throw NumericalError("proposal precision of block " + b.label + " is not positive definite");
    }
    q.mean = q.llt.solve(XtW * r);
    q.half_logdet = q.llt.matrixLLT().diagonal().array().log().sum();
    return q;
}

struct Layout {
    std::vector<std::string> names;
    std::vector<std::vector<std::vector<int>>> coef_col;  ///< [k][j][i] -> column
    std::vector<std::vector<int>> tau2_col;
    std::vector<int> alpha_col;
};

Layout make_layout(const ModelFrame& frame) {
    Layout L;
    for (std::size_t k = 0; k < frame.params.size(); ++k) {
        const auto& blocks = frame.params[k].blocks;
        L.coef_col.emplace_back(blocks.size());
        L.tau2_col.emplace_back(blocks.size(), -1);
        for (std::size_t j = 0; j < blocks.size(); ++j) {
            for (const auto& n : blocks[j].coef_names) {
                L.coef_col[k][j].push_back(static_cast<int>(L.names.size()));
                L.names.push_back(n);
            }
            if (!blocks[j].tau2_name.empty()) {
                L.tau2_col[k][j] = static_cast<int>(L.names.size());
                L.names.push_back(blocks[j].tau2_name);
            }
        }
        L.alpha_col.push_back(static_cast<int>(L.names.size()));
        L.names.push_back(frame.params[k].name + ".alpha");
    }
    return L;
}

}

SampleMatrix gmcmc(const ModelFrame& frame, const FitState& start, const McmcOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<int> grid = thinning_grid(opts.n_iter, opts.burnin, opts.thin);
    for (const auto& pb : frame.params)
        for (const auto& b : pb.blocks)
            if (b.ncoef() > max_block_size)
                throw ConfigError("block " + b.label + " has more than " + std::to_string(max_block_size) +
                                  " coefficients");

    Rng rng(opts.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Coefficients beta = start.beta;
    std::vector<std::vector<double>> tau2 = start.tau2;
    std::vector<VectorXd> eta = compute_eta(frame, beta);
    double ll = total_loglik(frame, eta);
    if (!std::isfinite(ll)) throw NumericalError("log-likelihood is not finite at the starting values");

    const Layout L = make_layout(frame);
    SampleMatrix out;
    out.names = L.names;
    out.draws.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(L.names.size()));
    out.n_iter = opts.n_iter;
    out.burnin = opts.burnin;
    out.thin = opts.thin;
    out.seed = opts.seed;

    std::vector<std::vector<double>> accept_sum;
    for (const auto& pb : frame.params) accept_sum.emplace_back(pb.blocks.size(), 0.0);
    std::vector<double> alpha(frame.params.size(), 1.0);

    auto save = [&](Eigen::Index row) {
        for (std::size_t k = 0; k < frame.params.size(); ++k) {
            for (std::size_t j = 0; j < beta[k].size(); ++j) {
                for (std::size_t i = 0; i < L.coef_col[k][j].size(); ++i)
                    out.draws(row, L.coef_col[k][j][i]) = beta[k][j][static_cast<Eigen::Index>(i)];
                if (L.tau2_col[k][j] >= 0) out.draws(row, L.tau2_col[k][j]) = tau2[k][j];
            }
            out.draws(row, L.alpha_col[k]) = alpha[k];
        }
    };

    std::size_t next = 0;
    if (!grid.empty() && grid[0] == 0) save(static_cast<Eigen::Index>(next++));

    for (int it = 1; it <= opts.n_iter; ++it) {
        for (std::size_t k = 0; k < frame.params.size(); ++k) {
            double a_sum = 0.0;
            int a_cnt = 0;
            for (std::size_t j = 0; j < frame.params[k].blocks.size(); ++j) {
                const TermBlock& b = frame.params[k].blocks[j];
                if (b.ncoef() == 0) continue;
                double acc = 1.0;
                if (b.kind == BlockKind::special) {
                    const VectorXd base = eta[k] - b.fitted(beta[k][j]);
                    std::vector<VectorXd> work = eta;
                    auto fn = [&](const VectorXd& bb) {
                        work[k] = base + b.fitted(bb);
                        return total_loglik(frame, work);
                    };
                    VectorXd nb = b.special->propose(beta[k][j], fn, rng);
                    eta[k] = base + b.fitted(nb);
                    beta[k][j] = std::move(nb);
                    ll = total_loglik(frame, eta);
                } else {
                    const VectorXd& cur = beta[k][j];
                    Proposal fwd = make_proposal(frame, b, k, cur, tau2[k][j], eta);
                    VectorXd cand = fwd.mean + fwd.llt.matrixU().solve(standard_normal(cur.size(), rng));
                    std::vector<VectorXd> eta_c = eta;
                    eta_c[k] += b.fitted(cand) - b.fitted(cur);
                    double ll_c = total_loglik(frame, eta_c);
                    double log_alpha = neg_inf;
                    if (std::isfinite(ll_c)) {
                        try {
                            Proposal rev = make_proposal(frame, b, k, cand, tau2[k][j], eta_c);
                            log_alpha = ll_c + log_prior(b, cand, tau2[k][j]) - ll - log_prior(b, cur, tau2[k][j]) +
                                        rev.log_density(cur) - fwd.log_density(cand);
                        } catch (const NumericalError&) {
                            log_alpha = neg_inf;
                        }
                    }
                    if (std::isnan(log_alpha)) log_alpha = neg_inf;
                    acc = log_alpha >= 0.0 ? 1.0 : std::exp(log_alpha);
                    if (std::log(unif(rng)) < log_alpha) {
                        beta[k][j] = std::move(cand);
                        eta = std::move(eta_c);
                        ll = ll_c;
                    }
                    if (!b.fixed && b.K.size() > 0) {
                        double shape = tau2_prior_a + 0.5 * b.penalty_rank;
                        double scale = tau2_prior_b + 0.5 * beta[k][j].dot(b.K * beta[k][j]);
                        tau2[k][j] = inverse_gamma_draw(shape, scale, rng);
                    }
                }
                accept_sum[k][j] += acc;
                a_sum += acc;
                ++a_cnt;
            }
            alpha[k] = a_cnt > 0 ? a_sum / a_cnt : 1.0;
        }
        if (next < grid.size() && grid[next] == it) save(static_cast<Eigen::Index>(next++));
        if (opts.verbose && it % 100 == 0) std::cerr << "iteration " << it << " logLik " << ll << "\n";
    }

    for (std::size_t k = 0; k < frame.params.size(); ++k)
        for (std::size_t j = 0; j < frame.params[k].blocks.size(); ++j)
            if (frame.params[k].blocks[j].ncoef() > 0 && opts.n_iter > 0)
                out.info["accept." + frame.params[k].name + "." + frame.params[k].blocks[j].label] =
                    accept_sum[k][j] / opts.n_iter;
    out.runtime = seconds_since(t0);
    return out;
}

SampleMatrix gmcmc(const ModelFrame& frame, const StartValues& start, const McmcOptions& opts) {
    return gmcmc(frame, initial_state(frame, start), opts);
}

double slice_step(const std::function<double(double)>& log_target, double x0, Rng& rng, double w, int m_expand) {
    const double f0 = log_target(x0);
    if (!std::isfinite(f0)) throw NumericalError("slice sampler: log target is not finite at the current point");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    const double level = f0 - expo(rng);
    double left = x0 - w * unif(rng);
    double right = left + w;
    int j = static_cast<int>(std::floor(m_expand * unif(rng)));
    int k = m_expand - 1 - j;
    while (j-- > 0 && log_target(left) > level) left -= w;
    while (k-- > 0 && log_target(right) > level) right += w;
    for (int iter = 0; iter < 200; ++iter) {
        double x1 = left + unif(rng) * (right - left);
        if (log_target(x1) >= level) return x1;
        (x1 < x0 ? left : right) = x1;
    }
    return x0;
}

GibbsPrior GibbsPrior::isotropic(std::size_t p, double m, double M, double a, double b) {
    GibbsPrior pr;
    pr.m = VectorXd::Constant(static_cast<Eigen::Index>(p), m);
    pr.M = MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)) * M;
    pr.a = a;
    pr.b = b;
    return pr;
}

double gibbs_shape(double a, std::size_t n, std::size_t p) {
    return a + static_cast<double>(n) / 2.0 + static_cast<double>(p) / 2.0;
}

SampleMatrix gibbs_lm(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& column_names,
                      const GibbsPrior& prior, const GibbsOptions& opts, const VectorXd& start) {
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::Index n = X.rows(), p = X.cols();
    if (n <= 0) throw DataError("gibbs_lm: no observations");
    if (y.size() != n) throw DataError("gibbs_lm: X and y differ in length");
    if (static_cast<Eigen::Index>(column_names.size()) != p) throw DataError("gibbs_lm: wrong number of column names");
    if (prior.m.size() != p || prior.M.rows() != p || prior.M.cols() != p)
        throw ConfigError("gibbs_lm: prior dimensions do not match the design");
    if (!(prior.a > 0.0) || !(prior.b > 0.0)) throw ConfigError("gibbs_lm: a and b must be positive");
    Eigen::LLT<MatrixXd> Mllt(prior.M);
    if (Mllt.info() != Eigen::Success) throw NumericalError("gibbs_lm: prior covariance M is singular");
    const MatrixXd Minv = Mllt.solve(MatrixXd::Identity(p, p));
    const VectorXd Minv_m = Minv * prior.m;
    const MatrixXd XtX = X.transpose() * X;
    const VectorXd Xty = X.transpose() * y;
    Eigen::LLT<MatrixXd> A(XtX + Minv);
    if (A.info() != Eigen::Success) throw NumericalError("gibbs_lm: X'X + M^-1 is not positive definite");
    const VectorXd mu_beta = A.solve(Xty + Minv_m);
    const double a_post = gibbs_shape(prior.a, static_cast<std::size_t>(n), static_cast<std::size_t>(p));

    const std::vector<int> grid = thinning_grid(opts.n_iter, opts.burnin, opts.thin);
    Rng rng(opts.seed);
    VectorXd beta = start.size() == p ? start : VectorXd::Zero(p);
    const double ybar = y.mean();
    double sigma2 = n > 1 ? (y.array() - ybar).square().sum() / static_cast<double>(n - 1) : 1.0;
    if (!(sigma2 > 0.0)) sigma2 = 1.0;

    SampleMatrix out;
    for (const auto& c : column_names) out.names.push_back("mu.p." + c);
    out.names.push_back("sigma");
    out.draws.resize(static_cast<Eigen::Index>(grid.size()), p + 1);
    out.n_iter = opts.n_iter;
    out.burnin = opts.burnin;
    out.thin = opts.thin;
    out.seed = opts.seed;
    out.info["a_prime"] = a_post;

    auto save = [&](Eigen::Index row) {
        out.draws.row(row).head(p) = beta.transpose();
        out.draws(row, p) = std::sqrt(sigma2);
    };
    std::size_t next = 0;
    if (!grid.empty() && grid[0] == 0) save(static_cast<Eigen::Index>(next++));
    for (int it = 1; it <= opts.n_iter; ++it) {
        VectorXd e = y - X * beta;
        VectorXd d = beta - prior.m;
        double b_post = prior.b + 0.5 * e.squaredNorm() + 0.5 * d.dot(Minv * d);
        sigma2 = inverse_gamma_draw(a_post, b_post, rng);
        // Sigma_beta = sigma2 (X'X + M^-1)^-1
        beta = mu_beta + std::sqrt(sigma2) * VectorXd(A.matrixU().solve(standard_normal(p, rng)));
        if (next < grid.size() && grid[next] == it) save(static_cast<Eigen::Index>(next++));
    }
    out.runtime = seconds_since(t0);
    return out;
}

SampleMatrix gibbs_lm(const ModelFrame& frame, const GibbsPrior& prior, const GibbsOptions& opts,
                      const StartValues& start) {
    if (frame.params.size() != 1 || frame.params[0].blocks.size() != 1)
        throw ConfigError("gibbs_lm needs a single-parameter, purely parametric model");
    const TermBlock& b = frame.params[0].blocks[0];
    VectorXd st = VectorXd::Zero(b.X.cols());
    for (const auto& [name, v] : start) {
        auto it = frame.registry.find(name);
        if (it == frame.registry.end()) {
            if (name == "sigma") continue;
            throw ConfigError("start value '" + name + "' matches no model coefficient");
        }
        st[static_cast<Eigen::Index>(it->second.index)] = v;
    }
    return gibbs_lm(b.X, frame.y, b.column_names, prior, opts, st);
}

Coefficients coefficients_from_row(const ModelFrame& frame, const SampleMatrix& s, std::size_t row,
                                   const Coefficients& fallback) {
    Coefficients c = fallback;
    for (std::size_t col = 0; col < s.names.size(); ++col) {
        auto it = frame.registry.find(s.names[col]);
        if (it == frame.registry.end()) continue;
        const CoefRef& r = it->second;
        c[r.param][r.block][static_cast<Eigen::Index>(r.index)] =
            s.draws(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
    }
    return c;
}

Coefficients posterior_mean_coefficients(const ModelFrame& frame, const SampleMatrix& s) {
    if (s.nsave() == 0) throw DataError("empty sample matrix");
    Coefficients c = start_coefficients(frame);
    VectorXd means = s.draws.colwise().mean();
    for (std::size_t col = 0; col < s.names.size(); ++col) {
        auto it = frame.registry.find(s.names[col]);
        if (it == frame.registry.end()) continue;
        const CoefRef& r = it->second;
        c[r.param][r.block][static_cast<Eigen::Index>(r.index)] = means[static_cast<Eigen::Index>(col)];
    }
    return c;
}

SampleStats samplestats(const SampleMatrix& samples, const ModelFrame& frame) {
    if (samples.nsave() == 0) throw DataError("empty sample matrix");
    const Coefficients base = start_coefficients(frame);
    double dsum = 0.0;
    for (std::size_t i = 0; i < samples.nsave(); ++i)
        dsum += -2.0 * total_loglik(frame, compute_eta(frame, coefficients_from_row(frame, samples, i, base)));
    SampleStats st;
    st.mean_deviance = dsum / static_cast<double>(samples.nsave());
    st.loglik = total_loglik(frame, compute_eta(frame, posterior_mean_coefficients(frame, samples)));
    st.pd = st.mean_deviance + 2.0 * st.loglik;
    st.dic = st.mean_deviance + st.pd;
    return st;
}

MatrixXd pointwise_log_density(const SampleMatrix& samples, const ModelFrame& frame) {
    if (samples.nsave() == 0) throw DataError("empty sample matrix");
    const Coefficients base = start_coefficients(frame);
    MatrixXd out(static_cast<Eigen::Index>(samples.nsave()), static_cast<Eigen::Index>(frame.n));
    for (std::size_t i = 0; i < samples.nsave(); ++i) {
        auto eta = compute_eta(frame, coefficients_from_row(frame, samples, i, base));
        out.row(static_cast<Eigen::Index>(i)) =
            frame.family->density(frame.y, frame.family->map_to_params(eta), true).transpose();
    }
    return out;
}

Waic waic(const SampleMatrix& samples, const ModelFrame& frame) {
    MatrixXd ld = pointwise_log_density(samples, frame);
    const double S = static_cast<double>(ld.rows());
    Waic w;
    for (Eigen::Index i = 0; i < ld.cols(); ++i) {
        const auto c = ld.col(i).array();
        double mx = c.maxCoeff();
        w.lppd += mx + std::log((c - mx).exp().sum() / S);
        if (ld.rows() > 1) w.p_waic += (c - c.mean()).square().sum() / (S - 1.0);
    }
    w.waic = -2.0 * (w.lppd - w.p_waic);
    return w;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

}

void write_samples_csv(const SampleMatrix& s, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write " + path);
    for (std::size_t j = 0; j < s.names.size(); ++j)
        std::fprintf(f, "%s%s", j ? "," : "", csv_field(s.names[j]).c_str());
    std::fputc('\n', f);
    for (Eigen::Index i = 0; i < s.draws.rows(); ++i) {
        for (Eigen::Index j = 0; j < s.draws.cols(); ++j) std::fprintf(f, "%s%.17g", j ? "," : "", s.draws(i, j));
        std::fputc('\n', f);
    }
    std::fclose(f);

    nlohmann::ordered_json meta;
    meta["n_iter"] = s.n_iter;
    meta["burnin"] = s.burnin;
    meta["thin"] = s.thin;
    meta["seed"] = s.seed;
    meta["info"] = s.info;
    std::ofstream(path + ".meta.json") << meta.dump(2) << "\n";
}

SampleMatrix read_samples_csv(const std::string& path) {
    DataTable t = read_csv(path);
    SampleMatrix s;
    s.draws.resize(static_cast<Eigen::Index>(t.nrows()), static_cast<Eigen::Index>(t.ncols()));
    for (std::size_t j = 0; j < t.ncols(); ++j) {
        const Column& c = t.columns()[j];
        if (c.categorical) throw DataError(path + ": non-numeric sample column " + c.name);
        s.names.push_back(c.name);
        for (std::size_t i = 0; i < c.num.size(); ++i)
            s.draws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.num[i];
    }
    std::ifstream in(path + ".meta.json");
    if (in) {
        auto meta = nlohmann::json::parse(in);
        s.n_iter = meta.value("n_iter", 0);
        s.burnin = meta.value("burnin", 0);
        s.thin = meta.value("thin", 1);
        s.seed = meta.value("seed", std::uint64_t{0});
        if (meta.contains("info")) s.info = meta["info"].get<std::map<std::string, double>>();
    }
    return s;
}

}
