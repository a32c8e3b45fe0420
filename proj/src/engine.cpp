#include "distreg/engine.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>

#include "distreg/error.hpp"

namespace distreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

double total_loglik(const ModelFrame& frame, const std::vector<VectorXd>& eta) {
    double ll = frame.family->loglik(frame.y, frame.family->map_to_params(eta));
    return std::isfinite(ll) ? ll : neg_inf;
}

double inverse_gamma_log_density(double x, double a, double b) {
    return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
}

double block_edf(const TermBlock& b, double tau2, const VectorXd& w) {
    switch (b.kind) {
        case BlockKind::parametric: return static_cast<double>(b.X.cols());
        case BlockKind::special: return b.special->edf();
        case BlockKind::smooth: break;
    }
    MatrixXd XtWX = b.X.transpose() * w.asDiagonal() * b.X;
    MatrixXd P = XtWX + b.K / tau2;
    Eigen::LDLT<MatrixXd> ldlt(P);
    return ldlt.solve(XtWX).trace();
}

double aicc_value(double deviance, double edf, double n) {
    double denom = n - edf - 1.0;
    if (denom <= 0.0) return std::numeric_limits<double>::infinity();
    return deviance + 2.0 * edf + 2.0 * edf * (edf + 1.0) / denom;
}

double max_relative_change(const std::vector<VectorXd>& a, const std::vector<VectorXd>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, (a[k] - b[k]).norm() / (b[k].norm() + 1e-10));
    return m;
}

int intercept_column(const TermBlock& par) {
    for (std::size_t j = 0; j < par.column_names.size(); ++j)
        if (par.column_names[j] == "(Intercept)") return static_cast<int>(j);
    return -1;
}

/// Sets block (k, j) to `beta`, keeping eta in sync.
void set_block(const ModelFrame& frame, FitState& s, std::size_t k, std::size_t j, const VectorXd& beta) {
    const TermBlock& b = frame.params[k].blocks[j];
    s.eta[k] += b.fitted(beta) - b.fitted(s.beta[k][j]);
    s.beta[k][j] = beta;
}

double state_logpost(const ModelFrame& frame, const FitState& s) {
    double lp = total_loglik(frame, s.eta);
    for (std::size_t k = 0; k < frame.params.size(); ++k)
        for (std::size_t j = 0; j < frame.params[k].blocks.size(); ++j)
            lp += log_prior(frame.params[k].blocks[j], s.beta[k][j], s.tau2[k][j]);
    return std::isfinite(lp) ? lp : neg_inf;
}

/// Moves block (k, j) towards `target`, halving the step until the objective does not drop.
/// Returns the accepted step fraction (0 when the block is left unchanged).
template <class Objective>
double step_with_backtracking(const ModelFrame& frame, FitState& s, std::size_t k, std::size_t j,
                              const VectorXd& target, Objective objective, double f0) {
    const VectorXd old = s.beta[k][j];
    double step = 1.0;
    for (int h = 0; h < 20; ++h, step *= 0.5) {
        set_block(frame, s, k, j, old + step * (target - old));
        double f = objective(s);
        if (f >= f0 - 1e-10 * std::abs(f0)) return step;
    }
    set_block(frame, s, k, j, old);
    return 0.0;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}

WorkingQuantities working_quantities(const Family& family, std::size_t k, const VectorXd& y,
                                     const std::vector<VectorXd>& eta) {
    for (const auto& e : eta)
        if (!e.allFinite()) throw NumericalError("non-finite predictor");
    ParamValues par = family.map_to_params(eta);
    VectorXd s = family.score(k, y, par);
    VectorXd h = family.hess(k, y, par);
    WorkingQuantities q;
    q.w = h.array().max(weight_floor).min(weight_ceiling).matrix();
    for (Eigen::Index i = 0; i < h.size(); ++i)
        if (!std::isfinite(h[i])) q.w[i] = std::isnan(h[i]) ? weight_floor : (h[i] > 0 ? weight_ceiling : weight_floor);
    q.z = eta[k] + s.cwiseQuotient(q.w);
    if (!q.z.allFinite()) throw NumericalError(family.name() + ": non-finite working response for parameter " +
                                               family.params()[k]);
    return q;
}

MatrixXd penalized_precision(const MatrixXd& X, const MatrixXd& K, double tau2, const VectorXd& w) {
    MatrixXd P = X.transpose() * w.asDiagonal() * X;
    if (K.size() > 0) P += K / tau2;
    return P;
}

IwlsSolution iwls_update(const MatrixXd& X, const MatrixXd& K, double tau2, const VectorXd& w,
                         const VectorXd& partial_residual) {
    IwlsSolution out;
    if (X.cols() == 0) return out;
    MatrixXd XtW = X.transpose() * w.asDiagonal();
    MatrixXd XtWX = XtW * X;
    MatrixXd P = K.size() > 0 ? MatrixXd(XtWX + K / tau2) : XtWX;
    VectorXd rhs = XtW * partial_residual;
    Eigen::LLT<MatrixXd> llt(P);
    if (llt.info() != Eigen::Success) {
        const double tr = std::max(P.trace(), 1e-300);
        for (double eps = 1e-12; eps <= 1e-7 * (1 + 1e-9); eps *= 10.0) {
            llt.compute(P + MatrixXd::Identity(P.rows(), P.cols()) * (eps * tr));
            if (llt.info() == Eigen::Success) {
                out.jittered = true;
                break;
            }
        }
        if (!out.jittered) throw NumericalError("IWLS system is singular");
    }
    out.beta = llt.solve(rhs);
    out.edf = llt.solve(XtWX).trace();
    if (!out.beta.allFinite()) throw NumericalError("IWLS update produced non-finite coefficients");
    return out;
}

double update_tau2(const TermBlock& block, double tau2, const VectorXd& w, const VectorXd& r, double edf_other) {
    if (block.fixed || block.K.size() == 0) return tau2;
    const double n = static_cast<double>(r.size());
    MatrixXd XtW = block.X.transpose() * w.asDiagonal();
    MatrixXd XtWX = XtW * block.X;
    VectorXd XtWr = XtW * r;
    const double rwr = r.dot(w.cwiseProduct(r));
    auto criterion = [&](double lt) {
        Eigen::LDLT<MatrixXd> ldlt(XtWX + block.K * std::exp(-lt));
        VectorXd beta = ldlt.solve(XtWr);
        double rss = std::max(rwr - 2.0 * beta.dot(XtWr) + beta.dot(XtWX * beta), 0.0);
        double edf = ldlt.solve(XtWX).trace();
        double v = aicc_value(rss, edf + edf_other, n);
        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
    };
    constexpr double lo = -20.0, hi = 20.0;
    constexpr int grid = 40;
    int best = 0;
    double fbest = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= grid; ++i) {
        double f = criterion(lo + (hi - lo) * i / grid);
        if (f < fbest) {
            fbest = f;
            best = i;
        }
    }
    const double step = (hi - lo) / grid;
    double a = std::max(lo, lo + (best - 1) * step), b = std::min(hi, lo + (best + 1) * step);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = criterion(c), fd = criterion(d);
    while (b - a > 1e-4) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = criterion(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = criterion(d);
        }
    }
    double lt = 0.5 * (a + b);
    if (criterion(lt) > fbest) lt = lo + best * step;
    return std::exp(lt);
}

double log_prior(const TermBlock& block, const VectorXd& beta, double tau2) {
    switch (block.kind) {
        case BlockKind::parametric: return 0.0;
        case BlockKind::special: return block.special->log_prior(beta);
        case BlockKind::smooth: break;
    }
    return -0.5 * block.penalty_rank * std::log(tau2) - 0.5 * beta.dot(block.K * beta) / tau2 +
           inverse_gamma_log_density(tau2, tau2_prior_a, tau2_prior_b);
}

FitState initial_state(const ModelFrame& frame, const StartValues& start) {
    FitState s;
    s.beta = start_coefficients(frame);
    for (const auto& pb : frame.params) {
        s.tau2.emplace_back(pb.blocks.size(), 1.0);
        s.edf_block.emplace_back(pb.blocks.size(), 0.0);
    }
    for (const auto& [name, value] : start) {
        if (auto it = frame.registry.find(name); it != frame.registry.end()) {
            const CoefRef& r = it->second;
            s.beta[r.param][r.block][static_cast<Eigen::Index>(r.index)] = value;
            continue;
        }
        bool found = false;
        for (std::size_t k = 0; k < frame.params.size() && !found; ++k)
            for (std::size_t j = 0; j < frame.params[k].blocks.size(); ++j)
                if (frame.params[k].blocks[j].tau2_name == name) {
                    if (!(value > 0.0)) throw ConfigError("start value for " + name + " must be positive");
                    s.tau2[k][j] = value;
                    found = true;
                    break;
                }
        if (!found) throw ConfigError("start value '" + name + "' matches no model coefficient");
    }
    s.eta = compute_eta(frame, s.beta);
    evaluate_state(frame, s);
    return s;
}

void evaluate_state(const ModelFrame& frame, FitState& state) {
    state.eta = compute_eta(frame, state.beta);
    state.loglik = total_loglik(frame, state.eta);
    state.logpost = state_logpost(frame, state);
    state.edf = 0.0;
    for (std::size_t k = 0; k < frame.params.size(); ++k) {
        const auto& blocks = frame.params[k].blocks;
        VectorXd w;
        bool need_w = false;
        for (const auto& b : blocks) need_w = need_w || b.kind == BlockKind::smooth;
        if (need_w && std::isfinite(state.loglik)) w = working_quantities(*frame.family, k, frame.y, state.eta).w;
        for (std::size_t j = 0; j < blocks.size(); ++j) {
            if (blocks[j].kind == BlockKind::smooth && w.size() == 0) continue;
            state.edf_block[k][j] = block_edf(blocks[j], state.tau2[k][j], w);
            state.edf += state.edf_block[k][j];
        }
    }
    state.aicc = aicc_value(-2.0 * state.loglik, state.edf, static_cast<double>(frame.n));
}

FitState backfit(const ModelFrame& frame, const BackfitOptions& opts, const StartValues& start) {
    const auto t0 = std::chrono::steady_clock::now();
    FitState s = initial_state(frame, start);
    if (!std::isfinite(s.logpost)) throw NumericalError("log-posterior is not finite at the starting values");
    auto logpost = [&](const FitState& st) { return state_logpost(frame, st); };

    for (int it = 1; it <= opts.max_iter; ++it) {
        const std::vector<VectorXd> eta_old = s.eta;
        for (std::size_t k = 0; k < frame.params.size(); ++k) {
            for (std::size_t j = 0; j < frame.params[k].blocks.size(); ++j) {
                const TermBlock& b = frame.params[k].blocks[j];
                if (b.ncoef() == 0) continue;
                WorkingQuantities wq = working_quantities(*frame.family, k, frame.y, s.eta);
                VectorXd r = wq.z - s.eta[k] + b.fitted(s.beta[k][j]);
                VectorXd target;
                if (b.kind == BlockKind::special) {
                    target = b.special->update(s.beta[k][j], wq.w, r);
                    s.edf_block[k][j] = b.special->edf();
                } else {
                    if (!b.fixed && opts.update_variances) {
                        double edf_other = 0.0;
                        for (std::size_t kk = 0; kk < s.edf_block.size(); ++kk)
                            for (std::size_t jj = 0; jj < s.edf_block[kk].size(); ++jj)
                                if (kk != k || jj != j) edf_other += s.edf_block[kk][jj];
                        s.tau2[k][j] = update_tau2(b, s.tau2[k][j], wq.w, r, edf_other);
                    }
                    IwlsSolution sol = iwls_update(b.X, b.K, s.tau2[k][j], wq.w, r);
                    target = sol.beta;
                    s.edf_block[k][j] = sol.edf;
                }
                step_with_backtracking(frame, s, k, j, target, logpost, logpost(s));
            }
        }
        s.iterations = it;
        double change = max_relative_change(s.eta, eta_old);
        if (opts.verbose) {
            std::cerr << "iteration " << it << " eps " << change << " logPost " << logpost(s) << "\n";
        }
        if (change < opts.eps) {
            s.converged = true;
            break;
        }
    }
    evaluate_state(frame, s);
    s.runtime = seconds_since(t0);
    return s;
}

namespace {

struct BaseLearner {
    std::size_t k = 0;
    std::size_t j = 0;
    std::vector<Eigen::Index> cols;  ///< parametric columns updated by the learner
    std::string name;
    double tau2 = 1.0;
};

/// Smoothing variance giving the requested edf under unit weights.
double tau2_for_df(const TermBlock& b, double df) {
    MatrixXd XtX = b.X.transpose() * b.X;
    auto edf = [&](double lt) {
        Eigen::LDLT<MatrixXd> ldlt(XtX + b.K * std::exp(-lt));
        return ldlt.solve(XtX).trace();
    };
    double lo = -30.0, hi = 30.0;
    if (edf(hi) <= df) return std::exp(hi);
    if (edf(lo) >= df) return std::exp(lo);
    for (int i = 0; i < 100 && hi - lo > 1e-8; ++i) {
        double mid = 0.5 * (lo + hi);
        (edf(mid) < df ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

}

FitState boost(const ModelFrame& frame, const BoostOptions& opts, const StartValues& start) {
    const auto t0 = std::chrono::steady_clock::now();
    FitState s = initial_state(frame, start);
    if (!std::isfinite(s.loglik)) throw NumericalError("log-likelihood is not finite at the starting values");
    auto loglik = [&](const FitState& st) { return total_loglik(frame, st.eta); };

    std::vector<BaseLearner> learners;
    for (std::size_t k = 0; k < frame.params.size(); ++k) {
        const auto& pb = frame.params[k];
        const TermBlock& par = pb.blocks[0];
        for (std::size_t t = 0; t < par.terms.size(); ++t) {
            if (par.terms[t].kind == TermKind::intercept) continue;
            BaseLearner l{k, 0, {}, par.terms[t].label + "." + pb.name, 1.0};
            for (std::size_t c = 0; c < par.column_term.size(); ++c)
                if (par.column_term[c] == static_cast<int>(t)) l.cols.push_back(static_cast<Eigen::Index>(c));
            learners.push_back(std::move(l));
        }
        for (std::size_t j = 1; j < pb.blocks.size(); ++j) {
            const TermBlock& b = pb.blocks[j];
            BaseLearner l{k, j, {}, b.label + "." + pb.name, 1.0};
            if (b.kind == BlockKind::smooth) {
                l.tau2 = tau2_for_df(b, opts.df);
                s.tau2[k][j] = l.tau2;
            }
            learners.push_back(std::move(l));
        }
    }
    for (const auto& l : learners) s.boost_terms.push_back(l.name);
    std::vector<double> cumulative(learners.size(), 0.0);

    for (int it = 1; it <= opts.maxit; ++it) {
        // Intercepts first, full IWLS step with backtracking.
        for (std::size_t k = 0; k < frame.params.size(); ++k) {
            const TermBlock& par = frame.params[k].blocks[0];
            int ic = intercept_column(par);
            if (ic < 0) continue;
            WorkingQuantities wq = working_quantities(*frame.family, k, frame.y, s.eta);
            VectorXd r = wq.z - s.eta[k];
            VectorXd target = s.beta[k][0];
            target[ic] += wq.w.dot(r) / wq.w.sum();
            step_with_backtracking(frame, s, k, 0, target, loglik, loglik(s));
        }

        const double ll0 = loglik(s);
        std::vector<WorkingQuantities> wq;
        for (std::size_t k = 0; k < frame.params.size(); ++k)
            wq.push_back(working_quantities(*frame.family, k, frame.y, s.eta));

        int best = -1;
        double best_gain = neg_inf;
        VectorXd best_beta;
        for (std::size_t li = 0; li < learners.size(); ++li) {
            const BaseLearner& l = learners[li];
            const TermBlock& b = frame.params[l.k].blocks[l.j];
            const VectorXd& w = wq[l.k].w;
            VectorXd r = wq[l.k].z - s.eta[l.k];
            VectorXd cand = s.beta[l.k][l.j];
            try {
                if (b.kind == BlockKind::parametric) {
                    MatrixXd Xg(b.X.rows(), static_cast<Eigen::Index>(l.cols.size()));
                    for (std::size_t c = 0; c < l.cols.size(); ++c) Xg.col(static_cast<Eigen::Index>(c)) = b.X.col(l.cols[c]);
                    VectorXd d = iwls_update(Xg, MatrixXd(), 1.0, w, r).beta;
                    for (std::size_t c = 0; c < l.cols.size(); ++c) cand[l.cols[c]] += opts.nu * d[static_cast<Eigen::Index>(c)];
                } else if (b.kind == BlockKind::smooth) {
                    cand += opts.nu * iwls_update(b.X, b.K, l.tau2, w, r).beta;
                } else {
                    VectorXd full = b.special->update(cand, w, r + b.fitted(cand));
                    cand += opts.nu * (full - cand);
                }
            } catch (const NumericalError&) {
                continue;
            }
            VectorXd eta_k = s.eta[l.k];
            s.eta[l.k] += b.fitted(cand) - b.fitted(s.beta[l.k][l.j]);
            double gain = loglik(s) - ll0;
            s.eta[l.k] = std::move(eta_k);
            if (gain > best_gain) {
                best_gain = gain;
                best = static_cast<int>(li);
                best_beta = std::move(cand);
            }
        }
        s.iterations = it;
        if (best < 0 || !(best_gain >= 1e-8)) {
            s.converged = true;
            break;
        }
        const BaseLearner& l = learners[static_cast<std::size_t>(best)];
        set_block(frame, s, l.k, l.j, best_beta);
        cumulative[static_cast<std::size_t>(best)] += best_gain;
        s.selection.push_back(best);
        s.contribution.push_back(cumulative);
        if (opts.verbose && (it % 100 == 0 || it == 1)) {
            std::cerr << "boost iteration " << it << " logLik " << loglik(s) << " selected " << l.name << "\n";
        }
    }
    evaluate_state(frame, s);
    s.runtime = seconds_since(t0);
    return s;
}

std::map<std::string, double> named_parameters(const ModelFrame& frame, const FitState& state) {
    std::map<std::string, double> out;
    for (const auto& [name, r] : frame.registry)
        out[name] = state.beta[r.param][r.block][static_cast<Eigen::Index>(r.index)];
    for (std::size_t k = 0; k < frame.params.size(); ++k)
        for (std::size_t j = 0; j < frame.params[k].blocks.size(); ++j)
            if (!frame.params[k].blocks[j].tau2_name.empty())
                out[frame.params[k].blocks[j].tau2_name] = state.tau2[k][j];
    return out;
}

}
