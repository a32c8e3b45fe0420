#include "distreg/run.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "distreg/error.hpp"
#include "distreg/synth.hpp"

namespace distreg {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Eigen::VectorXd;

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

Functional parse_functional(const std::string& s) {
    if (s == "mean") return Functional::mean;
    if (s == "c95") return Functional::c95;
    if (s == "identity") return Functional::identity;
    throw ConfigError("unknown functional '" + s + "'");
}

PredictTarget parse_target(const std::string& s) {
    if (s == "link") return PredictTarget::link;
    if (s == "parameter") return PredictTarget::parameter;
    if (s == "term") return PredictTarget::term;
    throw ConfigError("unknown prediction target '" + s + "'");
}

std::string resolve(const std::string& base, const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(base) / p).lexically_normal().string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool sampled(const RunConfig& cfg) { return cfg.sampler != "none"; }

}

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    c.base_dir = base_dir;
    try {
        check_keys(j, {"data", "simulate", "formula", "family", "optimizer", "sampler", "seed", "bfit", "boost", "mcmc",
                       "gibbs", "start", "output", "diagnostics", "predictions"},
                   "config");
        read_opt(j, "data", c.data);
        if (j.contains("simulate")) {
            const auto& s = j.at("simulate");
            check_keys(s, {"kind", "n", "seed", "p"}, "simulate");
            SimulationSpec sim;
            sim.kind = s.at("kind").get<std::string>();
            read_opt(s, "n", sim.n);
            read_opt(s, "seed", sim.seed);
            read_opt(s, "p", sim.p);
            c.simulate = sim;
        }
        if (c.data.empty() && !c.simulate) throw ConfigError("config needs 'data' or 'simulate'");
        if (!c.data.empty() && c.simulate) throw ConfigError("'data' and 'simulate' are mutually exclusive");
        c.data = resolve(base_dir, c.data);
        if (!j.contains("formula")) throw ConfigError("config needs 'formula'");
        if (j.at("formula").is_string()) c.formula = {j.at("formula").get<std::string>()};
        else c.formula = j.at("formula").get<std::vector<std::string>>();
        read_opt(j, "family", c.family);
        read_opt(j, "optimizer", c.optimizer);
        read_opt(j, "sampler", c.sampler);
        read_opt(j, "seed", c.seed);
        if (c.optimizer != "bfit" && c.optimizer != "boost" && c.optimizer != "none")
            throw ConfigError("optimizer must be bfit, boost or none");
        if (c.sampler != "gmcmc" && c.sampler != "gibbs_lm" && c.sampler != "none")
            throw ConfigError("sampler must be gmcmc, gibbs_lm or none");
        if (c.optimizer == "none" && c.sampler == "none") throw ConfigError("enable an optimizer or a sampler");
        if (c.sampler == "gibbs_lm" && c.family != "lm") throw ConfigError("gibbs_lm needs the lm family");
        if (j.contains("bfit")) {
            const auto& b = j.at("bfit");
            check_keys(b, {"max_iter", "eps", "update_variances", "verbose"}, "bfit");
            read_opt(b, "max_iter", c.bfit.max_iter);
            read_opt(b, "eps", c.bfit.eps);
            read_opt(b, "update_variances", c.bfit.update_variances);
            read_opt(b, "verbose", c.bfit.verbose);
        }
        if (j.contains("boost")) {
            const auto& b = j.at("boost");
            check_keys(b, {"maxit", "nu", "df", "verbose"}, "boost");
            read_opt(b, "maxit", c.boost.maxit);
            read_opt(b, "nu", c.boost.nu);
            read_opt(b, "df", c.boost.df);
            read_opt(b, "verbose", c.boost.verbose);
        }
        if (j.contains("mcmc")) {
            const auto& m = j.at("mcmc");
            check_keys(m, {"n_iter", "burnin", "thin", "verbose"}, "mcmc");
            read_opt(m, "n_iter", c.mcmc.n_iter);
            read_opt(m, "burnin", c.mcmc.burnin);
            read_opt(m, "thin", c.mcmc.thin);
            read_opt(m, "verbose", c.mcmc.verbose);
        }
        if (j.contains("gibbs")) {
            const auto& g = j.at("gibbs");
            check_keys(g, {"n_iter", "burnin", "thin", "m", "M", "a", "b"}, "gibbs");
            read_opt(g, "n_iter", c.gibbs.n_iter);
            read_opt(g, "burnin", c.gibbs.burnin);
            read_opt(g, "thin", c.gibbs.thin);
            read_opt(g, "m", c.prior_m);
            read_opt(g, "M", c.prior_M);
            read_opt(g, "a", c.prior_a);
            read_opt(g, "b", c.prior_b);
        }
        c.mcmc.seed = c.seed;
        c.gibbs.seed = c.seed;
        thinning_grid(sampled(c) && c.sampler == "gibbs_lm" ? c.gibbs.n_iter : c.mcmc.n_iter,
                      c.sampler == "gibbs_lm" ? c.gibbs.burnin : c.mcmc.burnin,
                      c.sampler == "gibbs_lm" ? c.gibbs.thin : c.mcmc.thin);
        if (j.contains("start")) c.start = j.at("start").get<StartValues>();
        read_opt(j, "output", c.output);
        if (j.contains("diagnostics")) {
            const auto& d = j.at("diagnostics");
            check_keys(d, {"residuals", "crps", "rootogram", "acf", "waic", "max_count", "max_lag"}, "diagnostics");
            read_opt(d, "residuals", c.diagnostics.residuals);
            read_opt(d, "crps", c.diagnostics.crps);
            read_opt(d, "rootogram", c.diagnostics.rootogram);
            read_opt(d, "acf", c.diagnostics.acf);
            read_opt(d, "waic", c.diagnostics.waic);
            read_opt(d, "max_count", c.diagnostics.max_count);
            read_opt(d, "max_lag", c.diagnostics.max_lag);
        }
        if (j.contains("predictions")) {
            for (const auto& p : j.at("predictions")) {
                check_keys(p, {"name", "newdata", "grid", "grid_n", "target", "terms", "intercept", "functional", "params"},
                           "prediction");
                PredictionSpec s;
                s.name = p.at("name").get<std::string>();
                read_opt(p, "newdata", s.newdata);
                s.newdata = resolve(base_dir, s.newdata);
                read_opt(p, "grid", s.grid_variable);
                read_opt(p, "grid_n", s.grid_n);
                if (p.contains("target")) s.request.target = parse_target(p.at("target").get<std::string>());
                read_opt(p, "terms", s.request.terms);
                read_opt(p, "intercept", s.request.intercept);
                if (p.contains("functional")) s.request.functional = parse_functional(p.at("functional").get<std::string>());
                read_opt(p, "params", s.request.params);
                c.predictions.push_back(std::move(s));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config schema violation: ") + e.what());
    }
    json copy = j;
    if (!c.data.empty()) copy["data"] = fs::absolute(c.data).lexically_normal().string();
    if (copy.contains("predictions"))
        for (std::size_t i = 0; i < copy["predictions"].size(); ++i)
            if (!c.predictions[i].newdata.empty())
                copy["predictions"][i]["newdata"] = fs::absolute(c.predictions[i].newdata).lexically_normal().string();
    c.json = copy.dump(2) + "\n";
    return c;
}

RunConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    RunConfig c = parse_config(text, fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
    c.source = path;
    return c;
}

std::string default_output_root() {
    const char* env = std::getenv(output_root_env);
    return env && *env ? env : "runs";
}

std::string output_dir(const RunConfig& cfg) {
    if (!cfg.output.empty()) {
        if (fs::path(cfg.output).is_absolute()) return cfg.output;
        return (fs::path(default_output_root()) / cfg.output).string();
    }
    std::string stem = cfg.source.empty() ? "run" : fs::path(cfg.source).stem().string();
    return (fs::path(default_output_root()) / stem).string();
}

DataTable load_data(const RunConfig& cfg) {
    if (cfg.simulate) return simulate(cfg.simulate->kind, cfg.simulate->n, cfg.simulate->seed, cfg.simulate->p);
    return read_csv(cfg.data);
}

ModelFrame make_frame(const RunConfig& cfg, const DataTable& data) {
    FamilyPtr family = make_family(cfg.family, 0);
    FormulaSet fs = parse_formula_set(cfg.formula, *family);
    ModelFrame frame = build_frame(fs, data, family);
    if (cfg.family == "lm") {
        if (frame.params[0].blocks.size() != 1 && cfg.sampler == "gibbs_lm")
            throw ConfigError("gibbs_lm needs a purely parametric formula");
        int p = 0;
        for (const auto& b : frame.params[0].blocks) p += static_cast<int>(b.ncoef());
        frame.family = lm_family(p);
    }
    return frame;
}

Model fit_model(const RunConfig& cfg, const DataTable& data) {
    Model m{make_frame(cfg, data), {}, {}, {}, {}};
    if (cfg.optimizer == "bfit") m.fit = backfit(m.frame, cfg.bfit, cfg.start);
    else if (cfg.optimizer == "boost") m.fit = boost(m.frame, cfg.boost, cfg.start);

    if (cfg.sampler == "gmcmc") {
        m.samples = m.fit ? gmcmc(m.frame, *m.fit, cfg.mcmc) : gmcmc(m.frame, cfg.start, cfg.mcmc);
    } else if (cfg.sampler == "gibbs_lm") {
        const std::size_t p = m.frame.params[0].blocks[0].ncoef();
        GibbsPrior prior = GibbsPrior::isotropic(p, cfg.prior_m, cfg.prior_M, cfg.prior_a, cfg.prior_b);
        StartValues start = cfg.start;
        if (m.fit && start.empty()) start = named_parameters(m.frame, *m.fit);
        m.samples = gibbs_lm(m.frame, prior, cfg.gibbs, start);
    }
    if (m.samples) {
        m.stats = samplestats(*m.samples, m.frame);
        if (cfg.diagnostics.waic) m.waic = waic(*m.samples, m.frame);
    }
    return m;
}

namespace {

struct Row {
    std::string label;
    std::vector<double> stats;  ///< Mean, 2.5%, 50%, 97.5% (sampled fits)
    std::optional<double> mode;
};

void print_table(std::ostringstream& os, const std::vector<Row>& rows, bool with_samples, bool with_mode) {
    std::size_t w = 0;
    for (const auto& r : rows) w = std::max(w, r.label.size());
    std::vector<std::string> head;
    if (with_samples) head = {"Mean", "2.5%", "50%", "97.5%"};
    if (with_mode) head.push_back("parameters");
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        std::vector<std::string> c;
        if (with_samples)
            for (double v : r.stats) c.push_back(std::isnan(v) ? "NA" : fmt("%.5f", v));
        if (with_mode) c.push_back(r.mode ? fmt("%.3f", *r.mode) : "NA");
        cells.push_back(std::move(c));
    }
    std::vector<std::size_t> cw(head.size());
    for (std::size_t k = 0; k < head.size(); ++k) {
        cw[k] = head[k].size();
        for (const auto& c : cells) cw[k] = std::max(cw[k], c[k].size());
    }
    os << std::string(w, ' ');
    for (std::size_t k = 0; k < head.size(); ++k) os << ' ' << std::string(cw[k] - head[k].size(), ' ') << head[k];
    os << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        os << rows[i].label << std::string(w - rows[i].label.size(), ' ');
        for (std::size_t k = 0; k < head.size(); ++k)
            os << ' ' << std::string(cw[k] - cells[i][k].size(), ' ') << cells[i][k];
        os << '\n';
    }
}

Row make_row(const std::string& label, const std::string& column, const Model& m,
             const std::map<std::string, double>& mode) {
    Row r{label, {}, {}};
    if (m.samples) {
        int c = m.samples->column(column);
        if (c >= 0) {
            VectorXd x = m.samples->draws.col(c);
            std::vector<double> v(x.data(), x.data() + x.size());
            r.stats = {x.mean(), quantile7(v, 0.025), quantile7(v, 0.5), quantile7(v, 0.975)};
        } else {
            double nan = std::numeric_limits<double>::quiet_NaN();
            r.stats = {nan, nan, nan, nan};
        }
    }
    if (auto it = mode.find(column); it != mode.end()) r.mode = it->second;
    return r;
}

}

std::string summarize(const Model& m, const RunConfig& cfg) {
    std::ostringstream os;
    const ModelFrame& fr = m.frame;
    const bool with_samples = m.samples.has_value();
    const bool with_mode = m.fit.has_value();
    const auto mode = with_mode ? named_parameters(fr, *m.fit) : std::map<std::string, double>{};

    os << "Family: " << fr.family->name() << "\n";
    os << "Link function: ";
    for (std::size_t k = 0; k < fr.params.size(); ++k)
        os << (k ? ", " : "") << fr.params[k].name << " = " << fr.family->links()[k].name();
    os << "\n*---\n";
    for (std::size_t k = 0; k < fr.params.size(); ++k) {
        const auto& pb = fr.params[k];
        os << "Formula " << pb.name << ":\n---\n" << (k == 0 ? fr.response : pb.name) << " ~ ";
        std::string rhs;
        for (const auto& t : fr.formulas.params[k].terms)
            if (t.kind != TermKind::intercept) rhs += (rhs.empty() ? "" : " + ") + t.render();
        if (!fr.formulas.params[k].has_intercept()) rhs = rhs.empty() ? "-1" : rhs + " - 1";
        os << (rhs.empty() ? "1" : rhs) << "\n-\n";

        const TermBlock& par = pb.blocks[0];
        std::vector<Row> prow, srow;
        for (std::size_t c = 0; c < par.column_names.size(); ++c)
            prow.push_back(make_row(par.column_names[c], par.coef_names[c], m, mode));
        for (std::size_t j = 1; j < pb.blocks.size(); ++j) {
            const TermBlock& b = pb.blocks[j];
            if (!b.tau2_name.empty()) srow.push_back(make_row(b.label + ".tau21", b.tau2_name, m, mode));
            else srow.push_back(Row{b.label + ".edf", {}, b.special ? std::optional<double>(b.special->edf()) : std::nullopt});
            if (with_samples && srow.back().stats.empty()) {
                double nan = std::numeric_limits<double>::quiet_NaN();
                srow.back().stats = {nan, nan, nan, nan};
            }
            if (with_mode && b.kind == BlockKind::smooth) {
                Row e{b.label + ".edf", {}, m.fit->edf_block[k][j]};
                if (with_samples) {
                    double nan = std::numeric_limits<double>::quiet_NaN();
                    e.stats = {nan, nan, nan, nan};
                }
                srow.push_back(e);
            }
        }
        if (with_samples && m.samples->column(pb.name + ".alpha") >= 0) {
            Row alpha = make_row("alpha", pb.name + ".alpha", m, {});
            (srow.empty() ? prow : srow).push_back(alpha);
        }
        if (!prow.empty()) {
            os << "Parametric coefficients:\n";
            print_table(os, prow, with_samples, with_mode);
        }
        if (!srow.empty()) {
            os << (prow.empty() ? "" : "-\n") << "Smooth terms:\n";
            print_table(os, srow, with_samples, with_mode);
        }
        os << "---\n";
    }
    if (m.samples) {
        os << "Sampler summary:\n-\n";
        if (m.stats)
            os << "DIC = " << fmt("%.3f", m.stats->dic) << " logLik = " << fmt("%.4f", m.stats->loglik)
               << " pd = " << fmt("%.4f", m.stats->pd) << "\n";
        if (m.waic) os << "WAIC = " << fmt("%.3f", m.waic->waic) << " pWAIC = " << fmt("%.4f", m.waic->p_waic) << "\n";
        os << "sampler = " << cfg.sampler << " n.iter = " << m.samples->n_iter << " burnin = " << m.samples->burnin
           << " thin = " << m.samples->thin << " seed = " << m.samples->seed << "\n";
        os << "runtime = " << fmt("%.3f", m.samples->runtime) << "\n---\n";
    }
    if (m.fit) {
        const FitState& f = *m.fit;
        os << "Optimizer summary:\n-\n";
        if (fr.family->name() == "lm") {
            os << "edf = " << fmt("%.3g", f.edf) << " sigma = "
               << fmt("%.4f", lm::plugin_sigma(fr.y, f.eta[0], static_cast<int>(fr.ncoef()))) << "\n";
        } else {
            os << "AICc = " << fmt("%.3f", f.aicc) << " converged = " << (f.converged ? 1 : 0)
               << " edf = " << fmt("%.4g", f.edf) << "\n";
            os << "logLik = " << fmt("%.4f", f.loglik) << " logPost = " << fmt("%.4f", f.logpost)
               << " nobs = " << fr.n << "\n";
        }
        if (fr.dropped_rows > 0) os << "dropped rows (missing values) = " << fr.dropped_rows << "\n";
        if (!f.selection.empty()) {
            os << "boosting iterations = " << f.iterations << " selected terms:";
            std::vector<bool> seen(f.boost_terms.size());
            for (int s : f.selection)
                if (!seen[static_cast<std::size_t>(s)]) {
                    seen[static_cast<std::size_t>(s)] = true;
                    os << ' ' << f.boost_terms[static_cast<std::size_t>(s)];
                }
            os << "\n";
        }
        os << "runtime = " << fmt("%.3f", f.runtime) << "\n---\n";
    } else if (fr.dropped_rows > 0) {
        os << "dropped rows (missing values) = " << fr.dropped_rows << "\n---\n";
    }
    return os.str();
}

DataTable covariate_grid(const ModelFrame& frame, const DataTable& data, const std::string& variable, int n) {
    if (n < 2) throw ConfigError("grid needs at least two points");
    std::set<std::string> used;
    for (const auto& pf : frame.formulas.params)
        for (const auto& t : pf.terms)
            for (const auto& v : t.variables) used.insert(v);
    if (!used.count(variable)) throw ConfigError("grid variable '" + variable + "' is not used by the model");
    DataTable g;
    for (const auto& c : data.columns()) {
        if (!used.count(c.name)) continue;
        if (c.categorical) {
            if (c.name == variable) throw ConfigError("grid variable must be numeric");
            g.add_categorical(c.name, std::vector<std::string>(static_cast<std::size_t>(n), c.levels().front()));
            continue;
        }
        double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
        std::size_t cnt = 0;
        for (double v : c.num)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                sum += v;
                ++cnt;
            }
        std::vector<double> col(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            col[static_cast<std::size_t>(i)] = c.name == variable ? (i == n - 1 ? hi : lo + (hi - lo) * i / (n - 1))
                                                                  : sum / static_cast<double>(cnt);
        g.add_numeric(c.name, std::move(col));
    }
    return g;
}

std::string run_fit(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const DataTable data = load_data(cfg);
    json copy = json::parse(cfg.json);
    if (cfg.simulate) {
        const std::string path = (fs::path(out_dir) / "data.csv").string();
        write_csv(data, path);
        copy.erase("simulate");
        copy["data"] = fs::absolute(path).lexically_normal().string();
    }
    write_text((fs::path(out_dir) / "config.json").string(), copy.dump(2) + "\n");

    Model m = fit_model(cfg, data);
    json meta;
    meta["family"] = m.frame.family->name();
    meta["formula"] = cfg.formula;
    meta["nobs"] = m.frame.n;
    meta["dropped_rows"] = m.frame.dropped_rows;
    meta["seed"] = cfg.seed;

    if (m.fit) {
        const FitState& f = *m.fit;
        std::ostringstream ps;
        ps << "name,value\n";
        for (const auto& [name, v] : named_parameters(m.frame, f)) ps << name << ',' << fmt("%.17g", v) << '\n';
        write_text((fs::path(out_dir) / "parameters.csv").string(), ps.str());
        meta["optimizer"] = {{"name", cfg.optimizer}, {"converged", f.converged}, {"iterations", f.iterations},
                             {"logLik", f.loglik}, {"logPost", f.logpost}, {"AICc", f.aicc}, {"edf", f.edf},
                             {"runtime", f.runtime}};
        if (!f.selection.empty()) {
            std::ostringstream bs;
            bs << "iteration,selected";
            for (const auto& t : f.boost_terms) bs << ",\"" << t << '"';
            bs << '\n';
            for (std::size_t i = 0; i < f.selection.size(); ++i) {
                bs << i + 1 << ",\"" << f.boost_terms[static_cast<std::size_t>(f.selection[i])] << '"';
                for (double v : f.contribution[i]) bs << ',' << fmt("%.17g", v);
                bs << '\n';
            }
            write_text((fs::path(out_dir) / "boost.csv").string(), bs.str());
        }
    }
    if (m.samples) {
        write_samples_csv(*m.samples, (fs::path(out_dir) / "samples.csv").string());
        json s = {{"name", cfg.sampler}, {"n_iter", m.samples->n_iter}, {"burnin", m.samples->burnin},
                  {"thin", m.samples->thin}, {"seed", m.samples->seed}, {"DIC", m.stats->dic},
                  {"pd", m.stats->pd}, {"logLik", m.stats->loglik}, {"runtime", m.samples->runtime}};
        if (m.waic) {
            s["WAIC"] = m.waic->waic;
            s["pWAIC"] = m.waic->p_waic;
        }
        s["info"] = m.samples->info;
        meta["sampler"] = s;
        if (cfg.diagnostics.acf && static_cast<int>(m.samples->nsave()) >= cfg.diagnostics.max_lag + 2) {
            AcfSummary a = acf_summary(m.samples->draws, cfg.diagnostics.max_lag);
            std::ostringstream as;
            as << "lag,max_acf\n";
            for (Eigen::Index l = 0; l < a.max_acf.size(); ++l) as << l << ',' << fmt("%.17g", a.max_acf[l]) << '\n';
            write_text((fs::path(out_dir) / "acf.csv").string(), as.str());
        }
    }

    const FitState* fit = m.fit ? &*m.fit : nullptr;
    const SampleMatrix* smp = m.samples ? &*m.samples : nullptr;
    const bool has_y_free_cdf = m.frame.family->name() != "lm";
    json diag = json::object();
    if (cfg.diagnostics.residuals && has_y_free_cdf) {
        ResidualSet r = quantile_residuals(m.frame, fit, smp, cfg.seed);
        std::ostringstream rs;
        rs << "residual\n";
        for (Eigen::Index i = 0; i < r.residuals.size(); ++i) rs << fmt("%.17g", r.residuals[i]) << '\n';
        write_text((fs::path(out_dir) / "residuals.csv").string(), rs.str());
        diag["residuals_ks_distance"] = ks_normal_distance(r.residuals);
    }
    if (cfg.diagnostics.crps && has_y_free_cdf) {
        CrpsResult c = crps_numeric(m.frame, fit, smp);
        std::ostringstream cs;
        cs << "crps,converged\n";
        for (Eigen::Index i = 0; i < c.crps.size(); ++i)
            cs << fmt("%.17g", c.crps[i]) << ',' << (c.converged[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
        write_text((fs::path(out_dir) / "crps.csv").string(), cs.str());
        diag["mean_crps"] = c.crps.mean();
    }
    if (cfg.diagnostics.rootogram && m.frame.family->discrete()) {
        Rootogram r = rootogram_freq(m.frame, fit, smp, nullptr, cfg.diagnostics.max_count);
        std::ostringstream rs;
        rs << "count,observed,expected\n";
        for (Eigen::Index j = 0; j < r.observed.size(); ++j)
            rs << r.min_count + j << ',' << fmt("%.17g", r.observed[j]) << ',' << fmt("%.17g", r.expected[j]) << '\n';
        write_text((fs::path(out_dir) / "rootogram.csv").string(), rs.str());
    }
    meta["diagnostics"] = diag;

    for (const auto& p : cfg.predictions) {
        DataTable nd = !p.grid_variable.empty() ? covariate_grid(m.frame, data, p.grid_variable, p.grid_n)
                       : !p.newdata.empty()     ? read_csv(p.newdata)
                                                : data;
        auto preds = predict(m.frame, fit, smp, nd, p.request);
        if (!p.grid_variable.empty()) {
            ParamPrediction x;
            x.param = p.grid_variable;
            const Column& c = nd.column(p.grid_variable);
            x.values = Eigen::Map<const VectorXd>(c.num.data(), static_cast<Eigen::Index>(c.num.size()));
            x.column_names = {p.grid_variable};
            preds.insert(preds.begin(), x);
        }
        write_predictions_csv(preds, (fs::path(out_dir) / ("predictions_" + p.name + ".csv")).string());
    }

    write_text((fs::path(out_dir) / "meta.json").string(), meta.dump(2) + "\n");
    write_text((fs::path(out_dir) / "summary.txt").string(), summarize(m, cfg));
    return out_dir;
}

Model load_run(const std::string& run_dir, RunConfig* cfg_out) {
    const fs::path dir(run_dir);
    if (!fs::exists(dir / "config.json")) throw ConfigError(run_dir + " is not a run directory (no config.json)");
    RunConfig cfg = parse_config(read_text((dir / "config.json").string()), run_dir);
    cfg.source = (dir / "config.json").string();
    Model m{make_frame(cfg, load_data(cfg)), {}, {}, {}, {}};
    if (fs::exists(dir / "parameters.csv")) {
        DataTable p = read_csv((dir / "parameters.csv").string());
        StartValues start;
        const Column& names = p.column("name");
        const Column& values = p.column("value");
        for (std::size_t i = 0; i < p.nrows(); ++i) start[names.cat[i]] = values.num[i];
        FitState f = initial_state(m.frame, start);
        f.converged = true;
        if (fs::exists(dir / "meta.json")) {
            auto meta = nlohmann::json::parse(read_text((dir / "meta.json").string()));
            if (meta.contains("optimizer")) {
                const auto& o = meta["optimizer"];
                f.converged = o.value("converged", true);
                f.iterations = o.value("iterations", 0);
                f.runtime = o.value("runtime", 0.0);
            }
        }
        m.fit = f;
    }
    if (fs::exists(dir / "samples.csv")) {
        m.samples = read_samples_csv((dir / "samples.csv").string());
        if (fs::exists(dir / "meta.json")) {
            auto meta = nlohmann::json::parse(read_text((dir / "meta.json").string()));
            if (meta.contains("sampler")) m.samples->runtime = meta["sampler"].value("runtime", 0.0);
        }
        m.stats = samplestats(*m.samples, m.frame);
        if (cfg.diagnostics.waic) m.waic = waic(*m.samples, m.frame);
    }
    if (cfg_out) *cfg_out = cfg;
    return m;
}

std::string run_predict(const RunConfig& cfg, const std::string& newdata_path, const std::string& out_path) {
    const std::string dir = output_dir(cfg);
    Model m = load_run(dir);
    DataTable nd = read_csv(newdata_path);
    PredictionRequest req = cfg.predictions.empty() ? PredictionRequest{} : cfg.predictions.front().request;
    auto preds = predict(m.frame, m.fit ? &*m.fit : nullptr, m.samples ? &*m.samples : nullptr, nd, req);
    std::string out = out_path.empty() ? (fs::path(dir) / "predictions_newdata.csv").string() : out_path;
    write_predictions_csv(preds, out);
    return out;
}

std::string run_summary(const std::string& run_dir) {
    RunConfig cfg;
    Model m = load_run(run_dir, &cfg);
    return summarize(m, cfg);
}

}
