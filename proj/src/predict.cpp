#include "distreg/predict.hpp"

#include <algorithm>
#include <cstdio>

#include "distreg/diagnostics.hpp"
#include "distreg/error.hpp"

namespace distreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

/// Design of one block on new data with excluded columns zeroed.
struct PreparedBlock {
    std::size_t k = 0;
    std::size_t j = 0;
    MatrixXd D;
    VectorXd x;  ///< special terms
};

bool has_label(const std::vector<std::string>& terms, const std::string& label) {
    return std::find(terms.begin(), terms.end(), label) != terms.end();
}

void check_terms(const ModelFrame& frame, const std::vector<std::string>& terms) {
    for (const auto& t : terms) {
        bool found = false;
        for (const auto& pb : frame.params)
            for (const auto& b : pb.blocks) {
                if (b.kind != BlockKind::parametric) found = found || b.label == t;
                else
                    for (const auto& ts : b.terms) found = found || ts.label == t;
            }
        if (!found) throw DataError("unknown term '" + t + "'");
    }
}

std::vector<PreparedBlock> prepare(const ModelFrame& frame, const DataTable& newdata,
                                   const std::vector<std::string>& terms, bool intercept, std::size_t k) {
    std::vector<PreparedBlock> out;
    const auto& blocks = frame.params[k].blocks;
    for (std::size_t j = 0; j < blocks.size(); ++j) {
        const TermBlock& b = blocks[j];
        if (b.ncoef() == 0) continue;
        PreparedBlock p{k, j, {}, {}};
        if (b.kind == BlockKind::parametric) {
            std::vector<bool> keep(b.column_names.size());
            bool any = false;
            for (std::size_t c = 0; c < keep.size(); ++c) {
                const TermSpec& ts = b.terms[static_cast<std::size_t>(b.column_term[c])];
                keep[c] = ts.kind == TermKind::intercept ? intercept : (terms.empty() || has_label(terms, ts.label));
                any = any || keep[c];
            }
            if (!any) continue;
            p.D = b.design(newdata);
            for (std::size_t c = 0; c < keep.size(); ++c)
                if (!keep[c]) p.D.col(static_cast<Eigen::Index>(c)).setZero();
        } else {
            if (!terms.empty() && !has_label(terms, b.label)) continue;
            if (b.kind == BlockKind::special) {
                const Column& col = newdata.column(b.variable);
                if (col.categorical) throw DataError("column '" + b.variable + "' must be numeric");
                p.x = Eigen::Map<const VectorXd>(col.num.data(), static_cast<Eigen::Index>(col.num.size()));
                if (!p.x.allFinite()) throw DataError("column '" + b.variable + "' has missing values");
            } else {
                p.D = b.design(newdata);
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

VectorXd evaluate(const ModelFrame& frame, const std::vector<PreparedBlock>& blocks, const Coefficients& c,
                  Eigen::Index n) {
    VectorXd eta = VectorXd::Zero(n);
    for (const auto& p : blocks) {
        const TermBlock& b = frame.params[p.k].blocks[p.j];
        if (b.kind == BlockKind::special) eta += b.special->predict(p.x, c[p.k][p.j]);
        else eta += p.D * c[p.k][p.j];
    }
    return eta;
}

bool spans_full_predictor(const ModelFrame& frame, std::size_t k, const std::vector<std::string>& terms) {
    if (terms.empty()) return true;
    for (const auto& b : frame.params[k].blocks) {
        if (b.kind == BlockKind::parametric) {
            for (const auto& ts : b.terms)
                if (ts.kind != TermKind::intercept && !has_label(terms, ts.label)) return false;
        } else if (!has_label(terms, b.label)) {
            return false;
        }
    }
    return true;
}

}

std::vector<VectorXd> predict_eta(const ModelFrame& frame, const Coefficients& coefs, const DataTable& newdata,
                                  const std::vector<std::string>& terms, bool intercept) {
    check_terms(frame, terms);
    std::vector<VectorXd> out;
    for (std::size_t k = 0; k < frame.params.size(); ++k)
        out.push_back(evaluate(frame, prepare(frame, newdata, terms, intercept, k), coefs,
                               static_cast<Eigen::Index>(newdata.nrows())));
    return out;
}

std::vector<ParamPrediction> predict(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                                     const DataTable& newdata, const PredictionRequest& req) {
    if (!fit && !samples) throw ConfigError("no fit or samples to predict from");
    check_terms(frame, req.terms);
    std::vector<std::size_t> params;
    if (req.params.empty()) {
        for (std::size_t k = 0; k < frame.params.size(); ++k) params.push_back(k);
    } else {
        for (const auto& name : req.params) {
            int k = frame.family->param_index(name);
            if (k < 0) throw ConfigError("unknown parameter '" + name + "'");
            params.push_back(static_cast<std::size_t>(k));
        }
    }
    const bool inverse = req.target == PredictTarget::parameter;
    if (inverse)
        for (std::size_t k : params)
            if (!req.intercept || !spans_full_predictor(frame, k, req.terms))
                throw ConfigError("parameter-scale predictions need the full predictor of " + frame.params[k].name +
                                  "; use the link or term target for subsets");

    const Eigen::Index n = static_cast<Eigen::Index>(newdata.nrows());
    const Coefficients base = start_coefficients(frame);
    const std::size_t ndraw = samples ? samples->nsave() : 1;
    if (ndraw == 0) throw DataError("empty sample matrix");

    std::vector<ParamPrediction> out;
    for (std::size_t k : params) {
        const auto blocks = prepare(frame, newdata, req.terms, req.intercept, k);
        const Link& link = frame.family->links()[k];
        MatrixXd draws(n, static_cast<Eigen::Index>(ndraw));
        for (std::size_t s = 0; s < ndraw; ++s) {
            const Coefficients c = samples ? coefficients_from_row(frame, *samples, s, base) : fit->beta;
            VectorXd v = evaluate(frame, blocks, c, n);
            draws.col(static_cast<Eigen::Index>(s)) = inverse ? link.inverse(v) : v;
        }
        ParamPrediction p;
        p.param = frame.params[k].name;
        switch (req.functional) {
            case Functional::mean:
                p.values = draws.rowwise().mean();
                p.column_names = {p.param};
                break;
            case Functional::c95:
                p.values.resize(n, 3);
                for (Eigen::Index i = 0; i < n; ++i) {
                    Interval95 iv = c95(draws.row(i).transpose());
                    p.values.row(i) << iv.lower, iv.mean, iv.upper;
                }
                p.column_names = {p.param + ".2.5%", p.param + ".mean", p.param + ".97.5%"};
                break;
            case Functional::identity:
                p.values = std::move(draws);
                for (std::size_t s = 0; s < ndraw; ++s) p.column_names.push_back(p.param + ".draw" + std::to_string(s + 1));
                break;
        }
        out.push_back(std::move(p));
    }
    return out;
}

VectorXd prob_exceed(const Family& family, const ParamValues& par, double threshold) {
    if (!family.has_cdf()) throw DataError(family.name() + " has no cdf");
    Eigen::Index n = 1;
    for (const auto& p : par) n = std::max(n, p.size());
    VectorXd t = VectorXd::Constant(n, threshold - 1.0);
    return (1.0 - family.cdf(t, par).array()).matrix();
}

VectorXd prob_exceed(const ModelFrame& frame, const FitState* fit, const SampleMatrix* samples,
                     const DataTable& newdata, double threshold) {
    return prob_exceed(*frame.family, point_parameters(frame, fit, samples, &newdata), threshold);
}

void write_predictions_csv(const std::vector<ParamPrediction>& preds, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write " + path);
    Eigen::Index n = preds.empty() ? 0 : preds[0].values.rows();
    bool first = true;
    for (const auto& p : preds)
        for (const auto& c : p.column_names) {
            std::fprintf(f, "%s%s", first ? "" : ",", c.c_str());
            first = false;
        }
    std::fputc('\n', f);
    for (Eigen::Index i = 0; i < n; ++i) {
        first = true;
        for (const auto& p : preds)
            for (Eigen::Index j = 0; j < p.values.cols(); ++j) {
                std::fprintf(f, "%s%.17g", first ? "" : ",", p.values(i, j));
                first = false;
            }
        std::fputc('\n', f);
    }
    std::fclose(f);
}

}
