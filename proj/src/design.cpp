#include "distreg/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "distreg/error.hpp"

namespace distreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::MatrixXd difference_matrix(int k, int order) {
    MatrixXd D = MatrixXd::Identity(k, k);
    for (int r = 0; r < order; ++r) {
        MatrixXd next(D.rows() - 1, k);
        for (Eigen::Index i = 0; i + 1 < D.rows(); ++i) next.row(i) = D.row(i + 1) - D.row(i);
        D = std::move(next);
    }
    return D;
}

MatrixXd bspline_design(const VectorXd& x, const VectorXd& knots, int degree) {
    const int nk = static_cast<int>(knots.size());
    const int k = nk - degree - 1;
    if (k < 1) throw DataError("too few knots for the spline degree");
    MatrixXd X = MatrixXd::Zero(x.size(), k);
    std::vector<double> N(degree + 1), left(degree + 1), right(degree + 1);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        int span = static_cast<int>(std::upper_bound(knots.data(), knots.data() + nk, xi) - knots.data()) - 1;
        span = std::clamp(span, degree, k - 1);
        N[0] = 1.0;
        for (int j = 1; j <= degree; ++j) {
            left[j] = xi - knots[span + 1 - j];
            right[j] = knots[span + j] - xi;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                double tmp = N[r] / (right[r + 1] + left[j - r]);
                N[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            N[j] = saved;
        }
        for (int j = 0; j <= degree; ++j) X(i, span - degree + j) = N[j];
    }
    return X;
}

PsplineBasis pspline_basis(const VectorXd& x, int k, int degree, int penalty_order) {
    if (degree < 1) throw DataError("spline degree must be positive");
    if (k < degree + 1) throw DataError("basis dimension k must be at least degree + 1");
    if (penalty_order < 1 || penalty_order >= k) throw DataError("penalty order must be in [1, k)");
    if (x.size() == 0 || !x.allFinite()) throw DataError("spline covariate must be finite and non-empty");
    const double lo = x.minCoeff(), hi = x.maxCoeff();
    if (!(hi > lo)) throw DataError("spline covariate is constant");
    const int intervals = k - degree;
    const double dx = (hi - lo) / intervals;
    VectorXd knots(k + degree + 1);
    for (int j = 0; j < knots.size(); ++j) knots[j] = lo + (j - degree) * dx;
    knots[degree] = lo;
    knots[k] = hi;
    PsplineBasis out;
    out.X = bspline_design(x, knots, degree);
    MatrixXd D = difference_matrix(k, penalty_order);
    out.K = D.transpose() * D;
    out.knots = std::move(knots);
    return out;
}

CenteredBlock center_block(const MatrixXd& X, const MatrixXd& K) {
    const Eigen::Index k = X.cols();
    if (k < 2) throw DataError("cannot center a block with fewer than two columns");
    VectorXd C = X.colwise().sum().transpose();
    if (C.norm() == 0.0) throw NumericalError("centering constraint is degenerate");
    Eigen::HouseholderQR<MatrixXd> qr(C);
    MatrixXd Q = qr.householderQ() * MatrixXd::Identity(k, k);
    CenteredBlock out;
    out.Z = Q.rightCols(k - 1);
    out.X = X * out.Z;
    out.K = out.Z.transpose() * K * out.Z;
    out.K = 0.5 * (out.K + out.K.transpose());
    return out;
}

int symmetric_rank(const MatrixXd& A, double tol) {
    if (A.size() == 0) return 0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
    const VectorXd& ev = es.eigenvalues();
    double scale = ev.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0;
    return static_cast<int>((ev.array() > tol * scale).count());
}

namespace {

const Column& numeric_column(const DataTable& data, const std::string& name) {
    const Column& c = data.column(name);
    if (c.categorical) throw DataError("column '" + name + "' must be numeric");
    return c;
}

VectorXd numeric_vector(const DataTable& data, const std::string& name) {
    const Column& c = numeric_column(data, name);
    VectorXd v = Eigen::Map<const VectorXd>(c.num.data(), static_cast<Eigen::Index>(c.num.size()));
    if (!v.allFinite()) throw DataError("column '" + name + "' has missing or non-finite values");
    return v;
}

// Expands the parametric terms into columns. When `levels` is empty it is filled from
// the data, otherwise the stored levels are used.
MatrixXd parametric_columns(const std::vector<TermSpec>& terms, const DataTable& data,
                            std::map<std::string, std::vector<std::string>>& levels, bool learn,
                            std::vector<int>* column_term, std::vector<std::string>* names) {
    const Eigen::Index n = static_cast<Eigen::Index>(data.nrows());
    std::vector<VectorXd> cols;
    auto push = [&](VectorXd v, int term, std::string name) {
        cols.push_back(std::move(v));
        if (column_term) column_term->push_back(term);
        if (names) names->push_back(std::move(name));
    };
    for (std::size_t t = 0; t < terms.size(); ++t) {
        const TermSpec& spec = terms[t];
        const int ti = static_cast<int>(t);
        switch (spec.kind) {
            case TermKind::intercept: push(VectorXd::Ones(n), ti, "(Intercept)"); break;
            case TermKind::linear: {
                const Column& c = data.column(spec.variables[0]);
                if (!c.categorical) {
                    push(numeric_vector(data, c.name), ti, c.name);
                    break;
                }
                if (learn) levels[c.name] = c.levels();
                const auto& lv = levels.at(c.name);
                for (std::size_t i = 0; i < c.cat.size(); ++i) {
                    if (c.cat[i].empty()) throw DataError("column '" + c.name + "' has missing values");
                    if (!std::binary_search(lv.begin(), lv.end(), c.cat[i]))
                        throw DataError("unseen level '" + c.cat[i] + "' in column '" + c.name + "'");
                }
                for (std::size_t l = 1; l < lv.size(); ++l) {
                    VectorXd v(n);
                    for (Eigen::Index i = 0; i < n; ++i) v[i] = c.cat[static_cast<std::size_t>(i)] == lv[l] ? 1.0 : 0.0;
                    push(std::move(v), ti, c.name + lv[l]);
                }
                break;
            }
            case TermKind::transform: {
                numeric_column(data, spec.variables[0]);
                VectorXd v = eval_transform(spec, data);
                if (!v.allFinite()) throw DataError("term '" + spec.label + "' produced non-finite values");
                push(std::move(v), ti, spec.label);
                break;
            }
            case TermKind::poly: {
                VectorXd x = numeric_vector(data, spec.variables[0]);
                for (int d = 1; d <= spec.poly_degree; ++d)
                    push(x.array().pow(d).matrix(), ti, spec.label + std::to_string(d));
                break;
            }
            default: throw FormulaError("term '" + spec.label + "' is not parametric");
        }
    }
    MatrixXd X(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) X.col(static_cast<Eigen::Index>(j)) = cols[j];
    return X;
}

}

std::size_t TermBlock::ncoef() const {
    return kind == BlockKind::special ? special->n_params() : static_cast<std::size_t>(X.cols());
}

VectorXd TermBlock::fitted(const VectorXd& beta) const {
    if (kind == BlockKind::special) return special->fitted(beta);
    return X * beta;
}

MatrixXd TermBlock::design(const DataTable& data) const {
    switch (kind) {
        case BlockKind::parametric: {
            auto lv = levels;
            return parametric_columns(terms, data, lv, false, nullptr, nullptr);
        }
        case BlockKind::smooth: {
            VectorXd x = numeric_vector(data, variable);
            const double a = knots[0], b = knots[knots.size() - 1];
            const double tol = 1e-10 * (b - a);
            for (Eigen::Index i = 0; i < x.size(); ++i)
                if (x[i] < a - tol || x[i] > b + tol)
                    throw DataError("'" + variable + "' = " + std::to_string(x[i]) + " lies beyond the outer knots [" +
                                    std::to_string(a) + ", " + std::to_string(b) + "] of " + label);
            return bspline_design(x, knots, degree) * Z;
        }
        case BlockKind::special: break;
    }
    throw DataError("special term '" + label + "' has no design matrix");
}

VectorXd TermBlock::predict(const DataTable& data, const VectorXd& beta) const {
    if (kind == BlockKind::special) return special->predict(numeric_vector(data, variable), beta);
    return design(data) * beta;
}

VectorXd TermBlock::start() const {
    if (kind == BlockKind::special) return special->start();
    return VectorXd::Zero(static_cast<Eigen::Index>(ncoef()));
}

ModelFrame build_frame(const FormulaSet& fs, const DataTable& table, FamilyPtr family) {
    if (!family) throw ConfigError("no family given");
    if (fs.params.size() != family->nparams())
        throw FormulaError("formula set does not match the parameters of family " + family->name());
    for (std::size_t k = 0; k < fs.params.size(); ++k)
        if (fs.params[k].parameter != family->params()[k])
            throw FormulaError("formula parameter order does not match family " + family->name());

    std::vector<std::string> used{fs.response};
    for (const auto& pf : fs.params)
        for (const auto& t : pf.terms)
            for (const auto& v : t.variables)
                if (std::find(used.begin(), used.end(), v) == used.end()) used.push_back(v);
    for (const auto& v : used)
        if (!table.has(v)) throw DataError("unknown column '" + v + "'");

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < table.nrows(); ++i) {
        bool ok = true;
        for (const auto& v : used)
            if (table.column(v).missing(i)) {
                ok = false;
                break;
            }
        if (ok) keep.push_back(i);
    }
    if (keep.empty()) throw DataError("no complete rows left after dropping missing values");
    DataTable data = keep.size() == table.nrows() ? table : table.select_rows(keep);

    ModelFrame frame;
    frame.family = family;
    frame.formulas = fs;
    frame.response = fs.response;
    frame.n = data.nrows();
    frame.dropped_rows = table.nrows() - keep.size();
    const Eigen::Index n = static_cast<Eigen::Index>(frame.n);

    const Column& ycol = data.column(fs.response);
    if (ycol.categorical) {
        auto lv = ycol.levels();
        if (family->name() != "binomial" || lv.size() != 2)
            throw DataError("categorical response '" + fs.response + "' needs the binomial family and two levels");
        frame.response_levels = lv;
        frame.y.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) frame.y[i] = ycol.cat[static_cast<std::size_t>(i)] == lv[1] ? 1.0 : 0.0;
    } else {
        frame.y = Eigen::Map<const VectorXd>(ycol.num.data(), n);
    }
    family->check_response(frame.y);

    for (const auto& pf : fs.params) {
        ParamBlocks pb;
        pb.name = pf.parameter;
        TermBlock par;
        par.kind = BlockKind::parametric;
        par.label = "p";
        for (const auto& t : pf.terms)
            if (t.kind == TermKind::intercept || t.kind == TermKind::linear || t.kind == TermKind::transform ||
                t.kind == TermKind::poly)
                par.terms.push_back(t);
        par.X = parametric_columns(par.terms, data, par.levels, true, &par.column_term, &par.column_names);
        for (const auto& c : par.column_names) par.coef_names.push_back(pf.parameter + ".p." + c);
        pb.blocks.push_back(std::move(par));

        for (const auto& t : pf.terms) {
            if (t.kind == TermKind::smooth) {
                const Column& c = data.column(t.variables[0]);
                if (c.categorical) throw DataError("smooth term " + t.label + " over categorical column");
                VectorXd x = numeric_vector(data, c.name);
                std::set<double> distinct(x.data(), x.data() + x.size());
                if (static_cast<int>(distinct.size()) < t.options.k)
                    throw DataError(t.label + ": fewer distinct values (" + std::to_string(distinct.size()) +
                                    ") than basis functions (" + std::to_string(t.options.k) + ")");
                PsplineBasis ps = pspline_basis(x, t.options.k, t.options.degree, t.options.penalty_order);
                CenteredBlock cb = center_block(ps.X, ps.K);
                TermBlock b;
                b.kind = BlockKind::smooth;
                b.label = t.label;
                b.terms = {t};
                b.X = std::move(cb.X);
                b.K = std::move(cb.K);
                b.Z = std::move(cb.Z);
                b.penalty_rank = symmetric_rank(b.K);
                b.fixed = false;
                b.centered = true;
                b.variable = c.name;
                b.knots = std::move(ps.knots);
                b.degree = t.options.degree;
                b.lower = x.minCoeff();
                b.upper = x.maxCoeff();
                for (Eigen::Index i = 0; i < b.X.cols(); ++i)
                    b.coef_names.push_back(pf.parameter + ".s." + t.label + ".b" + std::to_string(i + 1));
                b.tau2_name = pf.parameter + ".s." + t.label + ".tau21";
                pb.blocks.push_back(std::move(b));
            } else if (t.kind == TermKind::special) {
                TermBlock b;
                b.kind = BlockKind::special;
                b.label = t.label;
                b.terms = {t};
                b.variable = t.variables[0];
                VectorXd x = numeric_vector(data, b.variable);
                b.special = make_special(t.options.bs, t.label, x);
                b.X = x;
                b.fixed = true;
                b.centered = b.special->centered();
                for (std::size_t i = 0; i < b.special->n_params(); ++i)
                    b.coef_names.push_back(pf.parameter + ".s." + t.label + ".b" + std::to_string(i + 1));
                pb.blocks.push_back(std::move(b));
            }
        }
        frame.params.push_back(std::move(pb));
    }

    for (std::size_t k = 0; k < frame.params.size(); ++k)
        for (std::size_t j = 0; j < frame.params[k].blocks.size(); ++j) {
            const auto& b = frame.params[k].blocks[j];
            for (std::size_t i = 0; i < b.coef_names.size(); ++i) {
                if (!frame.registry.emplace(b.coef_names[i], CoefRef{k, j, i}).second)
                    throw FormulaError("coefficient name collision: " + b.coef_names[i]);
                frame.coef_order.push_back(b.coef_names[i]);
            }
        }
    return frame;
}

Coefficients start_coefficients(const ModelFrame& frame) {
    Coefficients c(frame.params.size());
    for (std::size_t k = 0; k < frame.params.size(); ++k) {
        for (const auto& b : frame.params[k].blocks) c[k].push_back(b.start());
        const auto& par = frame.params[k].blocks[0];
        for (std::size_t j = 0; j < par.column_names.size(); ++j)
            if (par.column_names[j] == "(Intercept)") c[k][0][static_cast<Eigen::Index>(j)] = frame.family->init(k, frame.y);
    }
    return c;
}

std::vector<VectorXd> compute_eta(const ModelFrame& frame, const Coefficients& coefs) {
    std::vector<VectorXd> eta;
    for (std::size_t k = 0; k < frame.params.size(); ++k) {
        VectorXd e = VectorXd::Zero(static_cast<Eigen::Index>(frame.n));
        for (std::size_t j = 0; j < frame.params[k].blocks.size(); ++j) e += frame.params[k].blocks[j].fitted(coefs[k][j]);
        eta.push_back(std::move(e));
    }
    return eta;
}

VectorXd flatten(const ModelFrame& frame, const Coefficients& coefs) {
    VectorXd out(static_cast<Eigen::Index>(frame.ncoef()));
    Eigen::Index pos = 0;
    for (const auto& name : frame.coef_order) {
        const CoefRef& r = frame.registry.at(name);
        out[pos++] = coefs[r.param][r.block][static_cast<Eigen::Index>(r.index)];
    }
    return out;
}

Coefficients unflatten(const ModelFrame& frame, const VectorXd& values) {
    if (values.size() != static_cast<Eigen::Index>(frame.ncoef())) throw DataError("coefficient vector has wrong length");
    Coefficients c(frame.params.size());
    for (std::size_t k = 0; k < frame.params.size(); ++k)
        for (const auto& b : frame.params[k].blocks) c[k].push_back(VectorXd::Zero(static_cast<Eigen::Index>(b.ncoef())));
    Eigen::Index pos = 0;
    for (const auto& name : frame.coef_order) {
        const CoefRef& r = frame.registry.at(name);
        c[r.param][r.block][static_cast<Eigen::Index>(r.index)] = values[pos++];
    }
    return c;
}

}
