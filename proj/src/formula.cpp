#include "distreg/formula.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "distreg/error.hpp"
#include "distreg/family.hpp"
#include "distreg/special.hpp"

namespace distreg {

namespace {

struct Token {
    enum class Type { ident, number, string, op, end };
    Type type = Type::end;
    std::string text;
    double value = 0.0;
};

std::vector<Token> tokenize(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '.')) ++j;
            out.push_back({Token::Type::ident, s.substr(i, j - i)});
            i = j;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            double v = 0.0;
            auto res = std::from_chars(s.data() + i, s.data() + s.size(), v);
            if (res.ec != std::errc()) throw FormulaError("bad number in '" + s + "'");
            std::size_t j = static_cast<std::size_t>(res.ptr - s.data());
            out.push_back({Token::Type::number, s.substr(i, j - i), v});
            i = j;
        } else if (c == '"' || c == '\'') {
            std::size_t j = s.find(c, i + 1);
            if (j == std::string::npos) throw FormulaError("unterminated string in '" + s + "'");
            out.push_back({Token::Type::string, s.substr(i + 1, j - i - 1)});
            i = j + 1;
        } else if (std::string("~+-*/^(),=").find(c) != std::string::npos) {
            out.push_back({Token::Type::op, std::string(1, c)});
            ++i;
        } else {
            throw FormulaError(std::string("unexpected character '") + c + "' in '" + s + "'");
        }
    }
    out.push_back({Token::Type::end, ""});
    return out;
}

class Cursor {
    public:
        Cursor(std::vector<Token> toks, std::string src) : toks_{std::move(toks)}, src_{std::move(src)} {}

        const Token& peek(std::size_t ahead = 0) const {
            return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
        }
        Token next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
        bool at_op(const char* op) const { return peek().type == Token::Type::op && peek().text == op; }
        bool accept(const char* op) {
            if (at_op(op)) {
                ++pos_;
                return true;
            }
            return false;
        }
        void expect(const char* op) {
            if (!accept(op)) fail(std::string("expected '") + op + "'");
        }
        bool done() const { return peek().type == Token::Type::end; }
        [[noreturn]] void fail(const std::string& what) const {
            throw FormulaError(what + " in '" + src_ + "'");
        }

    private:
        std::vector<Token> toks_;
        std::string src_;
        std::size_t pos_ = 0;
};

const std::set<std::string> expr_functions = {"log", "exp", "sqrt", "abs"};

// expr := term (('+'|'-') term)* ; term := unary (('*'|'/') unary)* ;
// unary := '-' unary | power ; power := atom ('^' unary)?
Expr parse_expr(Cursor& c);

Expr parse_atom(Cursor& c) {
    Token t = c.next();
    if (t.type == Token::Type::number) {
        Expr e;
        e.op = Expr::Op::number;
        e.value = t.value;
        return e;
    }
    if (t.type == Token::Type::ident) {
        if (c.accept("(")) {
            if (!expr_functions.count(t.text)) c.fail("unknown function '" + t.text + "' in expression");
            Expr e;
            e.op = Expr::Op::call;
            e.name = t.text;
            e.args.push_back(parse_expr(c));
            c.expect(")");
            return e;
        }
        Expr e;
        e.op = Expr::Op::variable;
        e.name = t.text;
        return e;
    }
    if (t.type == Token::Type::op && t.text == "(") {
        Expr e = parse_expr(c);
        c.expect(")");
        return e;
    }
    c.fail("unexpected token '" + t.text + "' in expression");
}

Expr parse_unary(Cursor& c);

Expr parse_power(Cursor& c) {
    Expr base = parse_atom(c);
    if (c.accept("^")) {
        Expr e;
        e.op = Expr::Op::pow;
        e.args = {std::move(base), parse_unary(c)};
        return e;
    }
    return base;
}

Expr parse_unary(Cursor& c) {
    if (c.accept("-")) {
        Expr e;
        e.op = Expr::Op::neg;
        e.args.push_back(parse_unary(c));
        return e;
    }
    if (c.accept("+")) return parse_unary(c);
    return parse_power(c);
}

Expr parse_term(Cursor& c) {
    Expr lhs = parse_unary(c);
    while (c.at_op("*") || c.at_op("/")) {
        Expr e;
        e.op = c.next().text == "*" ? Expr::Op::mul : Expr::Op::div;
        e.args = {std::move(lhs), parse_unary(c)};
        lhs = std::move(e);
    }
    return lhs;
}

Expr parse_expr(Cursor& c) {
    Expr lhs = parse_term(c);
    while (c.at_op("+") || c.at_op("-")) {
        Expr e;
        e.op = c.next().text == "+" ? Expr::Op::add : Expr::Op::sub;
        e.args = {std::move(lhs), parse_term(c)};
        lhs = std::move(e);
    }
    return lhs;
}

int precedence(const Expr& e) {
    switch (e.op) {
        case Expr::Op::add:
        case Expr::Op::sub: return 1;
        case Expr::Op::mul:
        case Expr::Op::div: return 2;
        case Expr::Op::neg: return 3;
        case Expr::Op::pow: return 4;
        default: return 5;
    }
}

std::string format_number(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string wrap(const Expr& e, int min_prec) {
    std::string s = e.render();
    return precedence(e) < min_prec ? "(" + s + ")" : s;
}

}

std::string Expr::render() const {
    switch (op) {
        case Op::number: return format_number(value);
        case Op::variable: return name;
        case Op::call: return name + "(" + args[0].render() + ")";
        case Op::neg: return "-" + wrap(args[0], 3);
        case Op::add: return wrap(args[0], 1) + "+" + wrap(args[1], 2);
        case Op::sub: return wrap(args[0], 1) + "-" + wrap(args[1], 2);
        case Op::mul: return wrap(args[0], 2) + "*" + wrap(args[1], 3);
        case Op::div: return wrap(args[0], 2) + "/" + wrap(args[1], 3);
        // right-associative; unary minus in the exponent is rendered inline
        case Op::pow: return wrap(args[0], 5) + "^" + wrap(args[1], 3);
    }
    return {};
}

void Expr::collect_variables(std::vector<std::string>& out) const {
    if (op == Op::variable) {
        if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
        return;
    }
    for (const auto& a : args) a.collect_variables(out);
}

Expr parse_expression(const std::string& text) {
    Cursor c(tokenize(text), text);
    Expr e = parse_expr(c);
    if (!c.done()) c.fail("trailing input in expression");
    return e;
}

std::string TermSpec::render() const {
    switch (kind) {
        case TermKind::intercept: return "1";
        case TermKind::linear: return variables.at(0);
        case TermKind::transform: return label;
        case TermKind::poly: return label;
        case TermKind::smooth: {
            const SmoothOptions def;
            std::string out = "s(" + variables.at(0);
            if (options.k != def.k) out += ", k = " + std::to_string(options.k);
            if (options.bs != def.bs) out += ", bs = \"" + options.bs + "\"";
            if (options.degree != def.degree) out += ", degree = " + std::to_string(options.degree);
            if (options.penalty_order != def.penalty_order)
                out += ", penalty_order = " + std::to_string(options.penalty_order);
            return out + ")";
        }
        case TermKind::special: return "s2(" + variables.at(0) + ", bs = \"" + options.bs + "\")";
    }
    return {};
}

bool TermSpec::operator==(const TermSpec& o) const {
    auto same_transform = [&] {
        if (transform.has_value() != o.transform.has_value()) return false;
        return !transform || transform->render() == o.transform->render();
    };
    return kind == o.kind && variables == o.variables && same_transform() && options.k == o.options.k &&
           options.bs == o.options.bs && options.degree == o.options.degree &&
           options.penalty_order == o.options.penalty_order && poly_degree == o.poly_degree && label == o.label;
}

bool ParamFormula::has_intercept() const {
    return std::any_of(terms.begin(), terms.end(), [](const TermSpec& t) { return t.kind == TermKind::intercept; });
}

std::vector<std::string> FormulaSet::render() const {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < params.size(); ++k) {
        std::string rhs;
        for (const auto& t : params[k].terms) {
            if (t.kind == TermKind::intercept) continue;
            if (!rhs.empty()) rhs += " + ";
            rhs += t.render();
        }
        if (!params[k].has_intercept()) rhs = rhs.empty() ? "-1" : rhs + " - 1";
        else if (rhs.empty()) rhs = "1";
        out.push_back((k == 0 ? response : params[k].parameter) + " ~ " + rhs);
    }
    return out;
}

namespace {

struct RawFormula {
    std::string lhs;
    std::vector<TermSpec> terms;
    bool intercept = true;
};

int option_int(const Token& t, const std::string& key, Cursor& c) {
    if (t.type != Token::Type::number || t.value != std::floor(t.value))
        c.fail("option '" + key + "' must be an integer");
    return static_cast<int>(t.value);
}

TermSpec parse_call(const std::string& fn, Cursor& c) {
    TermSpec t;
    if (fn == "I") {
        t.kind = TermKind::transform;
        Expr e = parse_expr(c);
        c.expect(")");
        std::vector<std::string> vars;
        e.collect_variables(vars);
        if (vars.size() != 1) c.fail("I(...) must reference exactly one variable");
        t.variables = vars;
        t.label = "I(" + e.render() + ")";
        t.transform = std::move(e);
        return t;
    }
    if (fn == "s" || fn == "s2" || fn == "poly") {
        Token var = c.next();
        if (var.type != Token::Type::ident) c.fail(fn + "() needs a variable name");
        t.variables = {var.text};
        bool have_degree = false;
        while (c.accept(",")) {
            Token key = c.next();
            if (key.type == Token::Type::number && fn == "poly" && !have_degree) {
                t.poly_degree = option_int(key, "degree", c);
                have_degree = true;
                continue;
            }
            if (key.type != Token::Type::ident) c.fail("expected an option name in " + fn + "()");
            c.expect("=");
            Token val = c.next();
            if (fn == "poly") {
                if (key.text == "degree") {
                    t.poly_degree = option_int(val, key.text, c);
                    have_degree = true;
                } else if (key.text == "raw") {
                    if (val.type != Token::Type::ident || (val.text != "TRUE" && val.text != "T"))
                        c.fail("only raw polynomials are supported");
                } else {
                    c.fail("unknown poly() option '" + key.text + "'");
                }
            } else if (key.text == "k") {
                t.options.k = option_int(val, key.text, c);
            } else if (key.text == "bs") {
                if (val.type != Token::Type::string) c.fail("bs must be a quoted string");
                t.options.bs = val.text;
            } else if (key.text == "degree" && fn == "s") {
                t.options.degree = option_int(val, key.text, c);
            } else if ((key.text == "penalty_order" || key.text == "m") && fn == "s") {
                t.options.penalty_order = option_int(val, key.text, c);
            } else {
                c.fail("unknown " + fn + "() option '" + key.text + "'");
            }
        }
        c.expect(")");
        if (fn == "poly") {
            if (!have_degree || t.poly_degree < 1) c.fail("poly() needs a positive degree");
            t.kind = TermKind::poly;
            t.label = "poly(" + t.variables[0] + ", " + std::to_string(t.poly_degree) + ")";
        } else if (fn == "s") {
            if (t.options.bs != "ps") c.fail("unsupported smooth basis bs = \"" + t.options.bs + "\"");
            if (t.options.degree < 1) c.fail("spline degree must be positive");
            if (t.options.k < 3 || t.options.k < t.options.degree + 1)
                c.fail("basis dimension k must be >= max(3, degree + 1)");
            if (t.options.penalty_order < 1 || t.options.penalty_order >= t.options.k)
                c.fail("penalty order must be in [1, k)");
            t.kind = TermKind::smooth;
            t.label = "s(" + t.variables[0] + ")";
        } else {
            if (t.options.bs == "ps") t.options.bs = "gc";
            if (!has_special(t.options.bs)) c.fail("unknown special term bs = \"" + t.options.bs + "\"");
            t.kind = TermKind::special;
            t.label = "s2(" + t.variables[0] + ")";
        }
        return t;
    }
    c.fail("unsupported term function '" + fn + "'");
}

RawFormula parse_one(const std::string& text) {
    RawFormula f;
    auto toks = tokenize(text);
    std::size_t tilde = 0;
    int ntilde = 0;
    for (std::size_t i = 0; i < toks.size(); ++i)
        if (toks[i].type == Token::Type::op && toks[i].text == "~") {
            tilde = i;
            ++ntilde;
        }
    if (ntilde > 1) throw FormulaError("more than one '~' in '" + text + "'");
    std::vector<Token> rhs;
    if (ntilde == 1 && tilde == 0) {
        rhs.assign(toks.begin() + 1, toks.end());
    } else if (ntilde == 1) {
        if (tilde != 1 || toks[0].type != Token::Type::ident)
            throw FormulaError("left-hand side must be a single name in '" + text + "'");
        f.lhs = toks[0].text;
        rhs.assign(toks.begin() + 2, toks.end());
    } else {
        rhs = toks;
    }
    Cursor c(rhs, text);
    if (c.done()) throw FormulaError("empty formula '" + text + "'");
    std::set<std::string> seen;
    bool first = true;
    while (!c.done()) {
        bool minus = false;
        if (!first) {
            if (c.accept("-")) minus = true;
            else c.expect("+");
        } else if (c.accept("-")) {
            minus = true;
        }
        first = false;
        Token t = c.next();
        if (t.type == Token::Type::number) {
            if (t.value == 0.0) f.intercept = false;
            else if (t.value == 1.0) f.intercept = !minus;
            else c.fail("unexpected number '" + t.text + "'");
            continue;
        }
        if (minus) c.fail("only '-1' may be subtracted");
        if (t.type != Token::Type::ident) c.fail("unexpected token '" + t.text + "'");
        TermSpec spec;
        if (c.accept("(")) {
            spec = parse_call(t.text, c);
        } else {
            spec.kind = TermKind::linear;
            spec.variables = {t.text};
            spec.label = t.text;
        }
        if (!seen.insert(spec.label).second) c.fail("duplicate term '" + spec.label + "'");
        f.terms.push_back(std::move(spec));
    }
    return f;
}

}

FormulaSet parse_formula_set(const std::vector<std::string>& texts, const Family& family) {
    if (texts.empty()) throw FormulaError("no formula given");
    if (texts.size() > family.nparams())
        throw FormulaError(std::to_string(texts.size()) + " formulas for a family with " +
                           std::to_string(family.nparams()) + " parameters");
    std::vector<std::optional<RawFormula>> bound(family.nparams());
    FormulaSet fs;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        RawFormula raw = parse_one(texts[i]);
        std::size_t slot = 0;
        if (i == 0) {
            if (raw.lhs.empty()) throw FormulaError("the first formula needs a response: '" + texts[i] + "'");
            fs.response = raw.lhs;
            slot = 0;
        } else if (!raw.lhs.empty()) {
            int k = family.param_index(raw.lhs);
            if (k < 0)
                throw FormulaError("'" + raw.lhs + "' is not a parameter of family " + family.name());
            slot = static_cast<std::size_t>(k);
        } else {
            slot = 0;
            while (slot < bound.size() && bound[slot]) ++slot;
            if (slot == bound.size()) throw FormulaError("no parameter left for '" + texts[i] + "'");
        }
        if (bound[slot]) throw FormulaError("parameter '" + family.params()[slot] + "' has two formulas");
        bound[slot] = std::move(raw);
    }
    for (std::size_t k = 0; k < family.nparams(); ++k) {
        ParamFormula pf;
        pf.parameter = family.params()[k];
        if (!bound[k] || bound[k]->intercept) {
            TermSpec icpt;
            icpt.kind = TermKind::intercept;
            icpt.label = "(Intercept)";
            pf.terms.push_back(icpt);
        }
        if (bound[k])
            for (auto& t : bound[k]->terms) pf.terms.push_back(std::move(t));
        fs.params.push_back(std::move(pf));
    }
    return fs;
}

Eigen::VectorXd eval_expression(const Expr& e, const DataTable& table) {
    const Eigen::Index n = static_cast<Eigen::Index>(table.nrows());
    switch (e.op) {
        case Expr::Op::number: return Eigen::VectorXd::Constant(n, e.value);
        case Expr::Op::variable: {
            const Column& c = table.column(e.name);
            if (c.categorical) throw DataError("column '" + e.name + "' is not numeric");
            return Eigen::Map<const Eigen::VectorXd>(c.num.data(), n);
        }
        case Expr::Op::neg: return -eval_expression(e.args[0], table);
        case Expr::Op::call: {
            Eigen::VectorXd a = eval_expression(e.args[0], table);
            Eigen::VectorXd r(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                double v = a[i];
                if (e.name == "log") r[i] = std::log(v);
                else if (e.name == "exp") r[i] = std::exp(v);
                else if (e.name == "sqrt") r[i] = std::sqrt(v);
                else r[i] = std::abs(v);
                if (!std::isfinite(r[i]) && std::isfinite(v))
                    throw DataError(e.name + "() is not finite for value " + format_number(v));
            }
            return r;
        }
        default: break;
    }
    Eigen::VectorXd a = eval_expression(e.args[0], table);
    Eigen::VectorXd b = eval_expression(e.args[1], table);
    switch (e.op) {
        case Expr::Op::add: return a + b;
        case Expr::Op::sub: return a - b;
        case Expr::Op::mul: return a.cwiseProduct(b);
        case Expr::Op::div:
            for (Eigen::Index i = 0; i < n; ++i)
                if (b[i] == 0.0) throw DataError("division by zero in expression '" + e.render() + "'");
            return a.cwiseQuotient(b);
        case Expr::Op::pow: {
            Eigen::VectorXd r(n);
            for (Eigen::Index i = 0; i < n; ++i) r[i] = std::pow(a[i], b[i]);
            return r;
        }
        default: break;
    }
    throw FormulaError("bad expression node");
}

Eigen::VectorXd eval_transform(const TermSpec& spec, const DataTable& table) {
    if (spec.kind != TermKind::transform || !spec.transform)
        throw FormulaError("term '" + spec.label + "' is not a transform");
    return eval_expression(*spec.transform, table);
}

}
