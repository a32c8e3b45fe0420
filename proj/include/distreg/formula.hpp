#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "distreg/data_table.hpp"

namespace distreg {

class Family;

enum class TermKind { intercept, linear, transform, poly, smooth, special };

/** Arithmetic expression tree used inside `I(...)`. */
struct Expr {
    enum class Op { number, variable, neg, add, sub, mul, div, pow, call };
    Op op = Op::number;
    double value = 0.0;
    std::string name;  // variable or function name
    std::vector<Expr> args;

    /// Canonical text form, fully determined by the tree.
    std::string render() const;
    /// Names of all variables referenced by the expression.
    void collect_variables(std::vector<std::string>& out) const;
};

/// Parses an arithmetic expression such as `(x-1)*2` or `age^2`.
Expr parse_expression(const std::string& text);

struct SmoothOptions {
    int k = 10;
    std::string bs = "ps";
    int degree = 3;
    int penalty_order = 2;
};

struct TermSpec {
    TermKind kind = TermKind::linear;
    std::vector<std::string> variables;
    std::optional<Expr> transform;
    SmoothOptions options;
    int poly_degree = 0;
    std::string label;

    /// Source text that parses back to this term.
    std::string render() const;
    bool operator==(const TermSpec& o) const;
};

/** Terms for one distribution parameter. */
struct ParamFormula {
    std::string parameter;
    std::vector<TermSpec> terms;

    bool has_intercept() const;
    bool operator==(const ParamFormula& o) const = default;
};

struct FormulaSet {
    std::string response;
    /// One entry per family parameter, in family order.
    std::vector<ParamFormula> params;

    /// One formula string per parameter; feeding these back through
    /// parse_formula_set reproduces this structure.
    std::vector<std::string> render() const;
    bool operator==(const FormulaSet& o) const = default;
};

/** Parses one formula per distribution parameter.
 *
 * The first formula must carry the response on its left-hand side. Later formulas bind
 * to a parameter by left-hand-side name, or positionally to the next unbound parameter
 * when they have none. Parameters without a formula are intercept-only.
 */
FormulaSet parse_formula_set(const std::vector<std::string>& texts, const Family& family);

/// Evaluates an `I(...)` term elementwise over the table.
Eigen::VectorXd eval_transform(const TermSpec& spec, const DataTable& table);
Eigen::VectorXd eval_expression(const Expr& e, const DataTable& table);

}
