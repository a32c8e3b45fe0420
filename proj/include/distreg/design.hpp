#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "distreg/data_table.hpp"
#include "distreg/family.hpp"
#include "distreg/formula.hpp"
#include "distreg/special.hpp"

namespace distreg {

struct PsplineBasis {
    Eigen::MatrixXd X;  ///< n x k B-spline design
    Eigen::MatrixXd K;  ///< k x k difference penalty D'D
    Eigen::VectorXd knots;
};

/** B-spline basis with a difference penalty.
 *
 * Knots are equally spaced over [min x, max x] with `degree` extra knots replicated at
 * the same spacing beyond each boundary, giving k basis functions.
 */
PsplineBasis pspline_basis(const Eigen::VectorXd& x, int k, int degree = 3, int penalty_order = 2);

/// Evaluates the B-spline basis at x for the given full knot vector.
Eigen::MatrixXd bspline_design(const Eigen::VectorXd& x, const Eigen::VectorXd& knots, int degree);

/// r-th order difference matrix, (k - r) x k.
Eigen::MatrixXd difference_matrix(int k, int order);

struct CenteredBlock {
    Eigen::MatrixXd X;
    Eigen::MatrixXd K;
    Eigen::MatrixXd Z;  ///< k x (k-1) constraint transform, X_c = X Z
};

/** Absorbs the sum-to-zero constraint 1'X beta = 0 into the basis. */
CenteredBlock center_block(const Eigen::MatrixXd& X, const Eigen::MatrixXd& K);

/// Numerical rank of a symmetric matrix.
int symmetric_rank(const Eigen::MatrixXd& A, double tol = 1e-8);

enum class BlockKind { parametric, smooth, special };

/** One additive component f_jk of a predictor. */
struct TermBlock {
    BlockKind kind = BlockKind::parametric;
    std::string label;               ///< "p" for the parametric block, otherwise the term label
    Eigen::MatrixXd X;               ///< training design (special terms: raw column)
    Eigen::MatrixXd K;               ///< penalty; empty for fixed blocks
    int penalty_rank = 0;
    bool fixed = true;
    bool centered = false;
    std::vector<std::string> coef_names;
    std::string tau2_name;           ///< empty for fixed blocks

    // Parametric block: source term for every column and the expanded column names.
    std::vector<TermSpec> terms;
    std::vector<int> column_term;
    std::vector<std::string> column_names;
    std::map<std::string, std::vector<std::string>> levels;

    // Smooth block.
    std::string variable;
    Eigen::VectorXd knots;
    int degree = 3;
    Eigen::MatrixXd Z;
    double lower = 0.0;
    double upper = 0.0;

    // Special block.
    SpecialTermPtr special;

    std::size_t ncoef() const;
    /// Fitted values on the training rows.
    Eigen::VectorXd fitted(const Eigen::VectorXd& beta) const;
    /// Design matrix for new data (basis blocks only).
    Eigen::MatrixXd design(const DataTable& data) const;
    /// Contribution of the block to the predictor on new data.
    Eigen::VectorXd predict(const DataTable& data, const Eigen::VectorXd& beta) const;
    /// Starting coefficients.
    Eigen::VectorXd start() const;
};

struct ParamBlocks {
    std::string name;
    std::vector<TermBlock> blocks;  ///< blocks[0] is always the parametric block
};

struct CoefRef {
    std::size_t param = 0;
    std::size_t block = 0;
    std::size_t index = 0;
};

/** Everything the engines need: response, per-parameter blocks and the coefficient registry. */
struct ModelFrame {
    FamilyPtr family;
    FormulaSet formulas;
    std::string response;
    Eigen::VectorXd y;
    std::vector<std::string> response_levels;  ///< categorical responses encoded as 0/1
    std::vector<ParamBlocks> params;
    std::size_t n = 0;
    std::size_t dropped_rows = 0;
    std::vector<std::string> coef_order;
    std::map<std::string, CoefRef> registry;

    std::size_t ncoef() const { return coef_order.size(); }
};

/** Builds the model frame; rows with missing values in used columns are dropped. */
ModelFrame build_frame(const FormulaSet& fs, const DataTable& table, FamilyPtr family);

/// Per parameter, per block coefficient vectors.
using Coefficients = std::vector<std::vector<Eigen::VectorXd>>;

Coefficients start_coefficients(const ModelFrame& frame);
/// Predictors on the training rows.
std::vector<Eigen::VectorXd> compute_eta(const ModelFrame& frame, const Coefficients& coefs);
/// Flattens into registry order.
Eigen::VectorXd flatten(const ModelFrame& frame, const Coefficients& coefs);
Coefficients unflatten(const ModelFrame& frame, const Eigen::VectorXd& values);

}
