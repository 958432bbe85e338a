#pragma once

// Affine matrix expressions over a vector of scalar decision unknowns and
// the problems built from them.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "descfilter/linalg.hpp"

namespace descfilter {

// One entry of an affine map: coeff * v[var] lands at (row, col).
struct Term {
    int var = 0;
    int row = 0;
    int col = 0;
    double coeff = 0.0;
};

// Affine replacement for one scalar unknown: constant + sum coeff * v[var].
struct AffineScalar {
    double constant = 0.0;
    std::vector<std::pair<int, double>> terms;
};

class MatExpr {
public:
    MatExpr() = default;
    explicit MatExpr(Mat constant);
    MatExpr(Eigen::Index rows, Eigen::Index cols, Mat constant, std::vector<Term> terms);

    static MatExpr zero(Eigen::Index rows, Eigen::Index cols) { return MatExpr(Mat::Zero(rows, cols)); }

    [[nodiscard]] Eigen::Index rows() const { return constant_.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return constant_.cols(); }
    [[nodiscard]] const Mat& constant_part() const { return constant_; }
    // Sorted by (var, row, col), no duplicates, no zero coefficients.
    [[nodiscard]] const std::vector<Term>& terms() const { return terms_; }
    [[nodiscard]] bool is_constant() const { return terms_.empty(); }

    [[nodiscard]] MatExpr transpose() const;
    [[nodiscard]] MatExpr symmetrized() const;  // (X + X^T) / 2, exactly symmetric
    [[nodiscard]] bool structurally_symmetric() const;
    // Largest |X - X^T| coefficient relative to the largest coefficient.
    [[nodiscard]] double asymmetry() const;

    [[nodiscard]] Mat eval(const Vec& v) const;
    [[nodiscard]] Mat coefficient(int var) const;
    [[nodiscard]] MatExpr substitute(const std::vector<AffineScalar>& map) const;

    [[nodiscard]] MatExpr block(Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols) const;

    friend MatExpr operator+(const MatExpr& a, const MatExpr& b);
    friend MatExpr operator-(const MatExpr& a, const MatExpr& b);
    friend MatExpr operator-(const MatExpr& a);
    friend MatExpr operator*(double s, const MatExpr& a);
    friend MatExpr operator*(const Mat& k, const MatExpr& a);
    friend MatExpr operator*(const MatExpr& a, const Mat& k);
    // Throws Nonaffine unless at least one side is constant.
    friend MatExpr operator*(const MatExpr& a, const MatExpr& b);

private:
    void normalize();

    Mat constant_;
    std::vector<Term> terms_;
};

// scalar (1 x 1 expression) times a constant matrix
[[nodiscard]] MatExpr scale(const MatExpr& scalar, const Mat& k);

/// Block assembly. Cells left as std::nullopt are zero blocks whose shape is
/// taken from the row and column sizes given by the other cells.
[[nodiscard]] MatExpr block_matrix(const std::vector<std::vector<std::optional<MatExpr>>>& grid);

/// Symmetric block assembly from the upper triangle: upper[i][j - i] is the
/// (i, j) block for j >= i, the lower triangle is filled by transposes.
[[nodiscard]] MatExpr symmetric_blocks(const std::vector<std::vector<std::optional<MatExpr>>>& upper);

enum class VarKind { Scalar, Rectangular, Symmetric };

struct DecisionVar {
    std::string name;
    VarKind kind = VarKind::Scalar;
    int rows = 1;
    int cols = 1;
    int offset = 0;

    [[nodiscard]] int size() const;
    [[nodiscard]] MatExpr expr() const;
    [[nodiscard]] Mat unpack(const Vec& v) const;
    void pack(const Mat& value, Vec& v) const;
};

enum class Sense { NegDef, PosDef, NegSemidef, PosSemidef, Zero };

[[nodiscard]] std::string to_string(Sense s);
[[nodiscard]] std::string to_string(VarKind k);

struct Constraint {
    std::string name;
    MatExpr expr;
    Sense sense = Sense::NegDef;
    double shift = 0.0;
    std::string group;
};

// Named sub-block of a constraint matrix, for diagnostics ("Xi1/Pi1/Lambda2").
struct BlockInfo {
    std::string name;
    int constraint = 0;
    Eigen::Index row = 0;
    Eigen::Index col = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
};

struct LmiProblem {
    std::string name;
    std::vector<DecisionVar> variables;
    std::vector<Constraint> constraints;
    Vec objective;  // one coefficient per scalar unknown
    std::vector<BlockInfo> blocks;
    // Affine quantities recovered after a solve (P1, P2, G1, CF, ...).
    std::map<std::string, MatExpr> derived;
    std::map<std::string, std::string> tags;
    bool substituted = false;

    [[nodiscard]] int num_scalars() const;
    [[nodiscard]] const DecisionVar* find_variable(const std::string& name) const;
    [[nodiscard]] bool has_variable(const std::string& name) const { return find_variable(name) != nullptr; }

    MatExpr add_variable(const std::string& name, VarKind kind, int rows, int cols);
    [[nodiscard]] MatExpr var(const std::string& name) const;

    // Symmetrizes inequality expressions; throws Internal if they are not
    // symmetric up to rounding or DimensionMismatch if not square.
    void add_constraint(Constraint c);
    void add_objective(const std::string& var, double coeff);

    // Value of a derived quantity or of a variable with that name.
    [[nodiscard]] Mat value(const std::string& name, const Vec& v) const;
};

using Assignment = std::map<std::string, Mat>;

// Throws MissingVariable if a variable has no value, DimensionMismatch on shape.
[[nodiscard]] Vec pack(const LmiProblem& problem, const Assignment& values);
[[nodiscard]] Assignment unpack(const LmiProblem& problem, const Vec& v);

struct ConstraintMargin {
    std::string name;
    Sense sense = Sense::NegDef;
    double shift = 0.0;
    Mat value;
    // lambda_max for NegDef/NegSemidef, lambda_min for PosDef/PosSemidef,
    // max |entry| for Zero.
    double extreme = 0.0;
    // >= 0 when satisfied: distance past the shifted boundary, or -residual.
    double margin = 0.0;
    bool passed = false;
};

struct MarginsReport {
    std::vector<ConstraintMargin> constraints;
    double min_margin = 0.0;  // over inequality constraints
    double max_equality_residual = 0.0;

    [[nodiscard]] bool all_passed() const;
    [[nodiscard]] const ConstraintMargin* find(const std::string& name) const;
};

struct MarginTolerances {
    double inequality = 1e-12;  // relative to 1 + ||value||
    double equality = 1e-8;     // relative to 1 + ||constant part||
};

[[nodiscard]] MarginsReport evaluate_at(const LmiProblem& problem, const Vec& v, const MarginTolerances& tol = {});
[[nodiscard]] MarginsReport evaluate_at(const LmiProblem& problem, const Assignment& values,
                                        const MarginTolerances& tol = {});

/// Plain-text dump, one line per affine triple ordered by (variable, row,
/// column); constant entries first per constraint. Deterministic.
[[nodiscard]] std::string dump(const LmiProblem& problem);

} // namespace descfilter
