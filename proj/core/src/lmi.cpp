#include "descfilter/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "descfilter/error.hpp"

namespace descfilter {

namespace {

std::string shape(Eigen::Index r, Eigen::Index c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

void require_same_shape(const MatExpr& a, const MatExpr& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::DimensionMismatch,
                    std::string(op) + ": " + shape(a.rows(), a.cols()) + " vs " + shape(b.rows(), b.cols()));
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

MatExpr::MatExpr(Mat constant) : constant_(std::move(constant)) {}

MatExpr::MatExpr(Eigen::Index rows, Eigen::Index cols, Mat constant, std::vector<Term> terms)
    : constant_(std::move(constant)), terms_(std::move(terms)) {
    if (constant_.rows() != rows || constant_.cols() != cols) {
        throw Error(ErrorKind::DimensionMismatch, "constant part is " + shape(constant_.rows(), constant_.cols()) +
                                                      ", expected " + shape(rows, cols));
    }
    for (const auto& t : terms_) {
        if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols || t.var < 0) {
            throw Error(ErrorKind::DimensionMismatch, "affine term outside " + shape(rows, cols));
        }
    }
    normalize();
}

void MatExpr::normalize() {
    std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) {
        return std::tie(a.var, a.row, a.col) < std::tie(b.var, b.row, b.col);
    });
    std::vector<Term> merged;
    merged.reserve(terms_.size());
    for (const auto& t : terms_) {
        if (!merged.empty() && merged.back().var == t.var && merged.back().row == t.row && merged.back().col == t.col) {
            merged.back().coeff += t.coeff;
        } else {
            merged.push_back(t);
        }
    }
    std::erase_if(merged, [](const Term& t) { return t.coeff == 0.0; });
    terms_ = std::move(merged);
}

MatExpr MatExpr::transpose() const {
    MatExpr out(constant_.transpose());
    out.terms_.reserve(terms_.size());
    for (const auto& t : terms_) out.terms_.push_back({t.var, t.col, t.row, t.coeff});
    out.normalize();
    return out;
}

MatExpr MatExpr::symmetrized() const {
    if (rows() != cols()) throw Error(ErrorKind::DimensionMismatch, "symmetrize: not square " + shape(rows(), cols()));
    return 0.5 * (*this + transpose());
}

bool MatExpr::structurally_symmetric() const {
    if (rows() != cols()) return false;
    if (constant_ != constant_.transpose()) return false;
    const MatExpr t = transpose();
    if (t.terms_.size() != terms_.size()) return false;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        const Term& a = terms_[i];
        const Term& b = t.terms_[i];
        if (a.var != b.var || a.row != b.row || a.col != b.col || a.coeff != b.coeff) return false;
    }
    return true;
}

double MatExpr::asymmetry() const {
    if (rows() != cols()) return INFINITY;
    const MatExpr diff = *this - transpose();
    double scale = constant_.cwiseAbs().maxCoeff();
    for (const auto& t : terms_) scale = std::max(scale, std::abs(t.coeff));
    double worst = diff.constant_.size() ? diff.constant_.cwiseAbs().maxCoeff() : 0.0;
    for (const auto& t : diff.terms_) worst = std::max(worst, std::abs(t.coeff));
    return scale > 0.0 ? worst / scale : worst;
}

Mat MatExpr::eval(const Vec& v) const {
    Mat out = constant_;
    for (const auto& t : terms_) {
        if (t.var >= v.size()) throw Error(ErrorKind::MissingVariable, "unknown " + std::to_string(t.var) + " not assigned");
        out(t.row, t.col) += t.coeff * v(t.var);
    }
    return out;
}

Mat MatExpr::coefficient(int var) const {
    Mat out = Mat::Zero(rows(), cols());
    for (const auto& t : terms_) {
        if (t.var == var) out(t.row, t.col) += t.coeff;
    }
    return out;
}

MatExpr MatExpr::substitute(const std::vector<AffineScalar>& map) const {
    MatExpr out(constant_);
    for (const auto& t : terms_) {
        if (t.var >= static_cast<int>(map.size())) {
            throw Error(ErrorKind::MissingVariable, "no substitution for unknown " + std::to_string(t.var));
        }
        const AffineScalar& s = map[static_cast<std::size_t>(t.var)];
        out.constant_(t.row, t.col) += t.coeff * s.constant;
        for (const auto& [nv, c] : s.terms) out.terms_.push_back({nv, t.row, t.col, t.coeff * c});
    }
    out.normalize();
    return out;
}

MatExpr MatExpr::block(Eigen::Index row, Eigen::Index col, Eigen::Index nrows, Eigen::Index ncols) const {
    if (row < 0 || col < 0 || row + nrows > rows() || col + ncols > cols()) {
        throw Error(ErrorKind::DimensionMismatch, "block outside " + shape(rows(), cols()));
    }
    MatExpr out(Mat(constant_.block(row, col, nrows, ncols)));
    for (const auto& t : terms_) {
        if (t.row >= row && t.row < row + nrows && t.col >= col && t.col < col + ncols) {
            out.terms_.push_back({t.var, static_cast<int>(t.row - row), static_cast<int>(t.col - col), t.coeff});
        }
    }
    return out;
}

MatExpr operator+(const MatExpr& a, const MatExpr& b) {
    require_same_shape(a, b, "add");
    MatExpr out(Mat(a.constant_ + b.constant_));
    out.terms_ = a.terms_;
    out.terms_.insert(out.terms_.end(), b.terms_.begin(), b.terms_.end());
    out.normalize();
    return out;
}

MatExpr operator-(const MatExpr& a) { return -1.0 * a; }

MatExpr operator-(const MatExpr& a, const MatExpr& b) { return a + (-b); }

MatExpr operator*(double s, const MatExpr& a) {
    MatExpr out(Mat(s * a.constant_));
    out.terms_ = a.terms_;
    for (auto& t : out.terms_) t.coeff *= s;
    out.normalize();
    return out;
}

MatExpr operator*(const Mat& k, const MatExpr& a) {
    if (k.cols() != a.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "multiply: " + shape(k.rows(), k.cols()) + " * " + shape(a.rows(), a.cols()));
    }
    MatExpr out(Mat(k * a.constant_));
    for (const auto& t : a.terms_) {
        for (Eigen::Index r = 0; r < k.rows(); ++r) {
            const double f = k(r, t.row);
            if (f != 0.0) out.terms_.push_back({t.var, static_cast<int>(r), t.col, f * t.coeff});
        }
    }
    out.normalize();
    return out;
}

MatExpr operator*(const MatExpr& a, const Mat& k) {
    if (a.cols() != k.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "multiply: " + shape(a.rows(), a.cols()) + " * " + shape(k.rows(), k.cols()));
    }
    MatExpr out(Mat(a.constant_ * k));
    for (const auto& t : a.terms_) {
        for (Eigen::Index c = 0; c < k.cols(); ++c) {
            const double f = k(t.col, c);
            if (f != 0.0) out.terms_.push_back({t.var, t.row, static_cast<int>(c), t.coeff * f});
        }
    }
    out.normalize();
    return out;
}

MatExpr operator*(const MatExpr& a, const MatExpr& b) {
    if (!a.is_constant() && !b.is_constant()) {
        throw Error(ErrorKind::Nonaffine, "product of two decision-dependent expressions is not affine");
    }
    if (a.is_constant()) return a.constant_ * b;
    return a * b.constant_;
}

MatExpr scale(const MatExpr& scalar, const Mat& k) {
    if (scalar.rows() != 1 || scalar.cols() != 1) {
        throw Error(ErrorKind::DimensionMismatch, "scale expects a 1x1 expression, got " + shape(scalar.rows(), scalar.cols()));
    }
    std::vector<Term> terms;
    for (const auto& t : scalar.terms()) {
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
            for (Eigen::Index i = 0; i < k.rows(); ++i) {
                if (k(i, j) != 0.0) terms.push_back({t.var, static_cast<int>(i), static_cast<int>(j), t.coeff * k(i, j)});
            }
        }
    }
    return MatExpr(k.rows(), k.cols(), Mat(scalar.constant_part()(0, 0) * k), std::move(terms));
}

MatExpr block_matrix(const std::vector<std::vector<std::optional<MatExpr>>>& grid) {
    const std::size_t nr = grid.size();
    if (nr == 0) return MatExpr(Mat(0, 0));
    const std::size_t nc = grid.front().size();
    std::vector<Eigen::Index> heights(nr, -1), widths(nc, -1);
    for (std::size_t i = 0; i < nr; ++i) {
        if (grid[i].size() != nc) throw Error(ErrorKind::DimensionMismatch, "block grid rows differ in length");
        for (std::size_t j = 0; j < nc; ++j) {
            if (!grid[i][j]) continue;
            const auto r = grid[i][j]->rows();
            const auto c = grid[i][j]->cols();
            if (heights[i] >= 0 && heights[i] != r) {
                throw Error(ErrorKind::DimensionMismatch, "block row " + std::to_string(i) + " has inconsistent heights");
            }
            if (widths[j] >= 0 && widths[j] != c) {
                throw Error(ErrorKind::DimensionMismatch, "block column " + std::to_string(j) + " has inconsistent widths");
            }
            heights[i] = r;
            widths[j] = c;
        }
    }
    for (std::size_t i = 0; i < nr; ++i) {
        if (heights[i] < 0) throw Error(ErrorKind::DimensionMismatch, "block row " + std::to_string(i) + " has no sized block");
    }
    for (std::size_t j = 0; j < nc; ++j) {
        if (widths[j] < 0) throw Error(ErrorKind::DimensionMismatch, "block column " + std::to_string(j) + " has no sized block");
    }
    Eigen::Index total_r = 0, total_c = 0;
    for (auto h : heights) total_r += h;
    for (auto w : widths) total_c += w;

    Mat constant = Mat::Zero(total_r, total_c);
    std::vector<Term> terms;
    Eigen::Index r0 = 0;
    for (std::size_t i = 0; i < nr; ++i) {
        Eigen::Index c0 = 0;
        for (std::size_t j = 0; j < nc; ++j) {
            if (const auto& cell = grid[i][j]) {
                constant.block(r0, c0, heights[i], widths[j]) = cell->constant_part();
                for (const auto& t : cell->terms()) {
                    terms.push_back({t.var, static_cast<int>(t.row + r0), static_cast<int>(t.col + c0), t.coeff});
                }
            }
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    return MatExpr(total_r, total_c, std::move(constant), std::move(terms));
}

MatExpr symmetric_blocks(const std::vector<std::vector<std::optional<MatExpr>>>& upper) {
    const std::size_t n = upper.size();
    std::vector<std::vector<std::optional<MatExpr>>> grid(n, std::vector<std::optional<MatExpr>>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (upper[i].size() != n - i) {
            throw Error(ErrorKind::DimensionMismatch, "upper-triangle row " + std::to_string(i) + " has wrong length");
        }
        for (std::size_t j = i; j < n; ++j) {
            const auto& cell = upper[i][j - i];
            if (!cell) continue;
            grid[i][j] = *cell;
            if (j != i) grid[j][i] = cell->transpose();
        }
    }
    return block_matrix(grid);
}

int DecisionVar::size() const {
    switch (kind) {
    case VarKind::Scalar: return 1;
    case VarKind::Rectangular: return rows * cols;
    case VarKind::Symmetric: return rows * (rows + 1) / 2;
    }
    return 0;
}

namespace {

// Row-major upper-triangle position of (i, j), i <= j, in a symmetric n x n.
int sym_index(int n, int i, int j) {
    if (i > j) std::swap(i, j);
    return i * n - i * (i - 1) / 2 + (j - i);
}

} // namespace

MatExpr DecisionVar::expr() const {
    std::vector<Term> terms;
    switch (kind) {
    case VarKind::Scalar:
        terms.push_back({offset, 0, 0, 1.0});
        break;
    case VarKind::Rectangular:
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) terms.push_back({offset + i * cols + j, i, j, 1.0});
        }
        break;
    case VarKind::Symmetric:
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < rows; ++j) terms.push_back({offset + sym_index(rows, i, j), i, j, 1.0});
        }
        break;
    }
    return MatExpr(rows, cols, Mat::Zero(rows, cols), std::move(terms));
}

Mat DecisionVar::unpack(const Vec& v) const {
    return expr().eval(v);
}

void DecisionVar::pack(const Mat& value, Vec& v) const {
    if (value.rows() != rows || value.cols() != cols) {
        throw Error(ErrorKind::DimensionMismatch,
                    "value for " + name + " is " + shape(value.rows(), value.cols()) + ", expected " + shape(rows, cols));
    }
    switch (kind) {
    case VarKind::Scalar:
        v(offset) = value(0, 0);
        break;
    case VarKind::Rectangular:
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) v(offset + i * cols + j) = value(i, j);
        }
        break;
    case VarKind::Symmetric:
        for (int i = 0; i < rows; ++i) {
            for (int j = i; j < rows; ++j) v(offset + sym_index(rows, i, j)) = 0.5 * (value(i, j) + value(j, i));
        }
        break;
    }
}

std::string to_string(Sense s) {
    switch (s) {
    case Sense::NegDef: return "<0";
    case Sense::PosDef: return ">0";
    case Sense::NegSemidef: return "<=0";
    case Sense::PosSemidef: return ">=0";
    case Sense::Zero: return "=0";
    }
    return "?";
}

std::string to_string(VarKind k) {
    switch (k) {
    case VarKind::Scalar: return "scalar";
    case VarKind::Rectangular: return "rectangular";
    case VarKind::Symmetric: return "symmetric";
    }
    return "?";
}

int LmiProblem::num_scalars() const {
    int total = 0;
    for (const auto& v : variables) total += v.size();
    return total;
}

const DecisionVar* LmiProblem::find_variable(const std::string& var_name) const {
    for (const auto& v : variables) {
        if (v.name == var_name) return &v;
    }
    return nullptr;
}

MatExpr LmiProblem::add_variable(const std::string& var_name, VarKind kind, int rows, int cols) {
    if (find_variable(var_name)) throw Error(ErrorKind::InvalidInput, "variable " + var_name + " declared twice");
    if (rows < 0 || cols < 0) throw Error(ErrorKind::DimensionMismatch, "negative shape for " + var_name);
    if (kind == VarKind::Scalar && (rows != 1 || cols != 1)) {
        throw Error(ErrorKind::DimensionMismatch, "scalar " + var_name + " must be 1x1");
    }
    if (kind == VarKind::Symmetric && rows != cols) {
        throw Error(ErrorKind::DimensionMismatch, "symmetric " + var_name + " must be square");
    }
    DecisionVar v{var_name, kind, rows, cols, num_scalars()};
    variables.push_back(v);
    const Vec old = objective;
    objective = Vec::Zero(num_scalars());
    objective.head(old.size()) = old;
    return v.expr();
}

MatExpr LmiProblem::var(const std::string& var_name) const {
    const DecisionVar* v = find_variable(var_name);
    if (!v) throw Error(ErrorKind::MissingVariable, "no variable named " + var_name);
    return v->expr();
}

void LmiProblem::add_constraint(Constraint c) {
    const int nvars = num_scalars();
    for (const auto& t : c.expr.terms()) {
        if (t.var >= nvars) throw Error(ErrorKind::MissingVariable, c.name + " references an undeclared unknown");
    }
    if (c.expr.rows() != c.expr.cols()) {
        throw Error(ErrorKind::DimensionMismatch, c.name + " is not square: " + shape(c.expr.rows(), c.expr.cols()));
    }
    if (c.sense != Sense::Zero) {
        if (c.expr.asymmetry() > 1e-12) throw Error(ErrorKind::Internal, c.name + " is not symmetric");
        c.expr = c.expr.symmetrized();
    }
    constraints.push_back(std::move(c));
}

void LmiProblem::add_objective(const std::string& var_name, double coeff) {
    const DecisionVar* v = find_variable(var_name);
    if (!v) throw Error(ErrorKind::MissingVariable, "objective references undeclared " + var_name);
    if (v->kind != VarKind::Scalar) throw Error(ErrorKind::InvalidInput, "objective term " + var_name + " is not scalar");
    objective(v->offset) += coeff;
}

Mat LmiProblem::value(const std::string& key, const Vec& v) const {
    if (auto it = derived.find(key); it != derived.end()) return it->second.eval(v);
    if (const DecisionVar* dv = find_variable(key)) return dv->unpack(v);
    throw Error(ErrorKind::MissingVariable, "no variable or derived quantity named " + key);
}

Vec pack(const LmiProblem& problem, const Assignment& values) {
    Vec v = Vec::Zero(problem.num_scalars());
    for (const auto& dv : problem.variables) {
        auto it = values.find(dv.name);
        if (it == values.end()) throw Error(ErrorKind::MissingVariable, "assignment has no value for " + dv.name);
        dv.pack(it->second, v);
    }
    return v;
}

Assignment unpack(const LmiProblem& problem, const Vec& v) {
    Assignment out;
    for (const auto& dv : problem.variables) out[dv.name] = dv.unpack(v);
    return out;
}

bool MarginsReport::all_passed() const {
    return std::all_of(constraints.begin(), constraints.end(), [](const ConstraintMargin& c) { return c.passed; });
}

const ConstraintMargin* MarginsReport::find(const std::string& constraint_name) const {
    for (const auto& c : constraints) {
        if (c.name == constraint_name) return &c;
    }
    return nullptr;
}

MarginsReport evaluate_at(const LmiProblem& problem, const Vec& v, const MarginTolerances& tol) {
    if (v.size() != problem.num_scalars()) {
        throw Error(ErrorKind::MissingVariable, "assignment has " + std::to_string(v.size()) + " unknowns, problem has " +
                                                    std::to_string(problem.num_scalars()));
    }
    MarginsReport report;
    report.min_margin = INFINITY;
    for (const auto& c : problem.constraints) {
        ConstraintMargin m;
        m.name = c.name;
        m.sense = c.sense;
        m.shift = c.shift;
        m.value = c.expr.eval(v);
        const double size = m.value.size() ? m.value.cwiseAbs().maxCoeff() : 0.0;
        if (c.sense == Sense::Zero) {
            m.extreme = size;
            m.margin = -size;
            const double scale = c.expr.constant_part().size() ? c.expr.constant_part().cwiseAbs().maxCoeff() : 0.0;
            m.passed = size <= tol.equality * (1.0 + scale);
            report.max_equality_residual = std::max(report.max_equality_residual, size);
        } else {
            const Mat s = sym(m.value);
            const bool upper = c.sense == Sense::NegDef || c.sense == Sense::NegSemidef;
            if (s.rows() == 0) {
                m.extreme = 0.0;
                m.margin = INFINITY;
            } else if (upper) {
                m.extreme = max_eigenvalue(s);
                m.margin = -m.extreme - c.shift;
            } else {
                m.extreme = min_eigenvalue(s);
                m.margin = m.extreme - c.shift;
            }
            m.passed = m.margin >= -tol.inequality * (1.0 + size);
            report.min_margin = std::min(report.min_margin, m.margin);
        }
        report.constraints.push_back(std::move(m));
    }
    return report;
}

MarginsReport evaluate_at(const LmiProblem& problem, const Assignment& values, const MarginTolerances& tol) {
    return evaluate_at(problem, pack(problem, values), tol);
}

std::string dump(const LmiProblem& problem) {
    std::ostringstream out;
    out << "problem " << (problem.name.empty() ? "-" : problem.name) << '\n';
    for (const auto& [k, v] : problem.tags) out << "tag " << k << ' ' << v << '\n';
    for (const auto& v : problem.variables) {
        out << "var " << v.name << ' ' << to_string(v.kind) << ' ' << v.rows << ' ' << v.cols << " offset " << v.offset
            << '\n';
    }
    out << "objective";
    for (Eigen::Index i = 0; i < problem.objective.size(); ++i) {
        if (problem.objective(i) != 0.0) out << ' ' << i << ':' << fmt(problem.objective(i));
    }
    out << '\n';
    for (const auto& c : problem.constraints) {
        out << "constraint " << c.name << ' ' << to_string(c.sense) << " shift " << fmt(c.shift) << " size "
            << c.expr.rows() << '\n';
        const Mat& k = c.expr.constant_part();
        for (Eigen::Index i = 0; i < k.rows(); ++i) {
            for (Eigen::Index j = 0; j < k.cols(); ++j) {
                if (k(i, j) != 0.0) out << "  const " << i << ' ' << j << ' ' << fmt(k(i, j)) << '\n';
            }
        }
        for (const auto& t : c.expr.terms()) {
            out << "  " << t.var << ' ' << t.row << ' ' << t.col << ' ' << fmt(t.coeff) << '\n';
        }
    }
    for (const auto& b : problem.blocks) {
        out << "block " << b.name << " in " << b.constraint << " at " << b.row << ' ' << b.col << ' ' << b.rows << 'x'
            << b.cols << '\n';
    }
    return out.str();
}

} // namespace descfilter
