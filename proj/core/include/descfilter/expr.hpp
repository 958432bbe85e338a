#pragma once

// Vector-valued scalar expressions over x1..xn, u1..um and t, used to
// describe the plant nonlinearities, disturbances and inputs.
//
// Grammar (';' separates components, '#' starts a comment):
//   list    := expr (';' expr)* [';']
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ['^' ['-'] integer]
//   primary := number | 'x'k | 'u'k | 't' | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | tan | exp | ln | tanh | abs

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "descfilter/linalg.hpp"

namespace descfilter {

enum class Op {
    Const, VarX, VarU, Time,
    Add, Sub, Mul, Div, Neg,
    Sin, Cos, Tan, Exp, Ln, Tanh, Abs, Sign,
    PowInt,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op = Op::Const;
    double value = 0.0;  // Const
    int index = 0;       // 0-based variable index, or the exponent for PowInt
    NodePtr lhs;
    NodePtr rhs;
};

inline constexpr std::size_t kMaxExprNodes = 100'000;
inline constexpr int kMaxExprDepth = 512;

// Node factories fold constants and drop neutral elements.
NodePtr constant(double v);
NodePtr var_x(int index);
NodePtr var_u(int index);
NodePtr time_var();
NodePtr add(NodePtr a, NodePtr b);
NodePtr sub(NodePtr a, NodePtr b);
NodePtr mul(NodePtr a, NodePtr b);
NodePtr divide(NodePtr a, NodePtr b);
NodePtr negate(NodePtr a);
NodePtr apply(Op fn, NodePtr a);
NodePtr pow_int(NodePtr a, int k);

[[nodiscard]] bool is_constant(const NodePtr& n, double v);
[[nodiscard]] std::size_t node_count(const NodePtr& n);
[[nodiscard]] std::string to_string(const NodePtr& n);

// d(node)/d(x_index)
[[nodiscard]] NodePtr differentiate(const NodePtr& node, int x_index);

/// Immutable vector of expressions with its symbolic Jacobian with respect
/// to x precomputed at construction. Safe to share across threads.
class VectorExpr {
public:
    VectorExpr() = default;
    VectorExpr(std::vector<NodePtr> components, int n, int m);

    static VectorExpr zero(int components, int n, int m);

    [[nodiscard]] int size() const noexcept { return static_cast<int>(components_.size()); }
    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] int m() const noexcept { return m_; }
    [[nodiscard]] const NodePtr& component(int i) const { return components_.at(static_cast<std::size_t>(i)); }
    [[nodiscard]] const NodePtr& derivative(int i, int j) const;
    [[nodiscard]] bool structurally_zero() const;
    [[nodiscard]] bool depends_on_time() const;
    [[nodiscard]] std::string source() const;

    [[nodiscard]] Vec eval(const Vec& x, const Vec& u, double t) const;
    [[nodiscard]] Mat jacobian_x(const Vec& x, const Vec& u, double t) const;

private:
    void check_dims(const Vec& x, const Vec& u) const;

    std::vector<NodePtr> components_;
    std::vector<NodePtr> jacobian_;  // row-major, size() x n
    int n_ = 0;
    int m_ = 0;
};

// Throws ParseError (Syntax, UnknownIdentifier or ArityMismatch).
[[nodiscard]] VectorExpr parse_expr(std::string_view source, int n, int m);

[[nodiscard]] double eval_node(const NodePtr& node, const Vec& x, const Vec& u, double t);

struct Box {
    Vec lower;
    Vec upper;
};

struct LipschitzEstimate {
    double gamma_hat = 0.0;
    Box box;
    std::size_t samples = 0;
};

/// Largest spectral norm of the x-Jacobian over a uniform grid with
/// grid_per_dim points per axis (endpoints included). This is a lower bound
/// on the Lipschitz constant over the box.
[[nodiscard]] LipschitzEstimate estimate_lipschitz(const VectorExpr& f, const Box& box, int grid_per_dim,
                                                   const Vec& u = {}, double t = 0.0);

// eval(f, 0, u, t) == 0 within tol (infinity norm).
[[nodiscard]] bool vanishes_at_origin(const VectorExpr& f, const Vec& u, double t, double tol = 1e-12);

} // namespace descfilter
