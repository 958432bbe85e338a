#include "descfilter/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "descfilter/error.hpp"

namespace descfilter {

namespace {

NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr, double value = 0.0, int index = 0) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    n->value = value;
    n->index = index;
    return n;
}

bool is_const(const NodePtr& n) { return n->op == Op::Const; }

double apply_fn(Op fn, double a) {
    switch (fn) {
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Tan: return std::tan(a);
    case Op::Exp: return std::exp(a);
    case Op::Ln: return std::log(a);
    case Op::Tanh: return std::tanh(a);
    case Op::Abs: return std::abs(a);
    case Op::Sign: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
    default: break;
    }
    throw Error(ErrorKind::Internal, "not a unary function");
}

bool is_function(Op op) {
    switch (op) {
    case Op::Sin: case Op::Cos: case Op::Tan: case Op::Exp:
    case Op::Ln: case Op::Tanh: case Op::Abs: case Op::Sign:
        return true;
    default:
        return false;
    }
}

const char* fn_name(Op op) {
    switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tan: return "tan";
    case Op::Exp: return "exp";
    case Op::Ln: return "ln";
    case Op::Tanh: return "tanh";
    case Op::Abs: return "abs";
    case Op::Sign: return "sign";
    default: return "?";
    }
}

} // namespace

NodePtr constant(double v) { return make(Op::Const, nullptr, nullptr, v); }
NodePtr var_x(int index) { return make(Op::VarX, nullptr, nullptr, 0.0, index); }
NodePtr var_u(int index) { return make(Op::VarU, nullptr, nullptr, 0.0, index); }
NodePtr time_var() { return make(Op::Time); }

bool is_constant(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

NodePtr add(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return constant(a->value + b->value);
    if (is_constant(a, 0.0)) return b;
    if (is_constant(b, 0.0)) return a;
    return make(Op::Add, std::move(a), std::move(b));
}

NodePtr sub(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return constant(a->value - b->value);
    if (is_constant(b, 0.0)) return a;
    if (is_constant(a, 0.0)) return negate(std::move(b));
    return make(Op::Sub, std::move(a), std::move(b));
}

NodePtr mul(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return constant(a->value * b->value);
    if (is_constant(a, 0.0) || is_constant(b, 0.0)) return constant(0.0);
    if (is_constant(a, 1.0)) return b;
    if (is_constant(b, 1.0)) return a;
    if (is_constant(a, -1.0)) return negate(std::move(b));
    if (is_constant(b, -1.0)) return negate(std::move(a));
    return make(Op::Mul, std::move(a), std::move(b));
}

NodePtr divide(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b) && b->value != 0.0) return constant(a->value / b->value);
    if (is_constant(a, 0.0) && !is_constant(b, 0.0)) return constant(0.0);
    if (is_constant(b, 1.0)) return a;
    return make(Op::Div, std::move(a), std::move(b));
}

NodePtr negate(NodePtr a) {
    if (is_const(a)) return constant(-a->value);
    if (a->op == Op::Neg) return a->lhs;
    return make(Op::Neg, std::move(a));
}

NodePtr apply(Op fn, NodePtr a) {
    if (!is_function(fn)) throw Error(ErrorKind::Internal, "apply() needs a unary function");
    if (is_const(a)) {
        const double v = apply_fn(fn, a->value);
        if (std::isfinite(v)) return constant(v);
    }
    return make(fn, std::move(a));
}

NodePtr pow_int(NodePtr a, int k) {
    if (k == 0) return constant(1.0);
    if (k == 1) return a;
    if (is_const(a)) {
        const double v = std::pow(a->value, k);
        if (std::isfinite(v)) return constant(v);
    }
    return make(Op::PowInt, std::move(a), nullptr, 0.0, k);
}

std::size_t node_count(const NodePtr& n) {
    if (!n) return 0;
    return 1 + node_count(n->lhs) + node_count(n->rhs);
}

std::string to_string(const NodePtr& n) {
    std::ostringstream os;
    os.precision(17);
    switch (n->op) {
    case Op::Const: os << n->value; break;
    case Op::VarX: os << 'x' << n->index + 1; break;
    case Op::VarU: os << 'u' << n->index + 1; break;
    case Op::Time: os << 't'; break;
    case Op::Add: os << '(' << to_string(n->lhs) << " + " << to_string(n->rhs) << ')'; break;
    case Op::Sub: os << '(' << to_string(n->lhs) << " - " << to_string(n->rhs) << ')'; break;
    case Op::Mul: os << '(' << to_string(n->lhs) << " * " << to_string(n->rhs) << ')'; break;
    case Op::Div: os << '(' << to_string(n->lhs) << " / " << to_string(n->rhs) << ')'; break;
    case Op::Neg: os << "(-" << to_string(n->lhs) << ')'; break;
    case Op::PowInt: os << '(' << to_string(n->lhs) << ")^" << n->index; break;
    default: os << fn_name(n->op) << '(' << to_string(n->lhs) << ')'; break;
    }
    return os.str();
}

NodePtr differentiate(const NodePtr& n, int j) {
    switch (n->op) {
    case Op::Const:
    case Op::VarU:
    case Op::Time:
        return constant(0.0);
    case Op::VarX:
        return constant(n->index == j ? 1.0 : 0.0);
    case Op::Add:
        return add(differentiate(n->lhs, j), differentiate(n->rhs, j));
    case Op::Sub:
        return sub(differentiate(n->lhs, j), differentiate(n->rhs, j));
    case Op::Mul:
        return add(mul(differentiate(n->lhs, j), n->rhs), mul(n->lhs, differentiate(n->rhs, j)));
    case Op::Div: {
        auto df = differentiate(n->lhs, j);
        auto dg = differentiate(n->rhs, j);
        if (is_constant(dg, 0.0)) return divide(df, n->rhs);
        return divide(sub(mul(df, n->rhs), mul(n->lhs, dg)), pow_int(n->rhs, 2));
    }
    case Op::Neg:
        return negate(differentiate(n->lhs, j));
    case Op::PowInt: {
        const int k = n->index;
        return mul(mul(constant(k), pow_int(n->lhs, k - 1)), differentiate(n->lhs, j));
    }
    case Op::Sin:
        return mul(apply(Op::Cos, n->lhs), differentiate(n->lhs, j));
    case Op::Cos:
        return mul(negate(apply(Op::Sin, n->lhs)), differentiate(n->lhs, j));
    case Op::Tan:
        return mul(add(constant(1.0), pow_int(n, 2)), differentiate(n->lhs, j));
    case Op::Exp:
        return mul(n, differentiate(n->lhs, j));
    case Op::Ln:
        return divide(differentiate(n->lhs, j), n->lhs);
    case Op::Tanh:
        return mul(sub(constant(1.0), pow_int(n, 2)), differentiate(n->lhs, j));
    case Op::Abs:
        return mul(apply(Op::Sign, n->lhs), differentiate(n->lhs, j));
    case Op::Sign:
        return constant(0.0);
    }
    throw Error(ErrorKind::Internal, "unhandled node in differentiate");
}

double eval_node(const NodePtr& n, const Vec& x, const Vec& u, double t) {
    switch (n->op) {
    case Op::Const: return n->value;
    case Op::VarX: return x(n->index);
    case Op::VarU: return u(n->index);
    case Op::Time: return t;
    case Op::Add: return eval_node(n->lhs, x, u, t) + eval_node(n->rhs, x, u, t);
    case Op::Sub: return eval_node(n->lhs, x, u, t) - eval_node(n->rhs, x, u, t);
    case Op::Mul: return eval_node(n->lhs, x, u, t) * eval_node(n->rhs, x, u, t);
    case Op::Div: {
        const double den = eval_node(n->rhs, x, u, t);
        if (den == 0.0) throw Error(ErrorKind::Evaluation, "division by zero");
        return eval_node(n->lhs, x, u, t) / den;
    }
    case Op::Neg: return -eval_node(n->lhs, x, u, t);
    case Op::PowInt: {
        const double base = eval_node(n->lhs, x, u, t);
        if (base == 0.0 && n->index < 0) throw Error(ErrorKind::Evaluation, "zero raised to a negative power");
        return std::pow(base, n->index);
    }
    case Op::Ln: {
        const double a = eval_node(n->lhs, x, u, t);
        if (!(a > 0.0)) throw Error(ErrorKind::Evaluation, "ln of a nonpositive value");
        return std::log(a);
    }
    default:
        return apply_fn(n->op, eval_node(n->lhs, x, u, t));
    }
}

// ---------------------------------------------------------------------------
// VectorExpr

VectorExpr::VectorExpr(std::vector<NodePtr> components, int n, int m)
    : components_(std::move(components)), n_(n), m_(m) {
    if (n < 0 || m < 0) throw Error(ErrorKind::InvalidInput, "negative expression dimensions");
    jacobian_.reserve(components_.size() * static_cast<std::size_t>(n));
    for (const auto& c : components_)
        for (int j = 0; j < n; ++j) jacobian_.push_back(differentiate(c, j));
}

VectorExpr VectorExpr::zero(int components, int n, int m) {
    return VectorExpr(std::vector<NodePtr>(static_cast<std::size_t>(components), constant(0.0)), n, m);
}

const NodePtr& VectorExpr::derivative(int i, int j) const {
    return jacobian_.at(static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j));
}

bool VectorExpr::structurally_zero() const {
    for (const auto& c : components_)
        if (!is_constant(c, 0.0)) return false;
    return true;
}

bool VectorExpr::depends_on_time() const {
    const auto walk = [](const auto& self, const NodePtr& n) -> bool {
        if (!n) return false;
        if (n->op == Op::Time) return true;
        return self(self, n->lhs) || self(self, n->rhs);
    };
    for (const auto& c : components_)
        if (walk(walk, c)) return true;
    return false;
}

std::string VectorExpr::source() const {
    std::string out;
    for (std::size_t i = 0; i < components_.size(); ++i) {
        if (i) out += "; ";
        out += to_string(components_[i]);
    }
    return out;
}

void VectorExpr::check_dims(const Vec& x, const Vec& u) const {
    if (x.size() != n_) throw Error(ErrorKind::DimensionMismatch, "x has wrong length for expression");
    // An empty u stands for the zero input.
    if (u.size() != m_ && u.size() != 0) throw Error(ErrorKind::DimensionMismatch, "u has wrong length for expression");
}

Vec VectorExpr::eval(const Vec& x, const Vec& u, double t) const {
    check_dims(x, u);
    const Vec uu = u.size() == m_ ? u : Vec::Zero(m_);
    Vec out(size());
    for (int i = 0; i < size(); ++i) {
        out(i) = eval_node(components_[static_cast<std::size_t>(i)], x, uu, t);
        if (!std::isfinite(out(i)))
            throw Error(ErrorKind::Evaluation, "non-finite value in component " + std::to_string(i + 1));
    }
    return out;
}

Mat VectorExpr::jacobian_x(const Vec& x, const Vec& u, double t) const {
    check_dims(x, u);
    const Vec uu = u.size() == m_ ? u : Vec::Zero(m_);
    Mat out(size(), n_);
    for (int i = 0; i < size(); ++i)
        for (int j = 0; j < n_; ++j) {
            out(i, j) = eval_node(derivative(i, j), x, uu, t);
            if (!std::isfinite(out(i, j))) throw Error(ErrorKind::Evaluation, "non-finite Jacobian entry");
        }
    return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, Semi, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0.0;
    int line = 1;
    int column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_space();
        Token tok;
        tok.line = line_;
        tok.column = col_;
        if (pos_ >= src_.size()) return tok;
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos_ + 1 < src_.size() &&
                                                            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            return lex_number(tok);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) advance();
            tok.kind = Tok::Ident;
            tok.text = std::string(src_.substr(start, pos_ - start));
            return tok;
        }
        advance();
        tok.text = std::string(1, c);
        switch (c) {
        case '+': tok.kind = Tok::Plus; break;
        case '-': tok.kind = Tok::Minus; break;
        case '*': tok.kind = Tok::Star; break;
        case '/': tok.kind = Tok::Slash; break;
        case '^': tok.kind = Tok::Caret; break;
        case '(': tok.kind = Tok::LParen; break;
        case ')': tok.kind = Tok::RParen; break;
        case ',': tok.kind = Tok::Comma; break;
        case ';': tok.kind = Tok::Semi; break;
        default:
            throw ParseError(ErrorKind::Syntax, std::string("unexpected character '") + c + "'", tok.line, tok.column);
        }
        return tok;
    }

private:
    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    Token lex_number(Token tok) {
        const std::size_t start = pos_;
        const auto digits = [&] {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        };
        digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            advance();
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            const std::size_t save = pos_;
            const int save_col = col_;
            advance();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                digits();
            } else {
                pos_ = save;
                col_ = save_col;
            }
        }
        tok.kind = Tok::Number;
        tok.text = std::string(src_.substr(start, pos_ - start));
        tok.number = std::strtod(tok.text.c_str(), nullptr);
        return tok;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    Parser(std::string_view src, int n, int m) : lex_(src), n_(n), m_(m) { cur_ = lex_.next(); }

    std::vector<NodePtr> parse_list() {
        std::vector<NodePtr> out;
        if (cur_.kind == Tok::End) fail(ErrorKind::Syntax, "empty expression");
        out.push_back(parse_expr());
        while (cur_.kind == Tok::Semi) {
            eat();
            if (cur_.kind == Tok::End) break;
            out.push_back(parse_expr());
        }
        if (cur_.kind != Tok::End) fail(ErrorKind::Syntax, "unexpected '" + cur_.text + "'");
        return out;
    }

private:
    [[noreturn]] void fail(ErrorKind kind, const std::string& msg) const {
        throw ParseError(kind, msg, cur_.line, cur_.column);
    }

    void eat() { cur_ = lex_.next(); }

    void expect(Tok kind, const char* what) {
        if (cur_.kind != kind) fail(ErrorKind::Syntax, std::string("expected ") + what);
        eat();
    }

    NodePtr count(NodePtr n) {
        if (++nodes_ > kMaxExprNodes) fail(ErrorKind::Syntax, "expression exceeds node limit");
        return n;
    }

    struct DepthGuard {
        explicit DepthGuard(Parser& p) : p_(p) {
            if (++p_.depth_ > kMaxExprDepth) p_.fail(ErrorKind::Syntax, "expression nested too deeply");
        }
        ~DepthGuard() { --p_.depth_; }
        Parser& p_;
    };

    NodePtr parse_expr() {
        DepthGuard guard(*this);
        NodePtr lhs = parse_term();
        while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
            const bool plus = cur_.kind == Tok::Plus;
            eat();
            NodePtr rhs = parse_term();
            lhs = count(plus ? add(lhs, rhs) : sub(lhs, rhs));
        }
        return lhs;
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
            const bool times = cur_.kind == Tok::Star;
            eat();
            NodePtr rhs = parse_unary();
            lhs = count(times ? mul(lhs, rhs) : divide(lhs, rhs));
        }
        return lhs;
    }

    NodePtr parse_unary() {
        DepthGuard guard(*this);
        if (cur_.kind == Tok::Minus) {
            eat();
            return count(negate(parse_unary()));
        }
        if (cur_.kind == Tok::Plus) {
            eat();
            return parse_unary();
        }
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (cur_.kind != Tok::Caret) return base;
        eat();
        int sign = 1;
        if (cur_.kind == Tok::Minus || cur_.kind == Tok::Plus) {
            sign = cur_.kind == Tok::Minus ? -1 : 1;
            eat();
        }
        if (cur_.kind != Tok::Number) fail(ErrorKind::Syntax, "exponent must be an integer literal");
        int k = 0;
        const auto* first = cur_.text.data();
        const auto* last = first + cur_.text.size();
        const auto [ptr, ec] = std::from_chars(first, last, k);
        if (ec != std::errc{} || ptr != last) fail(ErrorKind::Syntax, "exponent must be an integer literal");
        eat();
        return count(pow_int(base, sign * k));
    }

    NodePtr parse_primary() {
        if (cur_.kind == Tok::Number) {
            const double v = cur_.number;
            eat();
            return count(constant(v));
        }
        if (cur_.kind == Tok::LParen) {
            eat();
            NodePtr inner = parse_expr();
            expect(Tok::RParen, "')'");
            return inner;
        }
        if (cur_.kind == Tok::Ident) return parse_identifier();
        if (cur_.kind == Tok::End) fail(ErrorKind::Syntax, "unexpected end of expression");
        fail(ErrorKind::Syntax, "unexpected '" + cur_.text + "'");
    }

    static bool function_op(const std::string& name, Op& op) {
        static const std::pair<const char*, Op> table[] = {
            {"sin", Op::Sin}, {"cos", Op::Cos}, {"tan", Op::Tan}, {"exp", Op::Exp},
            {"ln", Op::Ln}, {"tanh", Op::Tanh}, {"abs", Op::Abs},
        };
        for (const auto& [n, o] : table) {
            if (name == n) {
                op = o;
                return true;
            }
        }
        return false;
    }

    NodePtr parse_identifier() {
        const Token tok = cur_;
        eat();
        Op fn{};
        if (function_op(tok.text, fn)) {
            if (cur_.kind != Tok::LParen)
                throw ParseError(ErrorKind::Syntax, "function '" + tok.text + "' needs '('", tok.line, tok.column);
            eat();
            std::vector<NodePtr> args;
            if (cur_.kind != Tok::RParen) {
                args.push_back(parse_expr());
                while (cur_.kind == Tok::Comma) {
                    eat();
                    args.push_back(parse_expr());
                }
            }
            expect(Tok::RParen, "')'");
            if (args.size() != 1)
                throw ParseError(ErrorKind::ArityMismatch,
                                 "function '" + tok.text + "' takes 1 argument, got " + std::to_string(args.size()),
                                 tok.line, tok.column);
            return count(apply(fn, args.front()));
        }
        NodePtr leaf = variable(tok);
        if (cur_.kind == Tok::LParen)
            throw ParseError(ErrorKind::ArityMismatch, "'" + tok.text + "' is not a function", tok.line, tok.column);
        return count(leaf);
    }

    NodePtr variable(const Token& tok) const {
        const std::string& s = tok.text;
        if (s == "t") return time_var();
        if (s.size() >= 2 && (s[0] == 'x' || s[0] == 'u')) {
            int k = 0;
            const auto [ptr, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), k);
            if (ec == std::errc{} && ptr == s.data() + s.size() && s[1] != '0') {
                const int limit = s[0] == 'x' ? n_ : m_;
                if (k >= 1 && k <= limit) return s[0] == 'x' ? var_x(k - 1) : var_u(k - 1);
                throw ParseError(ErrorKind::UnknownIdentifier,
                                 "'" + s + "' is out of range (" + s[0] + " has dimension " + std::to_string(limit) + ")",
                                 tok.line, tok.column);
            }
        }
        throw ParseError(ErrorKind::UnknownIdentifier, "unknown identifier '" + s + "'", tok.line, tok.column);
    }

    Lexer lex_;
    Token cur_;
    int n_;
    int m_;
    std::size_t nodes_ = 0;
    int depth_ = 0;
};

} // namespace

VectorExpr parse_expr(std::string_view source, int n, int m) {
    Parser p(source, n, m);
    return VectorExpr(p.parse_list(), n, m);
}

LipschitzEstimate estimate_lipschitz(const VectorExpr& f, const Box& box, int grid_per_dim, const Vec& u, double t) {
    const int n = f.n();
    if (grid_per_dim < 2) throw Error(ErrorKind::InvalidInput, "grid_per_dim must be at least 2");
    if (box.lower.size() != n || box.upper.size() != n)
        throw Error(ErrorKind::DimensionMismatch, "Lipschitz box must have one interval per state");
    if (!box.lower.allFinite() || !box.upper.allFinite() || (box.upper.array() < box.lower.array()).any())
        throw Error(ErrorKind::InvalidInput, "Lipschitz box must be finite with lower <= upper");
    double total = 1.0;
    for (int i = 0; i < n; ++i) total *= grid_per_dim;
    if (total > 5e7) throw Error(ErrorKind::InvalidInput, "Lipschitz grid too large");

    const Vec uu = u.size() == f.m() ? u : Vec::Zero(f.m());
    LipschitzEstimate est;
    est.box = box;
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    Vec x(n);
    while (true) {
        for (int i = 0; i < n; ++i) {
            const double frac = static_cast<double>(idx[static_cast<std::size_t>(i)]) / (grid_per_dim - 1);
            x(i) = box.lower(i) + frac * (box.upper(i) - box.lower(i));
        }
        est.gamma_hat = std::max(est.gamma_hat, spectral_norm(f.jacobian_x(x, uu, t)));
        ++est.samples;
        int d = 0;
        while (d < n && ++idx[static_cast<std::size_t>(d)] == grid_per_dim) idx[static_cast<std::size_t>(d++)] = 0;
        if (d == n) break;
    }
    return est;
}

bool vanishes_at_origin(const VectorExpr& f, const Vec& u, double t, double tol) {
    if (f.size() == 0) return true;
    const Vec v = f.eval(Vec::Zero(f.n()), u, t);
    return v.lpNorm<Eigen::Infinity>() <= tol;
}

} // namespace descfilter
