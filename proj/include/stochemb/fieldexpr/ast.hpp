#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string_view>

namespace stochemb::fieldexpr {

enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Call };

enum class Func { Exp, Log, Sin, Cos, Sqrt, Abs };

inline std::string_view func_name(Func f) {
    switch (f) {
        case Func::Exp: return "exp";
        case Func::Log: return "log";
        case Func::Sin: return "sin";
        case Func::Cos: return "cos";
        case Func::Sqrt: return "sqrt";
        case Func::Abs: return "abs";
    }
    return "?";
}

struct Node;
using NodePtr = std::shared_ptr<const Node>;

/// Immutable expression tree node. Variable index 0 is t, index i >= 1 is x_i.
struct Node {
    Op op = Op::Const;
    double value = 0.0;  // Const
    int index = 0;       // Var: variable index; Pow: integer exponent
    Func func = Func::Exp;
    NodePtr a;
    NodePtr b;
};

// Raw constructors build exactly the requested node. The parser uses these so
// that printing and re-parsing reproduces the same tree.
namespace raw {
inline NodePtr constant(double v) { return std::make_shared<const Node>(Node{Op::Const, v, 0, Func::Exp, {}, {}}); }
inline NodePtr var(int i) { return std::make_shared<const Node>(Node{Op::Var, 0.0, i, Func::Exp, {}, {}}); }
inline NodePtr binary(Op op, NodePtr a, NodePtr b) {
    return std::make_shared<const Node>(Node{op, 0.0, 0, Func::Exp, std::move(a), std::move(b)});
}
inline NodePtr neg(NodePtr a) { return std::make_shared<const Node>(Node{Op::Neg, 0.0, 0, Func::Exp, std::move(a), {}}); }
inline NodePtr pow(NodePtr a, int n) {
    return std::make_shared<const Node>(Node{Op::Pow, 0.0, n, Func::Exp, std::move(a), {}});
}
inline NodePtr call(Func f, NodePtr a) {
    return std::make_shared<const Node>(Node{Op::Call, 0.0, 0, f, std::move(a), {}});
}
}  // namespace raw

inline bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }
inline bool is_const(const NodePtr& n) { return n->op == Op::Const; }

// Folding constructors used by the differentiator. They remove identities
// (x + 0, x * 1, x * 0, ...) so derivative trees stay small; no further
// rewriting is attempted.
inline NodePtr constant(double v) { return raw::constant(v); }
inline NodePtr var(int i) { return raw::var(i); }

inline NodePtr neg(NodePtr a) {
    if (is_const(a)) return constant(-a->value);
    if (a->op == Op::Neg) return a->a;
    return raw::neg(std::move(a));
}

inline NodePtr add(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return constant(a->value + b->value);
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    return raw::binary(Op::Add, std::move(a), std::move(b));
}

inline NodePtr sub(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return constant(a->value - b->value);
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return neg(std::move(b));
    return raw::binary(Op::Sub, std::move(a), std::move(b));
}

inline NodePtr mul(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return constant(a->value * b->value);
    if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    if (is_const(a, -1.0)) return neg(std::move(b));
    if (is_const(b, -1.0)) return neg(std::move(a));
    return raw::binary(Op::Mul, std::move(a), std::move(b));
}

inline NodePtr div(NodePtr a, NodePtr b) {
    if (is_const(a, 0.0) && !is_const(b, 0.0)) return constant(0.0);
    if (is_const(b, 1.0)) return a;
    if (is_const(a) && is_const(b) && b->value != 0.0) return constant(a->value / b->value);
    return raw::binary(Op::Div, std::move(a), std::move(b));
}

inline NodePtr pow(NodePtr a, int n) {
    if (n == 0) return constant(1.0);
    if (n == 1) return a;
    if (is_const(a) && (a->value != 0.0 || n > 0)) return constant(std::pow(a->value, n));
    return raw::pow(std::move(a), n);
}

inline NodePtr call(Func f, NodePtr a) { return raw::call(f, std::move(a)); }

/// Structural equality of two trees.
inline bool equal(const NodePtr& x, const NodePtr& y) {
    if (x == y) return true;
    if (!x || !y) return false;
    if (x->op != y->op) return false;
    switch (x->op) {
        case Op::Const: return x->value == y->value || (std::isnan(x->value) && std::isnan(y->value));
        case Op::Var: return x->index == y->index;
        case Op::Neg: return equal(x->a, y->a);
        case Op::Pow: return x->index == y->index && equal(x->a, y->a);
        case Op::Call: return x->func == y->func && equal(x->a, y->a);
        default: return equal(x->a, y->a) && equal(x->b, y->b);
    }
}

/// Largest variable index referenced by the tree (-1 if none).
inline int max_var_index(const NodePtr& n) {
    if (!n) return -1;
    if (n->op == Op::Var) return n->index;
    if (n->op == Op::Const) return -1;
    int m = max_var_index(n->a);
    if (n->b) m = std::max(m, max_var_index(n->b));
    return m;
}

inline bool depends_on(const NodePtr& n, int var_index) {
    if (!n) return false;
    if (n->op == Op::Var) return n->index == var_index;
    if (n->op == Op::Const) return false;
    return depends_on(n->a, var_index) || (n->b && depends_on(n->b, var_index));
}

}  // namespace stochemb::fieldexpr
