#pragma once

#include "stochemb/fieldexpr/ast.hpp"

namespace stochemb::fieldexpr {

/// Symbolic partial derivative with respect to variable k (0 = t, i = x_i).
inline NodePtr differentiate(const NodePtr& n, int k) {
    if (!depends_on(n, k)) return constant(0.0);
    switch (n->op) {
        case Op::Const: return constant(0.0);
        case Op::Var: return constant(n->index == k ? 1.0 : 0.0);
        case Op::Add: return add(differentiate(n->a, k), differentiate(n->b, k));
        case Op::Sub: return sub(differentiate(n->a, k), differentiate(n->b, k));
        case Op::Mul:
            return add(mul(differentiate(n->a, k), n->b), mul(n->a, differentiate(n->b, k)));
        case Op::Div: {
            // (a/b)' = a'/b - a b' / b^2
            NodePtr da = differentiate(n->a, k);
            NodePtr db = differentiate(n->b, k);
            return sub(div(da, n->b), div(mul(n->a, db), pow(n->b, 2)));
        }
        case Op::Neg: return neg(differentiate(n->a, k));
        case Op::Pow: {
            const int e = n->index;
            return mul(mul(constant(static_cast<double>(e)), pow(n->a, e - 1)), differentiate(n->a, k));
        }
        case Op::Call: {
            NodePtr da = differentiate(n->a, k);
            switch (n->func) {
                case Func::Exp: return mul(n, da);
                case Func::Log: return div(da, n->a);
                case Func::Sin: return mul(call(Func::Cos, n->a), da);
                case Func::Cos: return neg(mul(call(Func::Sin, n->a), da));
                case Func::Sqrt: return div(da, mul(constant(2.0), n));
                // d|a| = sign(a) a' written as a a' / |a|; undefined at a = 0.
                case Func::Abs: return div(mul(n->a, da), n);
            }
        }
    }
    return constant(0.0);
}

}  // namespace stochemb::fieldexpr
