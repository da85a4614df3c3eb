#pragma once

#include <charconv>
#include <string>

#include "stochemb/core/error.hpp"
#include "stochemb/fieldexpr/ast.hpp"

namespace stochemb::fieldexpr {

namespace detail {

// Binding strength of the printed form of a node.
inline int precedence(const Node& n) {
    switch (n.op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        case Op::Const: return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;
        default: return 5;
    }
}

inline void print_number(std::string& out, double v) {
    if (!std::isfinite(v)) throw InvalidArgument("cannot print non-finite constant");
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

inline void print(std::string& out, const NodePtr& n);

inline void print_child(std::string& out, const NodePtr& child, int min_prec) {
    if (precedence(*child) < min_prec) {
        out += '(';
        print(out, child);
        out += ')';
    } else {
        print(out, child);
    }
}

inline void print(std::string& out, const NodePtr& n) {
    switch (n->op) {
        case Op::Const: print_number(out, n->value); return;
        case Op::Var:
            if (n->index == 0)
                out += 't';
            else
                out += "x" + std::to_string(n->index);
            return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            const int p = precedence(*n);
            print_child(out, n->a, p);
            out += n->op == Op::Add ? " + " : n->op == Op::Sub ? " - " : n->op == Op::Mul ? "*" : "/";
            print_child(out, n->b, p + 1);
            return;
        }
        case Op::Neg:
            out += '-';
            print_child(out, n->a, 4);
            return;
        case Op::Pow:
            print_child(out, n->a, 5);
            out += '^';
            out += std::to_string(n->index);
            return;
        case Op::Call:
            out += func_name(n->func);
            out += '(';
            print(out, n->a);
            out += ')';
            return;
    }
}

}  // namespace detail

/// Text form that parses back to a structurally equal tree.
inline std::string to_string(const NodePtr& n) {
    std::string out;
    detail::print(out, n);
    return out;
}

}  // namespace stochemb::fieldexpr
