#pragma once

// Postfix bytecode for fast repeated evaluation of an expression tree, both on
// plain doubles and on second-order jets.

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/jet.hpp"
#include "stochemb/fieldexpr/ast.hpp"

namespace stochemb::fieldexpr {

struct Instr {
    Op op;
    Func func = Func::Exp;
    int index = 0;
    double value = 0.0;
};

class Program {
public:
    Program() = default;
    explicit Program(const NodePtr& root) {
        int depth = 0;
        emit(root, depth);
    }

    int max_depth() const { return max_depth_; }
    const std::vector<Instr>& code() const { return code_; }

    template <class T>
    T run(const T& t, std::span<const T> x) const {
        constexpr int kInline = 32;
        if (max_depth_ <= kInline) {
            std::array<T, kInline> stack;
            return execute<T>(stack.data(), t, x);
        }
        std::vector<T> stack(static_cast<std::size_t>(max_depth_));
        return execute<T>(stack.data(), t, x);
    }

private:
    std::vector<Instr> code_;
    int max_depth_ = 0;

    void emit(const NodePtr& n, int& depth) {
        switch (n->op) {
            case Op::Const:
            case Op::Var:
                code_.push_back({n->op, Func::Exp, n->index, n->value});
                bump(depth, 1);
                return;
            case Op::Neg:
            case Op::Pow:
            case Op::Call:
                emit(n->a, depth);
                code_.push_back({n->op, n->func, n->index, 0.0});
                return;
            default:
                emit(n->a, depth);
                emit(n->b, depth);
                code_.push_back({n->op, Func::Exp, 0, 0.0});
                --depth;
                return;
        }
    }

    void bump(int& depth, int k) {
        depth += k;
        if (depth > max_depth_) max_depth_ = depth;
    }

    [[noreturn]] static void domain(const std::string& what) { throw DomainError(what); }

    template <class T>
    T execute(T* s, const T& t, std::span<const T> x) const {
        using std::cos;
        using std::exp;
        using std::log;
        using std::sin;
        using std::sqrt;
        int top = -1;
        for (const Instr& in : code_) {
            switch (in.op) {
                case Op::Const: s[++top] = T(in.value); break;
                case Op::Var:
                    if (in.index == 0)
                        s[++top] = t;
                    else {
                        if (static_cast<std::size_t>(in.index) > x.size()) domain("variable x" + std::to_string(in.index) + " not supplied");
                        s[++top] = x[static_cast<std::size_t>(in.index - 1)];
                    }
                    break;
                case Op::Add: s[top - 1] = s[top - 1] + s[top]; --top; break;
                case Op::Sub: s[top - 1] = s[top - 1] - s[top]; --top; break;
                case Op::Mul: s[top - 1] = s[top - 1] * s[top]; --top; break;
                case Op::Div:
                    if (value_of(s[top]) == 0.0) domain("division by zero");
                    s[top - 1] = s[top - 1] / s[top];
                    --top;
                    break;
                case Op::Neg: s[top] = -s[top]; break;
                case Op::Pow:
                    if (in.index < 0 && value_of(s[top]) == 0.0) domain("zero raised to a negative power");
                    s[top] = powi(s[top], in.index);
                    break;
                case Op::Call: {
                    T& a = s[top];
                    const double v = value_of(a);
                    switch (in.func) {
                        case Func::Exp: a = exp(a); break;
                        case Func::Log:
                            if (!(v > 0.0)) domain("log of nonpositive value");
                            a = log(a);
                            break;
                        case Func::Sin: a = sin(a); break;
                        case Func::Cos: a = cos(a); break;
                        case Func::Sqrt:
                            if (v < 0.0) domain("sqrt of negative value");
                            if constexpr (!std::is_same_v<T, double>) {
                                if (v == 0.0) domain("sqrt is not differentiable at 0");
                            }
                            a = sqrt(a);
                            break;
                        case Func::Abs: a = abs_of(a); break;
                    }
                    break;
                }
            }
        }
        if (!std::isfinite(value_of(s[0]))) domain("non-finite value");
        return s[0];
    }

    static double abs_of(double a) { return std::abs(a); }
    static Jet abs_of(const Jet& a) { return stochemb::abs(a); }
};

}  // namespace stochemb::fieldexpr
