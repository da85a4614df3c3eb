#pragma once

// Runtime fields R x R^d -> R^m that can be evaluated on doubles and on jets.
// Expression fields, tabulated fields and the Nelson combinators all share
// this interface, so downstream formulas never care where a field came from.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/jet.hpp"
#include "stochemb/fieldexpr/field_expr.hpp"

namespace stochemb {

class Field {
public:
    virtual ~Field() = default;
    virtual int dim() const = 0;
    virtual int arity() const = 0;
    virtual void eval(double t, std::span<const double> x, std::span<double> out) const = 0;
    virtual void eval_jet(const Jet& t, std::span<const Jet> x, std::span<Jet> out) const = 0;

    /// Jets of every component at (t, x), seeded with t as variable 0 and x_i as variable i.
    std::vector<Jet> jets_at(double t, std::span<const double> x) const {
        if (dim() > kJetVars - 1) throw InvalidArgument("jet evaluation supports dimension <= 3");
        Jet jt = Jet::variable(t, 0);
        std::vector<Jet> jx(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) jx[i] = Jet::variable(x[i], static_cast<int>(i) + 1);
        std::vector<Jet> out(static_cast<std::size_t>(arity()));
        eval_jet(jt, jx, out);
        return out;
    }

    std::vector<double> values(double t, std::span<const double> x) const {
        std::vector<double> out(static_cast<std::size_t>(arity()));
        eval(t, x, out);
        return out;
    }
};

using FieldPtr = std::shared_ptr<const Field>;

class ExprField final : public Field {
public:
    explicit ExprField(FieldExpr f) : f_(std::move(f)) {}
    int dim() const override { return f_.dim(); }
    int arity() const override { return static_cast<int>(f_.arity()); }
    void eval(double t, std::span<const double> x, std::span<double> out) const override {
        for (std::size_t i = 0; i < f_.arity(); ++i) out[i] = f_.value(i, t, x);
    }
    void eval_jet(const Jet& t, std::span<const Jet> x, std::span<Jet> out) const override {
        for (std::size_t i = 0; i < f_.arity(); ++i) out[i] = f_.jet(i, t, x);
    }
    const FieldExpr& expr() const { return f_; }

private:
    FieldExpr f_;
};

inline FieldPtr make_field(FieldExpr f) { return std::make_shared<const ExprField>(std::move(f)); }

/// Constant field (value independent of t and x).
inline FieldPtr constant_field(int dim, std::vector<double> values) {
    std::vector<fieldexpr::NodePtr> ns;
    for (double v : values) ns.push_back(fieldexpr::constant(v));
    return make_field(FieldExpr(dim, std::move(ns), values.size() > 1));
}

/// sum_k c_k F_k, all terms with equal dimension and arity.
class LinearCombination final : public Field {
public:
    LinearCombination(std::vector<double> coeffs, std::vector<FieldPtr> terms)
        : c_(std::move(coeffs)), f_(std::move(terms)) {
        if (c_.size() != f_.size() || f_.empty()) throw InvalidArgument("linear combination: mismatched terms");
        for (const auto& f : f_)
            if (f->dim() != f_[0]->dim() || f->arity() != f_[0]->arity())
                throw InvalidArgument("linear combination: terms differ in shape");
    }
    int dim() const override { return f_[0]->dim(); }
    int arity() const override { return f_[0]->arity(); }
    void eval(double t, std::span<const double> x, std::span<double> out) const override {
        std::vector<double> tmp(static_cast<std::size_t>(arity()));
        for (auto& o : out) o = 0.0;
        for (std::size_t k = 0; k < f_.size(); ++k) {
            if (c_[k] == 0.0) continue;
            f_[k]->eval(t, x, tmp);
            for (std::size_t i = 0; i < tmp.size(); ++i) out[i] += c_[k] * tmp[i];
        }
    }
    void eval_jet(const Jet& t, std::span<const Jet> x, std::span<Jet> out) const override {
        std::vector<Jet> tmp(static_cast<std::size_t>(arity()));
        for (auto& o : out) o = Jet(0.0);
        for (std::size_t k = 0; k < f_.size(); ++k) {
            if (c_[k] == 0.0) continue;
            f_[k]->eval_jet(t, x, tmp);
            for (std::size_t i = 0; i < tmp.size(); ++i) out[i] += c_[k] * tmp[i];
        }
    }

private:
    std::vector<double> c_;
    std::vector<FieldPtr> f_;
};

inline FieldPtr combine(std::vector<double> coeffs, std::vector<FieldPtr> terms) {
    return std::make_shared<const LinearCombination>(std::move(coeffs), std::move(terms));
}

/// Concatenate scalar fields into a vector field.
class StackedField final : public Field {
public:
    explicit StackedField(std::vector<FieldPtr> parts) : p_(std::move(parts)) {
        if (p_.empty()) throw InvalidArgument("stacked field needs parts");
        for (const auto& p : p_) {
            if (p->dim() != p_[0]->dim()) throw InvalidArgument("stacked field: dimension mismatch");
            arity_ += p->arity();
        }
    }
    int dim() const override { return p_[0]->dim(); }
    int arity() const override { return arity_; }
    void eval(double t, std::span<const double> x, std::span<double> out) const override {
        std::size_t off = 0;
        for (const auto& p : p_) {
            p->eval(t, x, out.subspan(off, static_cast<std::size_t>(p->arity())));
            off += static_cast<std::size_t>(p->arity());
        }
    }
    void eval_jet(const Jet& t, std::span<const Jet> x, std::span<Jet> out) const override {
        std::size_t off = 0;
        for (const auto& p : p_) {
            p->eval_jet(t, x, out.subspan(off, static_cast<std::size_t>(p->arity())));
            off += static_cast<std::size_t>(p->arity());
        }
    }

private:
    std::vector<FieldPtr> p_;
    int arity_ = 0;
};

inline FieldPtr stack(std::vector<FieldPtr> parts) { return std::make_shared<const StackedField>(std::move(parts)); }

}  // namespace stochemb
