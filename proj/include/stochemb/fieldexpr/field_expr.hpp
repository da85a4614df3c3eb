#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/jet.hpp"
#include "stochemb/fieldexpr/ast.hpp"
#include "stochemb/fieldexpr/compiled.hpp"
#include "stochemb/fieldexpr/diff.hpp"
#include "stochemb/fieldexpr/parser.hpp"
#include "stochemb/fieldexpr/printer.hpp"

namespace stochemb::fieldexpr {

/// A scalar or fixed-length vector field of (t, x1..xd). Immutable; copies share state.
class FieldExpr {
public:
    FieldExpr() : FieldExpr(1, {constant(0.0)}, false) {}

    FieldExpr(int dim, std::vector<NodePtr> components, bool is_vector) {
        if (dim < 1) throw InvalidArgument("field dimension must be >= 1");
        if (components.empty()) throw InvalidArgument("field needs at least one component");
        for (const auto& c : components)
            if (max_var_index(c) > dim) throw InvalidArgument("field references a variable beyond its dimension");
        auto impl = std::make_shared<Impl>();
        impl->dim = dim;
        impl->is_vector = is_vector || components.size() > 1;
        impl->components = std::move(components);
        for (const auto& c : impl->components) impl->programs.emplace_back(c);
        impl_ = std::move(impl);
    }

    static FieldExpr scalar(int dim, NodePtr n) { return FieldExpr(dim, {std::move(n)}, false); }
    static FieldExpr vector(int dim, std::vector<NodePtr> ns) { return FieldExpr(dim, std::move(ns), true); }

    int dim() const { return impl_->dim; }
    std::size_t arity() const { return impl_->components.size(); }
    bool is_vector() const { return impl_->is_vector; }
    const NodePtr& component(std::size_t i) const { return impl_->components.at(i); }
    const std::vector<NodePtr>& components() const { return impl_->components; }

    /// Scalar-component field i.
    FieldExpr at(std::size_t i) const { return scalar(dim(), component(i)); }

    double value(std::size_t i, double t, std::span<const double> x) const {
        check_point(x.size());
        return impl_->programs[i].run<double>(t, x);
    }
    double value(double t, std::span<const double> x) const { return value(0, t, x); }

    Jet jet(std::size_t i, const Jet& t, std::span<const Jet> x) const {
        check_point(x.size());
        return impl_->programs[i].run<Jet>(t, x);
    }

    std::vector<double> values(double t, std::span<const double> x) const {
        std::vector<double> out(arity());
        for (std::size_t i = 0; i < arity(); ++i) out[i] = value(i, t, x);
        return out;
    }

    /// True when component i does not depend on t or x.
    bool is_constant(std::size_t i = 0) const { return component(i)->op == Op::Const; }
    bool depends_on_time() const {
        for (const auto& c : components())
            if (depends_on(c, 0)) return true;
        return false;
    }

    std::string to_string() const {
        if (!is_vector()) return fieldexpr::to_string(component(0));
        std::string out = "[";
        for (std::size_t i = 0; i < arity(); ++i) {
            if (i) out += ", ";
            out += fieldexpr::to_string(component(i));
        }
        return out + "]";
    }

private:
    struct Impl {
        int dim = 1;
        bool is_vector = false;
        std::vector<NodePtr> components;
        std::vector<Program> programs;
    };
    std::shared_ptr<const Impl> impl_;

    void check_point(std::size_t n) const {
        if (n != static_cast<std::size_t>(dim()))
            throw InvalidArgument("point has " + std::to_string(n) + " coordinates, field dimension is " +
                                  std::to_string(dim()));
    }
};

using Constants = std::map<std::string, double, std::less<>>;

inline FieldExpr parse_field(std::string_view text, int dim, const Constants& constants = {}) {
    ParseOptions opts;
    opts.dim = dim;
    opts.constants = constants;
    ParsedField p = parse(text, opts);
    return FieldExpr(dim, std::move(p.components), p.is_vector);
}

/// Parse and require exactly `arity` components.
inline FieldExpr parse_field(std::string_view text, int dim, std::size_t arity, const Constants& constants) {
    FieldExpr f = parse_field(text, dim, constants);
    if (f.arity() != arity)
        throw ParseError("arity mismatch: expected " + std::to_string(arity) + " component(s), got " +
                             std::to_string(f.arity()),
                         0);
    return f;
}

inline std::vector<double> eval_field(const FieldExpr& f, double t, std::span<const double> x) {
    return f.values(t, x);
}

inline bool structurally_equal(const FieldExpr& f, const FieldExpr& g) {
    if (f.dim() != g.dim() || f.arity() != g.arity() || f.is_vector() != g.is_vector()) return false;
    for (std::size_t i = 0; i < f.arity(); ++i)
        if (!equal(f.component(i), g.component(i))) return false;
    return true;
}

namespace detail {
inline const NodePtr& scalar_root(const FieldExpr& f, const char* what) {
    if (f.arity() != 1) throw InvalidArgument(std::string(what) + " needs a scalar field");
    return f.component(0);
}
}  // namespace detail

inline FieldExpr partial_field(const FieldExpr& f, int var) {
    std::vector<NodePtr> out;
    for (const auto& c : f.components()) out.push_back(differentiate(c, var));
    return FieldExpr(f.dim(), std::move(out), f.is_vector());
}

inline FieldExpr grad_field(const FieldExpr& f) {
    const NodePtr& r = detail::scalar_root(f, "grad_field");
    std::vector<NodePtr> out;
    for (int i = 1; i <= f.dim(); ++i) out.push_back(differentiate(r, i));
    return FieldExpr::vector(f.dim(), std::move(out));
}

inline FieldExpr laplacian_field(const FieldExpr& f) {
    const NodePtr& r = detail::scalar_root(f, "laplacian_field");
    NodePtr acc = constant(0.0);
    for (int i = 1; i <= f.dim(); ++i) acc = add(acc, differentiate(differentiate(r, i), i));
    return FieldExpr::scalar(f.dim(), acc);
}

inline FieldExpr dt_field(const FieldExpr& f) { return partial_field(f, 0); }

/// a^{ij} d_i d_j f. `a` is either a scalar field (a = a0 * Id) or d*d components in row-major order.
inline FieldExpr hessian_apply(const FieldExpr& f, const FieldExpr& a) {
    const NodePtr& r = detail::scalar_root(f, "hessian_apply");
    const int d = f.dim();
    if (a.dim() != d) throw InvalidArgument("hessian_apply: dimension mismatch");
    NodePtr acc = constant(0.0);
    if (a.arity() == 1) {
        for (int i = 1; i <= d; ++i) acc = add(acc, differentiate(differentiate(r, i), i));
        return FieldExpr::scalar(d, mul(a.component(0), acc));
    }
    if (a.arity() != static_cast<std::size_t>(d * d)) throw InvalidArgument("hessian_apply: matrix field must have d*d entries");
    for (int i = 1; i <= d; ++i) {
        NodePtr di = differentiate(r, i);
        for (int j = 1; j <= d; ++j) {
            const NodePtr& aij = a.component(static_cast<std::size_t>((i - 1) * d + (j - 1)));
            acc = add(acc, mul(aij, differentiate(di, j)));
        }
    }
    return FieldExpr::scalar(d, acc);
}

}  // namespace stochemb::fieldexpr

namespace stochemb {
using fieldexpr::FieldExpr;
}
