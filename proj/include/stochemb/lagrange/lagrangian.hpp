#pragma once

// Natural Lagrangians L(x, v) = (1/2) v^T M v - U(x), evaluated at complex v, and
// the stochastic Euler-Lagrange residual D_mu(dL/dv) - dL/dx along an ensemble.

#include <cmath>
#include <complex>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/stats.hpp"
#include "stochemb/fieldexpr/field_expr.hpp"
#include "stochemb/nelson/checks.hpp"
#include "stochemb/nelson/composition.hpp"

namespace stochemb::lagrange {

struct LagrangianSpec {
    int dim = 1;
    std::vector<double> mass;  // d*d row-major; empty means identity
    FieldExpr potential;       // U(t, x)

    LagrangianSpec() = default;
    LagrangianSpec(int d, FieldExpr u, std::vector<double> m = {}) : dim(d), mass(std::move(m)), potential(std::move(u)) {
        validate();
    }

    static LagrangianSpec natural(const FieldExpr& u) { return LagrangianSpec(u.dim(), u); }

    double M(std::size_t i, std::size_t j) const {
        if (mass.empty()) return i == j ? 1.0 : 0.0;
        return mass[i * static_cast<std::size_t>(dim) + j];
    }

    void validate() const {
        if (dim < 1) throw InvalidArgument("Lagrangian dimension must be >= 1");
        if (potential.dim() != dim || potential.arity() != 1) throw InvalidArgument("potential must be a scalar field of the state");
        if (mass.empty()) return;
        const std::size_t d = static_cast<std::size_t>(dim);
        if (mass.size() != d * d) throw InvalidArgument("mass matrix must have d*d entries");
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (mass[i * d + j] != mass[j * d + i]) throw InvalidArgument("mass matrix must be symmetric");
        // Positive definiteness by Cholesky.
        std::vector<double> l(d * d, 0.0);
        for (std::size_t j = 0; j < d; ++j) {
            double s = mass[j * d + j];
            for (std::size_t k = 0; k < j; ++k) s -= l[j * d + k] * l[j * d + k];
            if (!(s > 0.0)) throw InvalidArgument("mass matrix must be positive definite");
            l[j * d + j] = std::sqrt(s);
            for (std::size_t i = j + 1; i < d; ++i) {
                double r = mass[i * d + j];
                for (std::size_t k = 0; k < j; ++k) r -= l[i * d + k] * l[j * d + k];
                l[i * d + j] = r / l[j * d + j];
            }
        }
    }

    /// (M v)_i for complex v.
    std::vector<cplx> momentum(std::span<const cplx> v) const {
        const std::size_t d = static_cast<std::size_t>(dim);
        std::vector<cplx> out(d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) out[i] += M(i, j) * v[j];
        return out;
    }

    /// (1/2) v^T M v, holomorphic in v (no conjugation).
    cplx kinetic(std::span<const cplx> v) const {
        const auto p = momentum(v);
        cplx s{};
        for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * v[i];
        return 0.5 * s;
    }

    double potential_value(double t, std::span<const double> x) const { return potential.value(t, x); }

    cplx value(double t, std::span<const double> x, std::span<const cplx> v) const { return kinetic(v) - potential_value(t, x); }
};

/// grad U as a vector field.
inline FieldExpr potential_gradient(const LagrangianSpec& L) { return fieldexpr::grad_field(L.potential); }

/// Per-path residual M D_mu^2 X + grad U(X) (the Euler-Lagrange residual of a natural L).
inline ComplexProcessSample el_residual(const PathEnsemble& e, const LagrangianSpec& L, const NelsonFields& nf, int mu,
                                        const std::vector<int>& steps, int workers = 0) {
    L.validate();
    if (L.dim != e.dim()) throw InvalidArgument("Lagrangian dimension does not match the ensemble");
    auto acc = second_derivative(e, nf, mu, steps, workers);
    const FieldExpr grad_u = potential_gradient(L);
    const std::size_t d = static_cast<std::size_t>(e.dim());
    ComplexProcessSample out(e.grid(), steps, e.n_paths(), e.dim(), SampleKind::Residual, mu);
    std::vector<cplx> v(d);
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const double t = e.grid().time(steps[s]);
        for (std::size_t p = 0; p < e.n_paths(); ++p) {
            auto x = e.state(steps[s], p);
            auto a = acc.state(s, p);
            std::copy(a.begin(), a.end(), v.begin());
            const auto mv = L.momentum(v);
            for (std::size_t i = 0; i < d; ++i) out.at(s, p, static_cast<int>(i)) = mv[i] + grad_u.value(i, t, x);
        }
    }
    return out;
}

/// Ensemble mean of component i of a complex sample per slice, with bootstrap s.e.
/// of the real and imaginary parts.
struct ComplexSeries {
    std::vector<int> steps;
    std::vector<double> t;
    std::vector<cplx> mean;
    std::vector<cplx> se;  // (s.e. of real part, s.e. of imaginary part)

    /// max over slices of |Re|/se_re and |Im|/se_im (0/0 counts as 0).
    double max_abs_z() const {
        double z = 0;
        auto ratio = [](double v, double s) { return s > 0 ? std::abs(v) / s : (v == 0 ? 0.0 : INFINITY); };
        for (std::size_t k = 0; k < mean.size(); ++k)
            z = std::max({z, ratio(mean[k].real(), se[k].real()), ratio(mean[k].imag(), se[k].imag())});
        return z;
    }
    /// |Re| <= n_se se_re + atol and |Im| <= n_se se_im + atol at every slice.
    bool within(double n_se, double atol = 1e-10) const {
        for (std::size_t k = 0; k < mean.size(); ++k)
            if (std::abs(mean[k].real()) > n_se * se[k].real() + atol || std::abs(mean[k].imag()) > n_se * se[k].imag() + atol)
                return false;
        return true;
    }
};

inline ComplexSeries summarize(const ComplexProcessSample& s, int component = 0) {
    ComplexSeries out;
    for (std::size_t q = 0; q < s.n_slices(); ++q) {
        const auto re = s.real_part(q, component);
        const auto im = s.imag_part(q, component);
        out.steps.push_back(s.steps()[q]);
        out.t.push_back(s.grid().time(s.steps()[q]));
        out.mean.emplace_back(stats::mean(re), stats::mean(im));
        out.se.emplace_back(stats::bootstrap_se_of_mean(re), stats::bootstrap_se_of_mean(im));
    }
    return out;
}

namespace detail {

// Per-path time integral of L(X, D X) over the sample's steps (trapezoid; steps must be equally spaced).
inline double step_spacing(const ComplexProcessSample& dX) {
    const auto& st = dX.steps();
    if (st.size() < 2) throw InvalidArgument("action needs at least two sampled times");
    const int stride = st[1] - st[0];
    if (stride <= 0) throw InvalidArgument("sampled steps must increase");
    for (std::size_t k = 1; k < st.size(); ++k)
        if (st[k] - st[k - 1] != stride) throw InvalidArgument("sampled steps must be equally spaced");
    return stride * dX.grid().dt();
}

}  // namespace detail

/// J = E[ integral L(X(t), D_mu X(t)) dt ] over the sampled steps, by the trapezoidal rule.
inline cplx action_functional(const PathEnsemble& e, const LagrangianSpec& L, const ComplexProcessSample& dX) {
    L.validate();
    if (dX.dim() != e.dim() || dX.n_paths() != e.n_paths() || !(dX.grid() == e.grid()))
        throw InvalidArgument("D X sample does not match the ensemble");
    const double h = detail::step_spacing(dX);
    std::vector<cplx> per_time(dX.n_slices());
    for (std::size_t s = 0; s < dX.n_slices(); ++s) {
        const double t = e.grid().time(dX.steps()[s]);
        stats::Accumulator re, im;
        for (std::size_t p = 0; p < e.n_paths(); ++p) {
            const cplx l = L.value(t, e.state(dX.steps()[s], p), dX.state(s, p));
            re.add(l.real());
            im.add(l.imag());
        }
        per_time[s] = {re.sum() / static_cast<double>(e.n_paths()), im.sum() / static_cast<double>(e.n_paths())};
    }
    return stats::trapezoid<cplx>(per_time, h);
}

/// Same with D_mu X from the Nelson fields on the given steps.
inline cplx action_functional(const PathEnsemble& e, const LagrangianSpec& L, const NelsonFields& nf, int mu,
                              const std::vector<int>& steps) {
    return action_functional(e, L, stochastic_derivative_from_fields(e, nf, mu, steps));
}

}  // namespace stochemb::lagrange
