#pragma once

// Momentum process P = M D_mu X, the Hamiltonian H(p, x) = (1/2) p^T M^{-1} p + U(x)
// of a natural Lagrangian, and the residuals of
//   D_mu X = dH/dp = M^{-1} P,   D_mu P = -dH/dx = -grad U(X).

#include <cmath>
#include <complex>
#include <memory>
#include <utility>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/lagrange/lagrangian.hpp"
#include "stochemb/nelson/composition.hpp"

namespace stochemb::hamilton {

using lagrange::ComplexSeries;
using lagrange::LagrangianSpec;

namespace detail {

// x -> A x for a constant d*d matrix A applied to a d-vector field.
class MatrixField final : public Field {
public:
    MatrixField(FieldPtr f, std::vector<double> a) : f_(std::move(f)), a_(std::move(a)) {}
    int dim() const override { return f_->dim(); }
    int arity() const override { return f_->arity(); }
    void eval(double t, std::span<const double> x, std::span<double> out) const override {
        const auto v = f_->values(t, x);
        const std::size_t d = v.size();
        for (std::size_t i = 0; i < d; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < d; ++j) s += a_[i * d + j] * v[j];
            out[i] = s;
        }
    }
    void eval_jet(const Jet& t, std::span<const Jet> x, std::span<Jet> out) const override {
        const std::size_t d = out.size();
        std::vector<Jet> v(d);
        f_->eval_jet(t, x, v);
        for (std::size_t i = 0; i < d; ++i) {
            Jet s(0.0);
            for (std::size_t j = 0; j < d; ++j) s += a_[i * d + j] * v[j];
            out[i] = s;
        }
    }

private:
    FieldPtr f_;
    std::vector<double> a_;
};

inline std::vector<double> mass_matrix(const LagrangianSpec& L) {
    const std::size_t d = static_cast<std::size_t>(L.dim);
    std::vector<double> m(d * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) m[i * d + j] = L.M(i, j);
    return m;
}

// Solve M y = p for symmetric positive definite M (Cholesky, d <= 3).
inline std::vector<cplx> solve_mass(const LagrangianSpec& L, std::span<const cplx> p) {
    const std::size_t d = p.size();
    if (L.mass.empty()) return {p.begin(), p.end()};
    bool diagonal = true;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (i != j && L.M(i, j) != 0.0) diagonal = false;
    if (diagonal) {
        std::vector<cplx> y(d);
        for (std::size_t i = 0; i < d; ++i) y[i] = p[i] / L.M(i, i);
        return y;
    }
    std::vector<double> l(d * d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double s = L.M(j, j);
        for (std::size_t k = 0; k < j; ++k) s -= l[j * d + k] * l[j * d + k];
        l[j * d + j] = std::sqrt(s);
        for (std::size_t i = j + 1; i < d; ++i) {
            double r = L.M(i, j);
            for (std::size_t k = 0; k < j; ++k) r -= l[i * d + k] * l[j * d + k];
            l[i * d + j] = r / l[j * d + j];
        }
    }
    std::vector<cplx> y(p.begin(), p.end());
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= l[i * d + k] * y[k];
        y[i] /= l[i * d + i];
    }
    for (std::size_t i = d; i-- > 0;) {
        for (std::size_t k = i + 1; k < d; ++k) y[i] -= l[k * d + i] * y[k];
        y[i] /= l[i * d + i];
    }
    return y;
}

}  // namespace detail

/// Natural Hamiltonian of a natural Lagrangian: Legendre map v = f(x, p) = M^{-1} p.
struct HamiltonianSpec {
    LagrangianSpec lagrangian;

    explicit HamiltonianSpec(LagrangianSpec L) : lagrangian(std::move(L)) { lagrangian.validate(); }

    int dim() const { return lagrangian.dim; }
    std::vector<cplx> legendre(std::span<const cplx> p) const { return detail::solve_mass(lagrangian, p); }

    /// (1/2) p^T M^{-1} p + U(x), holomorphic in p.
    cplx value(double t, std::span<const double> x, std::span<const cplx> p) const {
        const auto v = legendre(p);
        cplx s{};
        for (std::size_t i = 0; i < v.size(); ++i) s += p[i] * v[i];
        return 0.5 * s + lagrangian.potential_value(t, x);
    }

    /// p . f(x, p) - L(x, f(x, p)).
    cplx value_definitional(double t, std::span<const double> x, std::span<const cplx> p) const {
        const auto v = legendre(p);
        cplx s{};
        for (std::size_t i = 0; i < v.size(); ++i) s += p[i] * v[i];
        return s - lagrangian.value(t, x, v);
    }
};

/// P = M D_mu X from an estimated or field-route sample of D_mu X.
inline ComplexProcessSample momentum_process(const LagrangianSpec& L, const ComplexProcessSample& dX) {
    L.validate();
    if (dX.dim() != L.dim) throw InvalidArgument("Lagrangian dimension does not match the sample");
    ComplexProcessSample out = dX;
    out.set_kind(SampleKind::Momentum, dX.mu());
    for (std::size_t s = 0; s < dX.n_slices(); ++s)
        for (std::size_t p = 0; p < dX.n_paths(); ++p) {
            const auto m = L.momentum(dX.state(s, p));
            std::copy(m.begin(), m.end(), out.state(s, p).begin());
        }
    return out;
}

inline ComplexProcessSample momentum_process(const PathEnsemble& e, const LagrangianSpec& L, const NelsonFields& nf, int mu,
                                             const std::vector<int>& steps) {
    if (L.dim != e.dim()) throw InvalidArgument("Lagrangian dimension does not match the ensemble");
    return momentum_process(L, stochastic_derivative_from_fields(e, nf, mu, steps));
}

/// P as a complex field of (t, x): M g_mu.
inline ComplexField momentum_field(const LagrangianSpec& L, const NelsonFields& nf, int mu) {
    const auto m = detail::mass_matrix(L);
    const ComplexField g = stochastic_velocity(nf, mu);
    return {std::make_shared<const detail::MatrixField>(g.re, m), std::make_shared<const detail::MatrixField>(g.im, m)};
}

struct LegendreReport {
    double max_deviation = 0.0;  // max |D X - M^{-1} P| over paths, times, components
    bool ok(double tol = 0.0) const { return max_deviation <= tol; }
};

inline LegendreReport legendre_check(const LagrangianSpec& L, const ComplexProcessSample& dX, const ComplexProcessSample& P) {
    if (!dX.same_shape(P)) throw InvalidArgument("D X and P samples differ in shape");
    LegendreReport r;
    for (std::size_t s = 0; s < dX.n_slices(); ++s)
        for (std::size_t p = 0; p < dX.n_paths(); ++p) {
            const auto v = detail::solve_mass(L, P.state(s, p));
            const auto d = dX.state(s, p);
            for (std::size_t i = 0; i < v.size(); ++i) r.max_deviation = std::max(r.max_deviation, std::abs(d[i] - v[i]));
        }
    return r;
}

inline LegendreReport legendre_check(const PathEnsemble& e, const LagrangianSpec& L, const NelsonFields& nf, int mu,
                                     const std::vector<int>& steps) {
    const auto dX = stochastic_derivative_from_fields(e, nf, mu, steps);
    return legendre_check(L, dX, momentum_process(L, dX));
}

struct HamiltonResiduals {
    ComplexProcessSample first;   // D X - dH/dp
    ComplexProcessSample second;  // D P + dH/dx
};

/// D P by field composition on P = M g_mu(t, X); grad U symbolically.
inline HamiltonResiduals hamilton_residuals(const PathEnsemble& e, const HamiltonianSpec& H, const NelsonFields& nf, int mu,
                                            const std::vector<int>& steps, int workers = 0) {
    const LagrangianSpec& L = H.lagrangian;
    if (L.dim != e.dim()) throw InvalidArgument("Hamiltonian dimension does not match the ensemble");
    const auto dX = stochastic_derivative_from_fields(e, nf, mu, steps);
    const auto P = momentum_process(L, dX);
    auto dP = derivative_of_function(momentum_field(L, nf, mu), e, nf, mu, steps, workers);
    const FieldExpr grad_u = lagrange::potential_gradient(L);
    const std::size_t d = static_cast<std::size_t>(e.dim());
    HamiltonResiduals r{ComplexProcessSample(e.grid(), steps, e.n_paths(), e.dim(), SampleKind::Residual, mu),
                        ComplexProcessSample(e.grid(), steps, e.n_paths(), e.dim(), SampleKind::Residual, mu)};
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const double t = e.grid().time(steps[s]);
        for (std::size_t p = 0; p < e.n_paths(); ++p) {
            auto x = e.state(steps[s], p);
            const auto v = H.legendre(P.state(s, p));
            for (std::size_t i = 0; i < d; ++i) {
                const int ii = static_cast<int>(i);
                r.first.at(s, p, ii) = dX.at(s, p, ii) - v[i];
                r.second.at(s, p, ii) = dP.at(s, p, ii) + grad_u.value(i, t, x);
            }
        }
    }
    return r;
}

/// H(P(t), X(t)) per path and time (a diagnostic; conservation of E[H] is not asserted).
inline ComplexProcessSample hamiltonian_values(const PathEnsemble& e, const HamiltonianSpec& H, const ComplexProcessSample& P) {
    ComplexProcessSample out(e.grid(), P.steps(), e.n_paths(), 1, SampleKind::Function, P.mu());
    for (std::size_t s = 0; s < P.n_slices(); ++s) {
        const double t = e.grid().time(P.steps()[s]);
        for (std::size_t p = 0; p < e.n_paths(); ++p) out.at(s, p, 0) = H.value(t, e.state(P.steps()[s], p), P.state(s, p));
    }
    return out;
}

inline ComplexSeries energy_series(const PathEnsemble& e, const HamiltonianSpec& H, const ComplexProcessSample& P) {
    return lagrange::summarize(hamiltonian_values(e, H, P));
}

}  // namespace stochemb::hamilton
