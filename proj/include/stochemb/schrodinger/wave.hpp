#pragma once

// Wave functions on a uniform 1D grid and Crank-Nicolson stepping of
//   i sigma^2 d_t psi = -(sigma^4 / 2) psi'' + U psi.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/fieldexpr/field_expr.hpp"

namespace stochemb::schrodinger {

using cplx = std::complex<double>;
using fieldexpr::FieldExpr;

enum class Boundary { Periodic, Dirichlet };

/// Periodic: nodes lo + k dx, k < n, with lo + n dx identified with lo.
/// Dirichlet: interior nodes lo + (k + 1) dx, k < n, with psi = 0 at lo and hi.
struct WaveGrid {
    double lo = -8.0, hi = 8.0, dx = 0.02;
    std::size_t n = 0;
    Boundary bc = Boundary::Periodic;

    static WaveGrid make(double lo, double hi, double dx, Boundary bc = Boundary::Periodic) {
        if (!(hi > lo) || !(dx > 0)) throw InvalidArgument("wave grid needs hi > lo and dx > 0");
        const double cells = (hi - lo) / dx;
        const double r = std::round(cells);
        if (std::abs(cells - r) > 1e-9 * std::max(1.0, r)) throw InvalidArgument("wave grid: (hi - lo) / dx must be an integer");
        WaveGrid g;
        g.lo = lo;
        g.hi = hi;
        g.dx = dx;
        g.bc = bc;
        const auto m = static_cast<std::size_t>(r);
        g.n = bc == Boundary::Periodic ? m : m - 1;
        if (g.n < 8) throw InvalidArgument("wave grid needs at least 8 nodes");
        return g;
    }

    double x(std::size_t k) const { return lo + dx * static_cast<double>(bc == Boundary::Periodic ? k : k + 1); }
    double x_first() const { return x(0); }
    friend bool operator==(const WaveGrid& a, const WaveGrid& b) {
        return a.lo == b.lo && a.hi == b.hi && a.dx == b.dx && a.n == b.n && a.bc == b.bc;
    }
};

struct WaveFunction {
    WaveGrid grid;
    double t = 0.0;
    std::vector<cplx> values;

    double norm2() const {
        double s = 0;
        for (const auto& v : values) s += std::norm(v);
        return s * grid.dx;
    }
    void normalize() {
        const double n = std::sqrt(norm2());
        if (!(n > 0) || !std::isfinite(n)) throw NumericalError("wave function cannot be normalized");
        for (auto& v : values) v /= n;
    }
    double max_modulus() const {
        double m = 0;
        for (const auto& v : values) m = std::max(m, std::abs(v));
        return m;
    }
    std::vector<double> density() const {
        std::vector<double> p(values.size());
        for (std::size_t k = 0; k < values.size(); ++k) p[k] = std::norm(values[k]);
        return p;
    }
    bool all_finite() const {
        return std::all_of(values.begin(), values.end(), [](const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
    }
    /// Node value with the boundary condition applied beyond the grid.
    cplx at(std::ptrdiff_t k) const {
        const auto n = static_cast<std::ptrdiff_t>(values.size());
        if (grid.bc == Boundary::Periodic) return values[static_cast<std::size_t>(((k % n) + n) % n)];
        return (k < 0 || k >= n) ? cplx{} : values[static_cast<std::size_t>(k)];
    }
};

/// Wave function from a complex expression given as real and imaginary parts.
inline WaveFunction sample_wave(const WaveGrid& g, const FieldExpr& re, const FieldExpr& im, double t = 0.0, bool normalize = true) {
    WaveFunction w{g, t, std::vector<cplx>(g.n)};
    for (std::size_t k = 0; k < g.n; ++k) {
        const double x = g.x(k);
        w.values[k] = {re.value(t, std::span<const double>(&x, 1)), im.value(t, std::span<const double>(&x, 1))};
    }
    if (normalize) w.normalize();
    return w;
}

/// (omega / (pi sigma^2))^(1/4) exp(-omega (x - x0)^2 / (2 sigma^2)), discretely normalized.
inline WaveFunction gaussian_state(const WaveGrid& g, double omega, double sigma, double x0 = 0.0) {
    WaveFunction w{g, 0.0, std::vector<cplx>(g.n)};
    const double c = std::pow(omega / (std::numbers::pi * sigma * sigma), 0.25);
    for (std::size_t k = 0; k < g.n; ++k) {
        const double u = g.x(k) - x0;
        w.values[k] = c * std::exp(-omega * u * u / (2 * sigma * sigma));
    }
    w.normalize();
    return w;
}

/// |psi|^2 mass on the outer `fraction` of the domain at each end.
inline double boundary_mass(const WaveFunction& w, double fraction = 0.05) {
    const double band = fraction * (w.grid.hi - w.grid.lo);
    double m = 0;
    for (std::size_t k = 0; k < w.values.size(); ++k) {
        const double x = w.grid.x(k);
        if (x < w.grid.lo + band || x > w.grid.hi - band) m += std::norm(w.values[k]);
    }
    return m * w.grid.dx;
}

namespace detail {

// Tridiagonal solve, row k: lo[k] y[k-1] + di[k] y[k] + up[k] y[k+1] = r[k] (Thomas).
template <class T>
std::vector<T> solve_tridiagonal(const std::vector<T>& lo, const std::vector<T>& di, const std::vector<T>& up, std::vector<T> r) {
    const std::size_t n = di.size();
    std::vector<T> c(n);
    T b = di[0];
    if (std::abs(b) == 0.0) throw NumericalError("tridiagonal solve: zero pivot");
    r[0] /= b;
    for (std::size_t i = 1; i < n; ++i) {
        c[i] = up[i - 1] / b;
        b = di[i] - lo[i] * c[i];
        if (std::abs(b) == 0.0) throw NumericalError("tridiagonal solve: zero pivot");
        r[i] = (r[i] - lo[i] * r[i - 1]) / b;
    }
    for (std::size_t i = n - 1; i-- > 0;) r[i] -= c[i + 1] * r[i + 1];
    return r;
}

// Cyclic tridiagonal: lo[0] couples row 0 to y[n-1], up[n-1] couples row n-1 to y[0]
// (Sherman-Morrison on the corner entries).
template <class T>
std::vector<T> solve_cyclic(const std::vector<T>& lo, std::vector<T> di, const std::vector<T>& up, const std::vector<T>& r) {
    const std::size_t n = di.size();
    const T beta = lo[0], alpha = up[n - 1];
    const T gamma = -di[0];
    di[0] -= gamma;
    di[n - 1] -= alpha * beta / gamma;
    auto x = solve_tridiagonal(lo, di, up, r);
    std::vector<T> u(n, T{});
    u[0] = gamma;
    u[n - 1] = alpha;
    auto z = solve_tridiagonal(lo, di, up, u);
    const T fact = (x[0] + beta * x[n - 1] / gamma) / (T(1) + z[0] + beta * z[n - 1] / gamma);
    for (std::size_t i = 0; i < n; ++i) x[i] -= fact * z[i];
    return x;
}

// Banded operator with the grid's boundary condition.
template <class T>
struct Tridiag {
    std::vector<T> lo, di, up;

    std::vector<T> solve(const WaveGrid& g, const std::vector<T>& r) const {
        return g.bc == Boundary::Periodic ? solve_cyclic(lo, di, up, r) : solve_tridiagonal(lo, di, up, r);
    }
    template <class V>
    std::vector<V> apply(const WaveGrid& g, const std::vector<V>& v) const {
        const std::size_t n = v.size();
        const bool per = g.bc == Boundary::Periodic;
        std::vector<V> out(n);
        for (std::size_t k = 0; k < n; ++k) {
            V a = di[k] * v[k];
            if (k > 0) a += lo[k] * v[k - 1];
            else if (per) a += lo[k] * v[n - 1];
            if (k + 1 < n) a += up[k] * v[k + 1];
            else if (per) a += up[k] * v[0];
            out[k] = a;
        }
        return out;
    }
};

// Numerov (compact fourth-order) form of H = -(sigma^4 / 2) d_xx + U:
//   H = M^{-1} K + U,  M = 1 + delta^2 / 12,  K = -(sigma^4 / (2 dx^2)) delta^2.
// M and K commute, so H is symmetric. Returns M (c_m + c_k K + c_mu M U): with
// (c_m, c_k, c_mu) = (1, +-beta, +-beta) these are the two Crank-Nicolson sides multiplied by M.
template <class T>
Tridiag<T> numerov_operator(const std::vector<double>& u, double kin, T c_m, T c_k, T c_mu) {
    const std::size_t n = u.size();
    Tridiag<T> op{std::vector<T>(n), std::vector<T>(n), std::vector<T>(n)};
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t km = (k + n - 1) % n, kp = (k + 1) % n;
        op.di[k] = c_m * (10.0 / 12) + c_k * (2 * kin) + c_mu * (10.0 / 12 * u[k]);
        op.lo[k] = c_m * (1.0 / 12) - c_k * kin + c_mu * (u[km] / 12);
        op.up[k] = c_m * (1.0 / 12) - c_k * kin + c_mu * (u[kp] / 12);
    }
    return op;
}

inline std::vector<double> potential_on_grid(const FieldExpr& u, const WaveGrid& g, double t) {
    if (u.dim() != 1 || u.arity() != 1) throw InvalidArgument("potential must be a scalar field of one variable");
    std::vector<double> v(g.n);
    for (std::size_t k = 0; k < g.n; ++k) {
        const double x = g.x(k);
        v[k] = u.value(t, std::span<const double>(&x, 1));
        if (!std::isfinite(v[k])) throw DomainError("potential is not finite at x = " + std::to_string(x));
    }
    return v;
}

}  // namespace detail

struct LinearSolveOptions {
    int snapshot_every = 1;     // steps between stored snapshots
    double norm_tol = 1e-8;     // abort if the norm changes by more per step
    double boundary_tol = 1e-6; // max initial mass in the outer 5% of the domain
};

struct WaveTrajectory {
    double sigma = 1.0;
    double dt_pde = 0.0;
    int snapshot_every = 1;
    std::vector<WaveFunction> snapshots;
    std::vector<double> norm_drift;  // |norm^2 change| per PDE step

    const WaveGrid& grid() const { return snapshots.front().grid; }
    double t0() const { return snapshots.front().t; }
    double t1() const { return snapshots.back().t; }
    double spacing() const { return dt_pde * snapshot_every; }

    /// |psi|^2 at time t, linear in t between snapshots.
    std::vector<double> density_at(double t) const {
        if (t < t0() - 1e-12 || t > t1() + 1e-12) throw InvalidArgument("time outside the wave trajectory");
        const double u = std::clamp((t - t0()) / spacing(), 0.0, static_cast<double>(snapshots.size() - 1));
        const std::size_t j = std::min(static_cast<std::size_t>(u), snapshots.size() - 1);
        const double lam = u - static_cast<double>(j);
        auto p = snapshots[j].density();
        if (lam > 1e-12 && j + 1 < snapshots.size()) {
            const auto q = snapshots[j + 1].density();
            for (std::size_t k = 0; k < p.size(); ++k) p[k] = (1 - lam) * p[k] + lam * q[k];
        }
        return p;
    }
    double max_norm_drift() const {
        return norm_drift.empty() ? 0.0 : *std::max_element(norm_drift.begin(), norm_drift.end());
    }
};

/// Crank-Nicolson: (1 + i dt H / (2 sigma^2)) psi_{n+1} = (1 - i dt H / (2 sigma^2)) psi_n,
/// H = -(sigma^4 / 2) d_xx + U(t_n + dt/2) in Numerov form (fourth order in dx). Unitary for real U.
inline WaveTrajectory solve_linear(const FieldExpr& U, double sigma, const WaveFunction& psi0, double t_end, double dt_pde,
                                   const LinearSolveOptions& opts = {}) {
    if (!(sigma > 0)) throw InvalidArgument("sigma must be positive");
    if (!(dt_pde > 0)) throw InvalidArgument("dt_pde must be positive");
    if (opts.snapshot_every < 1) throw InvalidArgument("snapshot_every must be >= 1");
    if (!psi0.all_finite()) throw NumericalError("initial wave function is not finite");
    if (std::abs(psi0.norm2() - 1.0) > 1e-8) throw InvalidArgument("initial wave function must be normalized");
    if (boundary_mass(psi0) > opts.boundary_tol) throw InvalidArgument("domain too narrow: initial mass near the boundary exceeds tolerance");
    const double steps_real = (t_end - psi0.t) / dt_pde;
    const auto n_steps = static_cast<long>(std::llround(steps_real));
    if (n_steps < 0 || std::abs(steps_real - static_cast<double>(n_steps)) > 1e-6)
        throw InvalidArgument("(t_end - t0) / dt_pde must be a non-negative integer");
    const WaveGrid& g = psi0.grid;
    const double s2 = sigma * sigma;
    const cplx beta(0.0, dt_pde / (2 * s2));
    const double kin = s2 * s2 / (2 * g.dx * g.dx);  // sigma^4 / (2 dx^2)
    const bool time_dependent = U.depends_on_time();
    WaveTrajectory tr;
    tr.sigma = sigma;
    tr.dt_pde = dt_pde;
    tr.snapshot_every = opts.snapshot_every;
    tr.snapshots.push_back(psi0);
    WaveFunction cur = psi0;
    auto build = [&](double t) {
        const auto u = detail::potential_on_grid(U, g, t);
        return std::make_pair(detail::numerov_operator<cplx>(u, kin, 1.0, beta, beta), detail::numerov_operator<cplx>(u, kin, 1.0, -beta, -beta));
    };
    auto ops = build(psi0.t + 0.5 * dt_pde);
    double prev = cur.norm2();
    for (long s = 0; s < n_steps; ++s) {
        const double t = psi0.t + static_cast<double>(s) * dt_pde;
        if (time_dependent && s > 0) ops = build(t + 0.5 * dt_pde);
        cur.values = ops.first.solve(g, ops.second.apply(g, cur.values));
        cur.t = psi0.t + static_cast<double>(s + 1) * dt_pde;
        if (!cur.all_finite()) throw NumericalError("Crank-Nicolson produced a non-finite value");
        const double now = cur.norm2();
        tr.norm_drift.push_back(std::abs(now - prev));
        if (std::abs(now - prev) > opts.norm_tol)
            throw NumericalError("norm drift " + std::to_string(now - prev) + " exceeds tolerance at t = " + std::to_string(cur.t));
        prev = now;
        if ((s + 1) % opts.snapshot_every == 0) tr.snapshots.push_back(cur);
    }
    return tr;
}

struct GroundState {
    WaveFunction psi;
    double energy = 0.0;
    int iterations = 0;
};

/// Lowest eigenvector of the discrete H (inverse iteration), real and positive.
/// Being an exact discrete eigenstate, it is stationary under Crank-Nicolson up to roundoff.
inline GroundState discrete_ground_state(const FieldExpr& U, double sigma, const WaveGrid& g, double tol = 1e-14, int max_iter = 2000) {
    auto u = detail::potential_on_grid(U, g, 0.0);
    const double s2 = sigma * sigma;
    const double kin = s2 * s2 / (2 * g.dx * g.dx);
    const double shift = *std::min_element(u.begin(), u.end()) - 1e-3;  // below the spectrum
    for (double& v : u) v -= shift;
    // (H - shift)^{-1} v = (K + M (U - shift))^{-1} M v
    const auto A = detail::numerov_operator<double>(u, kin, 0.0, 1.0, 1.0);
    const auto M = detail::numerov_operator<double>(u, kin, 1.0, 0.0, 0.0);
    std::vector<double> v(g.n);
    for (std::size_t k = 0; k < g.n; ++k) {
        const double x = g.x(k) - 0.5 * (g.lo + g.hi);
        v[k] = std::exp(-x * x);
    }
    auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0;
        for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
        return s * g.dx;
    };
    auto scale = [](std::vector<double>& w, double c) {
        for (double& a : w) a *= c;
    };
    scale(v, 1.0 / std::sqrt(dot(v, v)));
    GroundState gs;
    double lambda = 0;
    for (gs.iterations = 1; gs.iterations <= max_iter; ++gs.iterations) {
        auto w = A.solve(g, M.apply(g, v));
        lambda = dot(v, w);  // -> 1 / (E0 - shift)
        scale(w, 1.0 / std::sqrt(dot(w, w)));
        if (w[g.n / 2] < 0) scale(w, -1.0);
        double change = 0;
        for (std::size_t k = 0; k < g.n; ++k) change = std::max(change, std::abs(w[k] - v[k]));
        v = std::move(w);
        if (change < tol) break;
    }
    gs.energy = shift + 1.0 / lambda;
    gs.psi = WaveFunction{g, 0.0, std::vector<cplx>(v.begin(), v.end())};
    gs.psi.normalize();
    return gs;
}

}  // namespace stochemb::schrodinger
