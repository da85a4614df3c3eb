#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/stats.hpp"
#include "stochemb/nelson/estimators.hpp"
#include "stochemb/nelson/fields.hpp"

namespace stochemb {

/// Time series of a statistic with its standard error.
struct ResidualSeries {
    std::vector<int> steps;
    std::vector<double> t;
    std::vector<double> value;
    std::vector<double> se;

    double max_abs_z() const {
        double z = 0;
        for (std::size_t i = 0; i < value.size(); ++i) z = std::max(z, se[i] > 0 ? std::abs(value[i]) / se[i] : (value[i] == 0 ? 0.0 : INFINITY));
        return z;
    }
    bool within(double n_se) const { return max_abs_z() <= n_se; }
};

/// Interior steps where both h-step quotients and a one-step central difference exist.
inline std::vector<int> interior_steps(const TimeGrid& g, int h_steps) {
    const int m = std::max(1, h_steps);
    return step_range(m, g.n_steps - m);
}

namespace detail {

// Per-path difference quotient of component i over [a, b].
inline std::vector<double> quotient(const PathEnsemble& e, int i, int a, int b) {
    const double h = (b - a) * e.grid().dt();
    std::vector<double> y(e.n_paths());
    for (std::size_t p = 0; p < e.n_paths(); ++p) y[p] = (e.at(b, p, i) - e.at(a, p, i)) / h;
    return y;
}

inline std::vector<double> component_at(const PathEnsemble& e, int i, int k) {
    std::vector<double> y(e.n_paths());
    for (std::size_t p = 0; p < e.n_paths(); ++p) y[p] = e.at(k, p, i);
    return y;
}

// W^T g for the smoother that conditions on the state of e at step k.
inline std::vector<double> smoother_adjoint(const PathEnsemble& e, int k, const std::vector<double>& g, const EstimatorConfig& cfg) {
    const auto x = conditioning_states(e, k, cfg.condition_on);
    const int dc = cfg.condition_on.empty() ? e.dim() : static_cast<int>(cfg.condition_on.size());
    return knn_adjoint(x, dc, g, cfg.knn());
}

}  // namespace detail

/// r(t) = d/dt E[X Y] - E[DX Y + X D_*Y] for scalar components X = eX[ix], Y = eY[iy].
/// d/dt E[XY] is a central difference of the ensemble mean. The k-NN estimates are
/// linear smoothers, so E[DX Y] is rewritten exactly as a mean of raw quotients times
/// transposed-smoother weights; the s.e. is the bootstrap s.e. of those per-path terms,
/// which are independent across paths unlike the smoothed values themselves.
inline ResidualSeries product_rule_residual(const PathEnsemble& eX, int ix, const PathEnsemble& eY, int iy,
                                            const EstimatorConfig& cfg = {}, std::vector<int> steps = {}) {
    if (!(eX.grid() == eY.grid()) || eX.n_paths() != eY.n_paths()) throw InvalidArgument("product rule: ensembles differ in shape");
    if (steps.empty()) steps = interior_steps(eX.grid(), cfg.h_steps);
    const double dt = eX.grid().dt();
    const std::size_t n = eX.n_paths();
    const int h = cfg.h_steps;
    ResidualSeries r;
    std::vector<double> c(n);
    for (int k : steps) {
        if (k < 1 || k >= eX.grid().n_steps) throw InvalidArgument("product rule needs interior steps");
        detail::check_estimator(eX, k, cfg, true);
        detail::check_estimator(eY, k, cfg, false);
        const auto fx = detail::quotient(eX, ix, k, k + h);
        const auto by = detail::quotient(eY, iy, k - h, k);
        const auto wy = detail::smoother_adjoint(eX, k, detail::component_at(eY, iy, k), cfg);
        const auto wx = detail::smoother_adjoint(eY, k, detail::component_at(eX, ix, k), cfg);
        for (std::size_t p = 0; p < n; ++p) {
            const double xy_plus = eX.at(k + 1, p, ix) * eY.at(k + 1, p, iy);
            const double xy_minus = eX.at(k - 1, p, ix) * eY.at(k - 1, p, iy);
            c[p] = (xy_plus - xy_minus) / (2 * dt) - fx[p] * wy[p] - by[p] * wx[p];
        }
        r.steps.push_back(k);
        r.t.push_back(eX.grid().time(k));
        r.value.push_back(stats::mean(c));
        r.se.push_back(stats::bootstrap_se_of_mean(c));
    }
    return r;
}

/// E[Im(D X) Y] - E[X Im(D Y)] for scalar components, with the same per-path
/// decomposition and bootstrap s.e. as product_rule_residual.
inline ResidualSeries imaginary_pairing(const PathEnsemble& eX, int ix, const PathEnsemble& eY, int iy, const EstimatorConfig& cfg = {},
                                        std::vector<int> steps = {}) {
    if (!(eX.grid() == eY.grid()) || eX.n_paths() != eY.n_paths()) throw InvalidArgument("pairing: ensembles differ in shape");
    if (steps.empty()) steps = interior_steps(eX.grid(), cfg.h_steps);
    const std::size_t n = eX.n_paths();
    const int h = cfg.h_steps;
    ResidualSeries r;
    std::vector<double> c(n);
    for (int k : steps) {
        detail::check_estimator(eX, k, cfg, true);
        detail::check_estimator(eX, k, cfg, false);
        const auto fx = detail::quotient(eX, ix, k, k + h), bx = detail::quotient(eX, ix, k - h, k);
        const auto fy = detail::quotient(eY, iy, k, k + h), by = detail::quotient(eY, iy, k - h, k);
        const auto wy = detail::smoother_adjoint(eX, k, detail::component_at(eY, iy, k), cfg);
        const auto wx = detail::smoother_adjoint(eY, k, detail::component_at(eX, ix, k), cfg);
        for (std::size_t p = 0; p < n; ++p) c[p] = 0.5 * (fx[p] - bx[p]) * wy[p] - 0.5 * (fy[p] - by[p]) * wx[p];
        r.steps.push_back(k);
        r.t.push_back(eX.grid().time(k));
        r.value.push_back(stats::mean(c));
        r.se.push_back(stats::bootstrap_se_of_mean(c));
    }
    return r;
}

struct DifferentiabilityOptions {
    double grad_tol = 1e-8;   // on sup |d_j(a^{ij} p)|
    double diff_tol = 0.05;   // on mean |DX - D_*X|
    EstimatorConfig estimator;
    std::vector<int> steps;  // default: a few interior steps
};

struct DifferentiabilityReport {
    std::vector<double> sup_flux;       // per component: sup over visited states of |d_j(a^{ij} p)|
    std::vector<double> mean_abs_diff;  // per component: mean |D^X - D^_*X|
    std::vector<bool> flagged;          // Nelson differentiable per component
};

/// Criterion D X = D_* X: the flux d_j(a^{ij} p) vanishes along the process, checked
/// together with the direct estimator statistic.
inline DifferentiabilityReport nelson_differentiability_check(const PathEnsemble& e, const NelsonFields& nf,
                                                              DifferentiabilityOptions opts = {}) {
    const int d = e.dim();
    const std::size_t du = static_cast<std::size_t>(d);
    if (opts.steps.empty()) {
        const int n = e.grid().n_steps, h = std::max(1, opts.estimator.h_steps);
        for (int q = 1; q <= 4; ++q) opts.steps.push_back(h + (n - 2 * h) * q / 5);
    }
    DifferentiabilityReport rep;
    rep.sup_flux.assign(du, 0.0);
    rep.mean_abs_diff.assign(du, 0.0);
    auto a_expr = std::dynamic_pointer_cast<const ExprField>(nf.a);
    FieldPtr div_a;
    if (a_expr) {
        std::vector<fieldexpr::NodePtr> div;
        for (int i = 0; i < d; ++i) {
            fieldexpr::NodePtr acc = fieldexpr::constant(0.0);
            for (int j = 0; j < d; ++j)
                acc = fieldexpr::add(acc, fieldexpr::differentiate(a_expr->expr().component(static_cast<std::size_t>(i * d + j)), j + 1));
            div.push_back(acc);
        }
        div_a = make_field(FieldExpr(d, std::move(div), true));
    }
    const bool zero_a = detail::is_zero_field(nf.a);
    if (!zero_a && (!nf.density || !nf.logp_grad || !div_a))
        throw InvalidArgument("differentiability check needs the density and an expression diffusion");
    std::vector<double> a(du * du), dv(du), g(du);
    for (int k : opts.steps) {
        const double t = e.grid().time(k);
        if (!zero_a)
            for (std::size_t p = 0; p < e.n_paths(); ++p) {
                auto x = e.state(k, p);
                const double pv = nf.density->values(t, x)[0];
                if (pv <= nf.density_floor) continue;
                nf.a->eval(t, x, a);
                div_a->eval(t, x, dv);
                nf.logp_grad->eval(t, x, g);
                for (std::size_t i = 0; i < du; ++i) {
                    double c = dv[i];
                    for (std::size_t j = 0; j < du; ++j) c += a[i * du + j] * g[j];
                    rep.sup_flux[i] = std::max(rep.sup_flux[i], std::abs(pv * c));
                }
            }
    }
    auto fwd = forward_derivative(e, opts.steps, opts.estimator);
    auto bwd = backward_derivative(e, opts.steps, opts.estimator);
    const double count = static_cast<double>(opts.steps.size() * e.n_paths());
    for (std::size_t s = 0; s < opts.steps.size(); ++s)
        for (std::size_t p = 0; p < e.n_paths(); ++p)
            for (int i = 0; i < d; ++i)
                rep.mean_abs_diff[static_cast<std::size_t>(i)] += std::abs(fwd.at(s, p, i).real() - bwd.at(s, p, i).real()) / count;
    for (std::size_t i = 0; i < du; ++i) rep.flagged.push_back(rep.sup_flux[i] <= opts.grad_tol && rep.mean_abs_diff[i] <= opts.diff_tol);
    return rep;
}

}  // namespace stochemb
