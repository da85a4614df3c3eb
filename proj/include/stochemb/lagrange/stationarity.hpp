#pragma once

// First-variation test of the action: J(X + eps Z) - J(X) for a deterministic C^1
// variation Z(t) with Z(a) = Z(b) = 0. Such Z is Nelson differentiable with
// D(X + eps Z) = D X + eps Z', so no re-estimation is needed.

#include <cmath>
#include <complex>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/stats.hpp"
#include "stochemb/lagrange/lagrangian.hpp"

namespace stochemb::lagrange {

struct StationarityReport {
    std::vector<double> epsilons;
    std::vector<cplx> delta_J;
    cplx c1{}, c2{};
    double se_c1 = 0.0;  // bootstrap s.e. of c1, real and imaginary parts combined
    double z() const { return se_c1 > 0 ? std::abs(c1) / se_c1 : (std::abs(c1) == 0 ? 0.0 : INFINITY); }
    bool stationary(double n_se = 3.0) const { return z() <= n_se; }
};

/// `variation` is a vector field of t only (arity d).
inline StationarityReport stationarity_check(const PathEnsemble& e, const LagrangianSpec& L, const ComplexProcessSample& dX,
                                             const FieldExpr& variation, const std::vector<double>& epsilons) {
    L.validate();
    const int d = e.dim();
    if (variation.dim() != d || static_cast<int>(variation.arity()) != d)
        throw InvalidArgument("variation must be a d-component field");
    for (const auto& c : variation.components())
        if (fieldexpr::max_var_index(c) > 0) throw InvalidArgument("variation must depend on t only");
    if (epsilons.size() < 2) throw InvalidArgument("stationarity check needs at least two epsilons");
    if (dX.dim() != d || dX.n_paths() != e.n_paths()) throw InvalidArgument("D X sample does not match the ensemble");
    const std::vector<double> zero(static_cast<std::size_t>(d), 0.0);
    const auto& g = e.grid();
    for (double tb : {g.t0, g.t1})
        for (double z : variation.values(tb, zero))
            if (std::abs(z) > 1e-9) throw InvalidArgument("variation must vanish at the end points");
    const FieldExpr zdot = fieldexpr::dt_field(variation);
    const double h = detail::step_spacing(dX);
    const std::size_t n = e.n_paths(), ne = epsilons.size(), du = static_cast<std::size_t>(d);
    const std::size_t ns = dX.n_slices();

    // Per-path integrals of L(X + eps Z, D X + eps Z') - L(X, D X).
    std::vector<cplx> dj(n * ne, cplx{});
    std::vector<double> xs(du);
    std::vector<cplx> vs(du);
    for (std::size_t s = 0; s < ns; ++s) {
        const double t = g.time(dX.steps()[s]);
        const double w = (s == 0 || s + 1 == ns) ? 0.5 * h : h;
        const auto z = variation.values(t, zero);
        const auto zd = zdot.values(t, zero);
        for (std::size_t p = 0; p < n; ++p) {
            auto x = e.state(dX.steps()[s], p);
            auto v = dX.state(s, p);
            const cplx base = L.value(t, x, v);
            for (std::size_t k = 0; k < ne; ++k) {
                for (std::size_t i = 0; i < du; ++i) {
                    xs[i] = x[i] + epsilons[k] * z[i];
                    vs[i] = v[i] + epsilons[k] * zd[i];
                }
                dj[p * ne + k] += w * (L.value(t, xs, vs) - base);
            }
        }
    }
    StationarityReport rep;
    rep.epsilons = epsilons;
    // The fit is linear in the data, so c1 is the mean of per-path fitted c1.
    std::vector<double> c1_re(n), c1_im(n), yr(ne), yi(ne);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t k = 0; k < ne; ++k) {
            yr[k] = dj[p * ne + k].real();
            yi[k] = dj[p * ne + k].imag();
        }
        c1_re[p] = stats::fit_linear_quadratic(epsilons, yr).c1;
        c1_im[p] = stats::fit_linear_quadratic(epsilons, yi).c1;
    }
    std::vector<double> mr(ne), mi(ne);
    for (std::size_t k = 0; k < ne; ++k) {
        stats::Accumulator ar, ai;
        for (std::size_t p = 0; p < n; ++p) {
            ar.add(dj[p * ne + k].real());
            ai.add(dj[p * ne + k].imag());
        }
        mr[k] = ar.sum() / static_cast<double>(n);
        mi[k] = ai.sum() / static_cast<double>(n);
        rep.delta_J.emplace_back(mr[k], mi[k]);
    }
    const auto fr = stats::fit_linear_quadratic(epsilons, mr), fi = stats::fit_linear_quadratic(epsilons, mi);
    rep.c1 = {fr.c1, fi.c1};
    rep.c2 = {fr.c2, fi.c2};
    const double sr = stats::bootstrap_se_of_mean(c1_re), si = stats::bootstrap_se_of_mean(c1_im);
    rep.se_c1 = std::sqrt(sr * sr + si * si);
    return rep;
}

}  // namespace stochemb::lagrange
