#pragma once

// From wave functions to diffusions (K = sigma^2): with psi'/psi = (R' + i S') / sigma^2,
//   b = S' + R' = sigma^2 (Re + Im)(psi'/psi),   b_* = S' - R',   p = |psi|^2,
// and the checks tying the simulated ensemble back to the wave function.

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/rng.hpp"
#include "stochemb/fieldexpr/tabulated.hpp"
#include "stochemb/nelson/density.hpp"
#include "stochemb/nelson/fields.hpp"
#include "stochemb/schrodinger/residual.hpp"
#include "stochemb/schrodinger/wave.hpp"
#include "stochemb/sde/ensemble.hpp"
#include "stochemb/sde/model.hpp"

namespace stochemb::schrodinger {

struct BridgeOptions {
    double floor_rel = 1e-6;  // |psi| floor relative to max |psi|
};

namespace detail {

// Log-derivatives l1 = psi'/psi and l2 = psi''/psi on the covered node range [first, last].
struct LogDerivatives {
    std::vector<cplx> l1, l2;
    std::size_t first = 0, last = 0;
};

inline LogDerivatives log_derivatives(const WaveFunction& w, double floor_rel) {
    const std::size_t n = w.values.size();
    const double floor = floor_rel * w.max_modulus();
    std::size_t peak = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (std::abs(w.values[k]) > std::abs(w.values[peak])) peak = k;
    if (!(std::abs(w.values[peak]) > 0)) throw DomainError("wave function vanishes on the whole grid");
    LogDerivatives d;
    d.first = d.last = peak;
    while (d.first > 0 && std::abs(w.values[d.first - 1]) >= floor) --d.first;
    while (d.last + 1 < n && std::abs(w.values[d.last + 1]) >= floor) ++d.last;
    // Dirichlet walls: keep the stencil inside the grid.
    if (w.grid.bc == Boundary::Dirichlet) {
        d.first = std::max<std::size_t>(d.first, 2);
        d.last = std::min(d.last, n - 3);
        if (d.first > d.last) throw DomainError("covered region is too close to the walls");
    }
    d.l1.assign(n, cplx{});
    d.l2.assign(n, cplx{});
    for (std::size_t k = d.first; k <= d.last; ++k) {
        const auto kk = static_cast<std::ptrdiff_t>(k);
        d.l1[k] = detail::d1(w, kk) / w.values[k];
        d.l2[k] = detail::d2(w, kk) / w.values[k];
    }
    return d;
}

// Nodal values and slopes of f = c * (a Re + b Im)(psi'/psi), clamped outside the covered range.
inline TabulatedField1D::Snapshot log_derivative_snapshot(const WaveFunction& w, const LogDerivatives& d, double c, double a, double b) {
    const std::size_t n = w.values.size();
    TabulatedField1D::Snapshot s{w.t, std::vector<double>(n), std::vector<double>(n, 0.0)};
    auto comb = [&](cplx z) { return c * (a * z.real() + b * z.imag()); };
    for (std::size_t k = d.first; k <= d.last; ++k) {
        s.value[k] = comb(d.l1[k]);
        s.slope[k] = comb(d.l2[k] - d.l1[k] * d.l1[k]);  // (psi'/psi)' = psi''/psi - (psi'/psi)^2
    }
    for (std::size_t k = 0; k < d.first; ++k) s.value[k] = s.value[d.first];
    for (std::size_t k = d.last + 1; k < n; ++k) s.value[k] = s.value[d.last];
    return s;
}

inline std::shared_ptr<const TabulatedField1D> tabulate(const std::vector<WaveFunction>& ws, double c, double a, double b, double floor_rel) {
    std::vector<TabulatedField1D::Snapshot> snaps;
    for (const auto& w : ws) snaps.push_back(log_derivative_snapshot(w, log_derivatives(w, floor_rel), c, a, b));
    return std::make_shared<const TabulatedField1D>(ws.front().grid.x_first(), ws.front().grid.dx, std::move(snaps));
}

}  // namespace detail

/// Drift b(t, x) = sigma^2 (Re + Im)(psi'/psi) from the snapshots, Hermite in x, linear in t.
inline FieldPtr wave_to_drift(const std::vector<WaveFunction>& snaps, double sigma, const BridgeOptions& opts = {}) {
    if (snaps.empty()) throw InvalidArgument("no wave snapshots");
    return detail::tabulate(snaps, sigma * sigma, 1.0, 1.0, opts.floor_rel);
}
inline FieldPtr wave_to_drift(const WaveFunction& psi, double sigma, const BridgeOptions& opts = {}) {
    return wave_to_drift(std::vector<WaveFunction>{psi}, sigma, opts);
}
inline FieldPtr wave_to_drift(const WaveTrajectory& tr, const BridgeOptions& opts = {}) {
    return wave_to_drift(tr.snapshots, tr.sigma, opts);
}

/// Density |psi|^2 with log-gradient 2 Re(psi'/psi), as a tabulated DensitySource.
inline DensitySource wave_density(const std::vector<WaveFunction>& snaps, const BridgeOptions& opts = {}) {
    if (snaps.empty()) throw InvalidArgument("no wave snapshots");
    std::vector<TabulatedField1D::Snapshot> ps;
    double pmax = 0;
    for (const auto& w : snaps) {
        const std::size_t n = w.values.size();
        TabulatedField1D::Snapshot s{w.t, w.density(), std::vector<double>(n)};
        for (std::size_t k = 0; k < n; ++k) s.slope[k] = 2 * std::real(std::conj(w.values[k]) * detail::d1(w, static_cast<std::ptrdiff_t>(k)));
        pmax = std::max(pmax, *std::max_element(s.value.begin(), s.value.end()));
        ps.push_back(std::move(s));
    }
    const WaveGrid& g = snaps.front().grid;
    DensitySource src;
    src.density = std::make_shared<const TabulatedField1D>(g.x_first(), g.dx, std::move(ps));
    src.logp_grad = detail::tabulate(snaps, 2.0, 1.0, 0.0, opts.floor_rel);
    src.max_density = pmax;
    src.coverage = std::make_pair(g.x_first(), g.x(g.n - 1));
    return src;
}

/// dX = b dt + sigma dW with the wave drift, started from `initial`.
inline DiffusionModel bridge_model(const WaveTrajectory& tr, InitialLaw initial, const BridgeOptions& opts = {}) {
    DiffusionModel m;
    m.dim = 1;
    m.drift = wave_to_drift(tr, opts);
    m.diffusion = make_field(FieldExpr::scalar(1, fieldexpr::constant(tr.sigma)));
    m.initial = std::move(initial);
    m.tag = "schrodinger-bridge";
    m.validate();
    return m;
}

/// Nelson fields of the bridge: b from the wave, b_* = b - sigma^2 (log p)' with p = |psi|^2.
/// b_* is S' - R' with both log-derivatives clamped the same way outside the covered range.
inline NelsonFields wave_to_fields(const WaveTrajectory& tr, const BridgeOptions& opts = {}) {
    DiffusionModel m = bridge_model(tr, PointMass{{0.0}}, opts);
    NelsonFields nf;
    nf.dim = 1;
    nf.b = m.drift;
    nf.b_star = detail::tabulate(tr.snapshots, tr.sigma * tr.sigma, -1.0, 1.0, opts.floor_rel);
    auto src = wave_density(tr.snapshots, opts);
    nf.logp_grad = src.logp_grad;
    nf.density = src.density;
    nf.a = make_field(FieldExpr::scalar(1, fieldexpr::constant(tr.sigma * tr.sigma)));
    return nf;
}

/// n i.i.d. draws from |psi|^2 by inverse CDF (piecewise-linear density between nodes).
inline SampleLaw sample_initial(const WaveFunction& psi, std::size_t n, std::uint64_t seed) {
    const auto p = psi.density();
    const std::size_t m = p.size();
    std::vector<double> cdf(m, 0.0);
    for (std::size_t k = 1; k < m; ++k) cdf[k] = cdf[k - 1] + 0.5 * (p[k] + p[k - 1]) * psi.grid.dx;
    if (!(cdf.back() > 0)) throw DomainError("wave function has no mass");
    Engine eng = make_stream(seed, 0x5eed0fULL);
    std::uniform_real_distribution<double> unif(0.0, cdf.back());
    SampleLaw law;
    law.dim = 1;
    law.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = unif(eng);
        std::size_t k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        k = std::clamp<std::size_t>(k, 1, m - 1);
        // Solve the quadratic for the linear density on [x_{k-1}, x_k].
        const double a = p[k - 1], b = p[k], h = psi.grid.dx, r = u - cdf[k - 1];
        double s;
        const double slope = (b - a) / h;
        if (std::abs(slope) < 1e-300)
            s = a > 0 ? r / a : 0.5 * h;
        else
            s = (-a + std::sqrt(std::max(0.0, a * a + 2 * slope * r))) / slope;
        law.points[i] = psi.grid.x(k - 1) + std::clamp(s, 0.0, h);
    }
    return law;
}

struct DensityMatch {
    double t = 0.0;
    double l1 = 0.0, linf = 0.0, ks = 0.0;
    bool degenerate = false;  // point-mass ensemble
};

/// Distances between the ensemble KDE at time t and |psi(t)|^2, both on the wave grid.
inline DensityMatch density_match(const PathEnsemble& e, const WaveTrajectory& tr, double t, KdeOptions kde = {}) {
    const int k = e.grid().index_of(t);
    const auto q = tr.density_at(t);
    const WaveGrid& g = tr.grid();
    DensityMatch m;
    m.t = t;
    const auto xs = e.component(k, 0);
    const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
    if (*mn == *mx) {
        // |delta - q| has mass 2 when q has no atom; KS is the CDF jump at the atom.
        m.degenerate = true;
        m.l1 = 2.0;
        m.linf = *std::max_element(q.begin(), q.end());
        double below = 0;
        for (std::size_t j = 0; j < g.n; ++j)
            if (g.x(j) < *mn) below += q[j] * g.dx;
        m.ks = std::max(below, 1.0 - below);
        return m;
    }
    const double h = kde.bandwidth > 0 ? kde.bandwidth : silverman_bandwidth(xs);
    const auto d = kde_on_grid(xs, g.x_first(), g.dx, g.n, h, t);
    double cp = 0, cq = 0;
    for (std::size_t j = 0; j < g.n; ++j) {
        const double diff = std::abs(d.values[j] - q[j]);
        m.l1 += diff * g.dx;
        m.linf = std::max(m.linf, diff);
        cp += d.values[j] * g.dx;
        cq += q[j] * g.dx;
        m.ks = std::max(m.ks, std::abs(cp - cq));
    }
    return m;
}

struct GradientDriftReport {
    double sup_G = 0.0;    // sup |d_j b_i - d_i b_j|
    double sup_div = 0.0;  // sup_i |sum_j d_j (p G_ij)|
    bool gradient = true;  // G vanishes on the grid (to 1e-12 relative)
    std::size_t points = 0;
};

/// G_ij = d_j b_i - d_i b_j and div(p G_i) on a region grid; needs an expression drift.
inline GradientDriftReport gradient_drift_check(const DiffusionModel& model, const FieldExpr& p, const Region& region) {
    model.validate();
    GradientDriftReport rep;
    const int d = model.dim;
    if (d == 1) return rep;
    auto ef = std::dynamic_pointer_cast<const ExprField>(model.drift);
    if (!ef) throw InvalidArgument("gradient drift check needs an expression drift");
    if (p.dim() != d || p.arity() != 1) throw InvalidArgument("density must be a scalar field of the state");
    using namespace fieldexpr;
    const auto& b = ef->expr();
    std::vector<NodePtr> gij, divs;
    for (int i = 0; i < d; ++i) {
        NodePtr div = constant(0.0);
        for (int j = 0; j < d; ++j) {
            NodePtr gg = sub(differentiate(b.component(static_cast<std::size_t>(i)), j + 1),
                             differentiate(b.component(static_cast<std::size_t>(j)), i + 1));
            gij.push_back(gg);
            div = add(div, differentiate(mul(p.component(0), gg), j + 1));
        }
        divs.push_back(div);
    }
    const FieldExpr G = FieldExpr::vector(d, gij), Dv = FieldExpr::vector(d, divs);
    const int m = region.points_per_dim > 1 ? region.points_per_dim : (d == 2 ? 101 : 41);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> x(static_cast<std::size_t>(d));
    double bscale = 0;
    for (double t : region.times) {
        std::fill(idx.begin(), idx.end(), 0);
        for (;;) {
            for (int i = 0; i < d; ++i) {
                const auto iu = static_cast<std::size_t>(i);
                x[iu] = region.lo[iu] + (region.hi[iu] - region.lo[iu]) * idx[iu] / (m - 1);
            }
            for (double v : G.values(t, x)) rep.sup_G = std::max(rep.sup_G, std::abs(v));
            for (double v : Dv.values(t, x)) rep.sup_div = std::max(rep.sup_div, std::abs(v));
            for (auto v : b.values(t, x)) bscale = std::max(bscale, std::abs(v));
            ++rep.points;
            int c = 0;
            while (c < d && ++idx[static_cast<std::size_t>(c)] == m) idx[static_cast<std::size_t>(c++)] = 0;
            if (c == d) break;
        }
    }
    rep.gradient = rep.sup_G <= 1e-12 * std::max(1.0, bscale);
    return rep;
}

}  // namespace stochemb::schrodinger
