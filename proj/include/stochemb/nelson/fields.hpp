#pragma once

// Closed-form Nelson fields of a diffusion with known density:
//   b_* = b - (1/p) d_j(a^{ij} p) = b - d_j a^{ij} - a^{ij} d_j log p,
// with the correction set to zero where p is below the density floor.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/fieldexpr/field.hpp"
#include "stochemb/fieldexpr/tabulated.hpp"
#include "stochemb/nelson/density.hpp"
#include "stochemb/sde/model.hpp"

namespace stochemb {

/// Axis-aligned box with a sampling resolution, used to locate max p.
struct Region {
    std::vector<double> lo, hi;
    int points_per_dim = 0;  // 0: 201 in 1D, 101 in 2D, 41 in 3D
    std::vector<double> times{0.0};
};

/// Density p with its log-gradient, both as jet-capable fields.
struct DensitySource {
    FieldPtr density;    // scalar
    FieldPtr logp_grad;  // arity d
    double max_density = 0.0;
    std::optional<std::pair<double, double>> coverage;  // tabulated 1D sources
};

inline double max_on_region(const Field& p, const Region& r) {
    const int d = p.dim();
    if (r.lo.size() != static_cast<std::size_t>(d) || r.hi.size() != static_cast<std::size_t>(d))
        throw InvalidArgument("region dimension mismatch");
    const int m = r.points_per_dim > 1 ? r.points_per_dim : (d == 1 ? 201 : d == 2 ? 101 : 41);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> x(static_cast<std::size_t>(d));
    double best = 0.0;
    for (double t : r.times) {
        std::fill(idx.begin(), idx.end(), 0);
        for (;;) {
            for (int i = 0; i < d; ++i)
                x[static_cast<std::size_t>(i)] = r.lo[static_cast<std::size_t>(i)] +
                    (r.hi[static_cast<std::size_t>(i)] - r.lo[static_cast<std::size_t>(i)]) * idx[static_cast<std::size_t>(i)] / (m - 1);
            try {
                best = std::max(best, p.values(t, x)[0]);
            } catch (const DomainError&) {
            }
            int c = 0;
            while (c < d && ++idx[static_cast<std::size_t>(c)] == m) idx[static_cast<std::size_t>(c++)] = 0;
            if (c == d) break;
        }
    }
    return best;
}

/// Exact density expression; the log-gradient is differentiated symbolically.
inline DensitySource exact_density(const FieldExpr& p, const Region& region) {
    if (p.arity() != 1) throw InvalidArgument("density must be a scalar field");
    using namespace fieldexpr;
    DensitySource s;
    s.density = make_field(p);
    s.logp_grad = make_field(grad_field(FieldExpr::scalar(p.dim(), call(Func::Log, p.component(0)))));
    s.max_density = max_on_region(*s.density, region);
    if (!(s.max_density > 0)) throw InvalidArgument("density vanishes on the region");
    return s;
}

/// Tabulated 1D density and log-gradient from KDE snapshots (one per time, increasing).
inline DensitySource density_from_estimates(const std::vector<DensityEstimate>& ds, double floor_rel = 1e-12) {
    if (ds.empty()) throw InvalidArgument("no density snapshots");
    std::vector<TabulatedField1D::Snapshot> ps, gs;
    double pmax = 0;
    for (const auto& d : ds) {
        if (d.point_mass) throw InvalidArgument("density estimate is a point mass");
        if (d.x0 != ds[0].x0 || d.dx != ds[0].dx || d.size() != ds[0].size())
            throw InvalidArgument("density snapshots must share a grid");
        pmax = std::max(pmax, d.max_value());
    }
    const double floor = floor_rel * pmax;
    for (const auto& d : ds) {
        TabulatedField1D::Snapshot p{d.t, d.values, d.slope}, g{d.t, {}, {}};
        g.value.resize(d.size());
        g.slope.resize(d.size());
        for (std::size_t k = 0; k < d.size(); ++k) {
            const double v = d.values[k];
            if (v > floor) {
                g.value[k] = d.slope[k] / v;
                g.slope[k] = (d.curvature[k] * v - d.slope[k] * d.slope[k]) / (v * v);
            }
        }
        ps.push_back(std::move(p));
        gs.push_back(std::move(g));
    }
    DensitySource s;
    s.density = std::make_shared<const TabulatedField1D>(ds[0].x0, ds[0].dx, std::move(ps));
    s.logp_grad = std::make_shared<const TabulatedField1D>(ds[0].x0, ds[0].dx, std::move(gs));
    s.max_density = pmax;
    s.coverage = std::make_pair(ds[0].x0, ds[0].x_max());
    return s;
}

inline DensitySource density_from_estimate(const DensityEstimate& d) { return density_from_estimates({d}); }

/// b_* as a field: b_i - [d_j a_ij + a_ij d_j log p] where p > floor, b_i elsewhere.
class BackwardDriftField final : public Field {
public:
    BackwardDriftField(FieldPtr b, FieldPtr div_a, FieldPtr a, FieldPtr logp_grad, FieldPtr density, double floor)
        : b_(std::move(b)), div_a_(std::move(div_a)), a_(std::move(a)), lg_(std::move(logp_grad)), p_(std::move(density)),
          floor_(floor) {}
    int dim() const override { return b_->dim(); }
    int arity() const override { return b_->arity(); }

    void eval(double t, std::span<const double> x, std::span<double> out) const override {
        b_->eval(t, x, out);
        if (!p_ || p_->values(t, x)[0] <= floor_) return;
        const std::size_t d = out.size();
        const auto dv = div_a_->values(t, x);
        const auto a = a_->values(t, x);
        const auto g = lg_->values(t, x);
        for (std::size_t i = 0; i < d; ++i) {
            double c = dv[i];
            for (std::size_t j = 0; j < d; ++j) c += a[i * d + j] * g[j];
            out[i] -= c;
        }
    }

    void eval_jet(const Jet& t, std::span<const Jet> x, std::span<Jet> out) const override {
        b_->eval_jet(t, x, out);
        if (!p_) return;
        std::vector<double> xv(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) xv[i] = x[i].v;
        if (p_->values(t.v, xv)[0] <= floor_) return;
        const std::size_t d = out.size();
        std::vector<Jet> dv(d), a(d * d), g(d);
        div_a_->eval_jet(t, x, dv);
        a_->eval_jet(t, x, a);
        lg_->eval_jet(t, x, g);
        for (std::size_t i = 0; i < d; ++i) {
            Jet c = dv[i];
            for (std::size_t j = 0; j < d; ++j) c += a[i * d + j] * g[j];
            out[i] -= c;
        }
    }

private:
    FieldPtr b_, div_a_, a_, lg_, p_;
    double floor_;
};

/// Forward drift b, backward drift b_*, log-density gradient and a = sigma sigma^T.
struct NelsonFields {
    int dim = 1;
    FieldPtr b;
    FieldPtr b_star;
    FieldPtr logp_grad;  // null for zero diffusion without density
    FieldPtr a;          // d*d, row-major
    FieldPtr density;    // may be null
    double density_floor = 0.0;

    /// Real and imaginary parts of the stochastic velocity field g_mu = (b+b_*)/2 + i mu (b-b_*)/2.
    FieldPtr velocity_re() const { return combine({0.5, 0.5}, {b, b_star}); }
    FieldPtr velocity_im(int mu) const { return combine({0.5 * mu, -0.5 * mu}, {b, b_star}); }
};

namespace detail {
inline bool is_zero_field(const FieldPtr& f) {
    auto ef = std::dynamic_pointer_cast<const ExprField>(f);
    if (!ef) return false;
    for (std::size_t i = 0; i < ef->expr().arity(); ++i)
        if (!fieldexpr::is_const(ef->expr().component(i), 0.0)) return false;
    return true;
}
}  // namespace detail

/// Nelson fields of a model whose density is given. Pass no density only for
/// zero diffusion, where b_* = b exactly.
inline NelsonFields analytic_nelson(const DiffusionModel& model, const std::optional<DensitySource>& density,
                                    double floor_rel = 1e-12, std::optional<std::pair<double, double>> region = std::nullopt) {
    model.validate();
    auto a = diffusion_matrix_expr(model);
    if (!a) throw InvalidArgument("analytic Nelson fields need an expression diffusion field");
    NelsonFields nf;
    nf.dim = model.dim;
    nf.b = model.drift;
    nf.a = a;
    if (detail::is_zero_field(a)) {
        nf.b_star = model.drift;
        if (density) {
            nf.logp_grad = density->logp_grad;
            nf.density = density->density;
        }
        return nf;
    }
    if (!density) throw InvalidArgument("nonzero diffusion needs a density to compute the backward drift");
    if (density->logp_grad->arity() != model.dim || density->density->dim() != model.dim)
        throw InvalidArgument("density dimension does not match the model");
    if (region && density->coverage &&
        (region->first < density->coverage->first || region->second > density->coverage->second))
        throw InvalidArgument("density grid does not cover the requested region");
    const int d = model.dim;
    std::vector<fieldexpr::NodePtr> div;
    for (int i = 0; i < d; ++i) {
        fieldexpr::NodePtr acc = fieldexpr::constant(0.0);
        for (int j = 0; j < d; ++j)
            acc = fieldexpr::add(acc, fieldexpr::differentiate(a->expr().component(static_cast<std::size_t>(i * d + j)), j + 1));
        div.push_back(acc);
    }
    auto div_a = make_field(FieldExpr(d, std::move(div), true));
    nf.density_floor = floor_rel * density->max_density;
    nf.density = density->density;
    nf.logp_grad = density->logp_grad;
    nf.b_star = std::make_shared<const BackwardDriftField>(model.drift, div_a, a, density->logp_grad, density->density,
                                                           nf.density_floor);
    return nf;
}

}  // namespace stochemb
