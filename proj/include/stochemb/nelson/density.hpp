#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/stats.hpp"
#include "stochemb/sde/ensemble.hpp"

namespace stochemb {

/// Kernel density estimate of one coordinate on a uniform grid, with the exact
/// first and second derivatives of the estimate at the nodes.
struct DensityEstimate {
    double t = 0.0;
    double x0 = 0.0;
    double dx = 1.0;
    std::vector<double> values;
    std::vector<double> slope;
    std::vector<double> curvature;
    double bandwidth = 0.0;
    std::size_t n_samples = 0;
    bool point_mass = false;
    double point_location = 0.0;

    std::size_t size() const { return values.size(); }
    double x(std::size_t k) const { return x0 + dx * static_cast<double>(k); }
    double x_max() const { return x(values.size() - 1); }
    double integral() const { return stats::trapezoid<double>(values, dx); }
    double max_value() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
};

struct KdeOptions {
    double bandwidth = 0.0;  // 0: Silverman's rule
    std::size_t grid_points = 801;
    std::optional<double> lo, hi;  // default: sample range padded by 4 sd
};

/// Silverman's rule of thumb 0.9 min(sd, IQR/1.34) n^(-1/5).
inline double silverman_bandwidth(std::span<const double> xs) {
    if (xs.size() < 2) throw InvalidArgument("bandwidth needs at least two samples");
    const double sd = std::sqrt(stats::variance(xs));
    std::vector<double> s(xs.begin(), xs.end());
    const auto q = [&](double f) {
        const std::size_t k = static_cast<std::size_t>(f * static_cast<double>(s.size() - 1));
        std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k), s.end());
        return s[k];
    };
    const double iqr = q(0.75) - q(0.25);
    double spread = sd;
    if (iqr > 0) spread = std::min(sd, iqr / 1.34);
    return 0.9 * spread * std::pow(static_cast<double>(xs.size()), -0.2);
}

/// Gaussian KDE of samples evaluated on the grid x0 + k dx, k < n.
inline DensityEstimate kde_on_grid(std::span<const double> xs, double x0, double dx, std::size_t n, double h, double t = 0.0) {
    if (xs.empty()) throw InvalidArgument("density of empty sample");
    if (!(h > 0.0)) throw InvalidArgument("bandwidth must be positive");
    DensityEstimate d;
    d.t = t;
    d.x0 = x0;
    d.dx = dx;
    d.bandwidth = h;
    d.n_samples = xs.size();
    d.values.assign(n, 0.0);
    d.slope.assign(n, 0.0);
    d.curvature.assign(n, 0.0);
    std::vector<double> s(xs.begin(), xs.end());
    std::sort(s.begin(), s.end());
    const double cut = 9.0 * h;  // kernel tail beyond 9h is below 1e-17 relative
    const double norm = 1.0 / (static_cast<double>(s.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t k = 0; k < n; ++k) {
        const double x = d.x(k);
        auto lo = std::lower_bound(s.begin(), s.end(), x - cut);
        auto hi = std::upper_bound(lo, s.end(), x + cut);
        stats::Accumulator a0, a1, a2;
        for (auto it = lo; it != hi; ++it) {
            const double u = (x - *it) / h;
            const double w = std::exp(-0.5 * u * u);
            a0.add(w);
            a1.add(-u * w);
            a2.add((u * u - 1.0) * w);
        }
        d.values[k] = norm * a0.sum();
        d.slope[k] = norm * a1.sum() / h;
        d.curvature[k] = norm * a2.sum() / (h * h);
    }
    return d;
}

/// KDE of coordinate `component` at time index t_index. A zero-variance sample
/// returns a point-mass flag and no kernel estimate.
inline DensityEstimate estimate_density(const PathEnsemble& e, int t_index, KdeOptions opts = {}, int component = 0) {
    if (e.n_paths() < 100) throw InvalidArgument("density estimation needs at least 100 paths");
    if (t_index < 0 || t_index > e.grid().n_steps) throw InvalidArgument("t_index outside the grid");
    const std::vector<double> xs = e.component(t_index, component);
    const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
    if (*mn == *mx) {
        DensityEstimate d;
        d.t = e.grid().time(t_index);
        d.point_mass = true;
        d.point_location = *mn;
        d.n_samples = xs.size();
        return d;
    }
    const double h = opts.bandwidth > 0 ? opts.bandwidth : silverman_bandwidth(xs);
    const double sd = std::sqrt(stats::variance(xs));
    const double lo = opts.lo.value_or(*mn - 4 * sd);
    const double hi = opts.hi.value_or(*mx + 4 * sd);
    if (!(hi > lo) || opts.grid_points < 2) throw InvalidArgument("empty density grid");
    const double dx = (hi - lo) / static_cast<double>(opts.grid_points - 1);
    return kde_on_grid(xs, lo, dx, opts.grid_points, h, e.grid().time(t_index));
}

/// Product-Gaussian KDE at one point, bandwidth per coordinate (multi-dimensional samples, point-major).
inline double kde_at(std::span<const double> samples, int dim, std::span<const double> point, std::span<const double> h) {
    const std::size_t d = static_cast<std::size_t>(dim);
    const std::size_t n = samples.size() / d;
    double norm = 1.0;
    for (std::size_t i = 0; i < d; ++i) norm *= h[i] * std::sqrt(2.0 * std::numbers::pi);
    stats::Accumulator acc;
    for (std::size_t p = 0; p < n; ++p) {
        double q = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const double u = (point[i] - samples[p * d + i]) / h[i];
            q += u * u;
        }
        acc.add(std::exp(-0.5 * q));
    }
    return acc.sum() / (static_cast<double>(n) * norm);
}

/// L1 distance between a density estimate and a density function on the estimate's grid.
template <class F>
double l1_distance(const DensityEstimate& d, F&& p) {
    std::vector<double> diff(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) diff[k] = std::abs(d.values[k] - p(d.x(k)));
    return stats::trapezoid<double>(diff, d.dx);
}

}  // namespace stochemb
