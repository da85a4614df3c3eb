#pragma once

// Residual of the nonlinear Schrodinger equation along a wave trajectory,
//   i K d_t psi + K (K - sigma^2) / 2 (psi')^2 / psi + K sigma^2 / 2 psi'' - U psi,
// with fourth-order central differences in t and x. At K = sigma^2 the middle
// coefficient is exactly zero and that term is skipped.

#include <cmath>
#include <complex>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/schrodinger/wave.hpp"

namespace stochemb::schrodinger {

inline double nonlinear_coefficient(double K, double sigma) { return K * (K - sigma * sigma) / 2; }

struct ResidualOptions {
    double floor_rel = 1e-6;  // mask nodes where |psi| < floor_rel max|psi|
};

struct ResidualField {
    std::vector<double> t;
    std::vector<double> x;
    std::vector<std::vector<cplx>> values;  // [time][node]
    std::vector<std::vector<bool>> mask;    // true where evaluated
    double coefficient = 0.0;               // K (K - sigma^2) / 2

    double max_abs() const {
        double m = 0;
        for (std::size_t i = 0; i < values.size(); ++i)
            for (std::size_t k = 0; k < values[i].size(); ++k)
                if (mask[i][k]) m = std::max(m, std::abs(values[i][k]));
        return m;
    }
    /// max over times of the discrete L2 norm over evaluated nodes.
    double max_l2(double dx) const {
        double m = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            double s = 0;
            for (std::size_t k = 0; k < values[i].size(); ++k)
                if (mask[i][k]) s += std::norm(values[i][k]);
            m = std::max(m, std::sqrt(s * dx));
        }
        return m;
    }
};

namespace detail {

inline cplx d1(const WaveFunction& w, std::ptrdiff_t k) {
    return (-w.at(k + 2) + 8.0 * w.at(k + 1) - 8.0 * w.at(k - 1) + w.at(k - 2)) / (12 * w.grid.dx);
}
inline cplx d2(const WaveFunction& w, std::ptrdiff_t k) {
    return (-w.at(k + 2) + 16.0 * w.at(k + 1) - 30.0 * w.at(k) + 16.0 * w.at(k - 1) - w.at(k - 2)) / (12 * w.grid.dx * w.grid.dx);
}

}  // namespace detail

/// Residual at every snapshot with two neighbours on each side; snapshots must be equally spaced.
/// Dirichlet grids skip the two nodes next to each wall (the stencil would reach past them).
inline ResidualField nonlinear_residual(const WaveTrajectory& tr, double K, double sigma, const FieldExpr& U,
                                        const ResidualOptions& opts = {}) {
    if (!(K > 0)) throw InvalidArgument("K must be positive");
    if (!(sigma > 0)) throw InvalidArgument("sigma must be positive");
    const auto& s = tr.snapshots;
    if (s.size() < 5) throw InvalidArgument("residual needs at least five snapshots");
    const double tau = tr.spacing();
    const WaveGrid& g = tr.grid();
    ResidualField r;
    r.coefficient = nonlinear_coefficient(K, sigma);
    for (std::size_t k = 0; k < g.n; ++k) r.x.push_back(g.x(k));
    const double s2 = sigma * sigma;
    const cplx iK(0.0, K);
    const bool linear = r.coefficient == 0.0;
    for (std::size_t i = 2; i + 2 < s.size(); ++i) {
        const WaveFunction& w = s[i];
        const auto u = detail::potential_on_grid(U, g, w.t);
        const double floor = opts.floor_rel * w.max_modulus();
        std::vector<cplx> row(g.n);
        std::vector<bool> m(g.n, false);
        for (std::size_t k = 0; k < g.n; ++k) {
            if (g.bc == Boundary::Dirichlet && (k < 2 || k + 2 >= g.n)) continue;
            if (std::abs(w.values[k]) < floor) continue;
            const auto kk = static_cast<std::ptrdiff_t>(k);
            const cplx dt = (-s[i + 2].values[k] + 8.0 * s[i + 1].values[k] - 8.0 * s[i - 1].values[k] + s[i - 2].values[k]) / (12 * tau);
            cplx v = iK * dt + (K * s2 / 2) * detail::d2(w, kk) - u[k] * w.values[k];
            if (!linear) {
                const cplx p = detail::d1(w, kk);
                v += r.coefficient * p * p / w.values[k];
            }
            row[k] = v;
            m[k] = true;
        }
        r.t.push_back(w.t);
        r.values.push_back(std::move(row));
        r.mask.push_back(std::move(m));
    }
    return r;
}

}  // namespace stochemb::schrodinger
