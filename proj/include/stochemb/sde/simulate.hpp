#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/parallel.hpp"
#include "stochemb/core/rng.hpp"
#include "stochemb/sde/ensemble.hpp"
#include "stochemb/sde/model.hpp"

namespace stochemb {

namespace detail {

// True when every component of the field is a literal constant.
inline std::optional<std::vector<double>> constant_values(const FieldPtr& f) {
    auto ef = std::dynamic_pointer_cast<const ExprField>(f);
    if (!ef) return std::nullopt;
    std::vector<double> v;
    for (std::size_t i = 0; i < ef->expr().arity(); ++i) {
        if (!ef->expr().is_constant(i)) return std::nullopt;
        v.push_back(ef->expr().component(i)->value);
    }
    return v;
}

inline void draw_initial(const InitialLaw& law, std::size_t path, int d, Engine& eng,
                         std::normal_distribution<double>& normal, const std::vector<double>& chol,
                         std::span<double> out) {
    if (const auto* pm = std::get_if<PointMass>(&law)) {
        std::copy(pm->x.begin(), pm->x.end(), out.begin());
    } else if (const auto* g = std::get_if<GaussianLaw>(&law)) {
        double z[8];
        std::vector<double> zv;
        double* zp = z;
        if (d > 8) {
            zv.resize(static_cast<std::size_t>(d));
            zp = zv.data();
        }
        for (int i = 0; i < d; ++i) zp[i] = normal(eng);
        for (int i = 0; i < d; ++i) {
            double v = g->mean[static_cast<std::size_t>(i)];
            for (int j = 0; j <= i; ++j) v += chol[static_cast<std::size_t>(i * d + j)] * zp[j];
            out[static_cast<std::size_t>(i)] = v;
        }
    } else {
        const auto& s = std::get<SampleLaw>(law);
        const std::size_t idx = path % s.count();
        for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(i)] = s.points[idx * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)];
    }
}

}  // namespace detail

struct SimulateOptions {
    int workers = 0;         // 0: default_workers()
    std::size_t block = 256;  // paths advanced in lockstep
};

/// Euler-Maruyama ensemble. Path p uses its own stream make_stream(seed, p), so the
/// output is bit-identical for any worker count.
inline PathEnsemble simulate_ensemble(const DiffusionModel& model, const TimeGrid& grid, std::size_t n_paths,
                                      std::uint64_t seed, SimulateOptions opts = {}) {
    model.validate();
    grid.validate();
    if (n_paths < 1) throw InvalidArgument("n_paths must be >= 1");
    const int d = model.dim;
    const std::size_t du = static_cast<std::size_t>(d);
    PathEnsemble e(grid, d, n_paths, seed, model.tag);
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);
    const bool scalar_sigma = model.scalar_diffusion();
    const auto const_drift = detail::constant_values(model.drift);
    const auto const_sigma = detail::constant_values(model.diffusion);
    std::vector<double> chol;
    if (const auto* g = std::get_if<GaussianLaw>(&model.initial)) chol = cholesky_psd(g->cov, d);

    const std::size_t block = std::max<std::size_t>(1, opts.block);
    const std::size_t n_blocks = (n_paths + block - 1) / block;
    const int workers = opts.workers > 0 ? opts.workers : default_workers();

    std::mutex fail_mutex;
    std::size_t fail_path = std::numeric_limits<std::size_t>::max();
    std::size_t fail_step = 0;

    parallel_for_chunks(n_blocks, workers, [&](std::size_t b_begin, std::size_t b_end) {
        std::vector<Engine> engines;
        std::vector<std::normal_distribution<double>> normals;
        std::vector<double> b(du), s(scalar_sigma ? 1 : du * du), xi(du);
        std::vector<std::size_t> dead_at;
        for (std::size_t blk = b_begin; blk < b_end; ++blk) {
            const std::size_t p0 = blk * block;
            const std::size_t p1 = std::min(n_paths, p0 + block);
            const std::size_t m = p1 - p0;
            engines.clear();
            normals.assign(m, std::normal_distribution<double>(0.0, 1.0));
            dead_at.assign(m, 0);
            for (std::size_t p = p0; p < p1; ++p) {
                engines.push_back(make_stream(seed, p));
                detail::draw_initial(model.initial, p, d, engines.back(), normals[p - p0], chol, e.state(0, p));
                for (double v : e.state(0, p))
                    if (!std::isfinite(v)) dead_at[p - p0] = 1;  // marker = failing step + 1
            }
            bool any_dead = std::any_of(dead_at.begin(), dead_at.end(), [](std::size_t v) { return v != 0; });
            for (int k = 0; k < grid.n_steps; ++k) {
                const double t = grid.time(k);
                for (std::size_t q = 0; q < m; ++q) {
                    if (dead_at[q]) continue;
                    const std::size_t p = p0 + q;
                    auto x = e.state(k, p);
                    auto y = e.state(k + 1, p);
                    try {
                        if (const_drift)
                            std::copy(const_drift->begin(), const_drift->end(), b.begin());
                        else
                            model.drift->eval(t, x, b);
                        if (const_sigma)
                            std::copy(const_sigma->begin(), const_sigma->end(), s.begin());
                        else
                            model.diffusion->eval(t, x, s);
                    } catch (const DomainError&) {
                        // Coefficients overflowed or left their domain along this path.
                        dead_at[q] = static_cast<std::size_t>(k) + 2;
                        any_dead = true;
                        continue;
                    }
                    for (std::size_t i = 0; i < du; ++i) xi[i] = normals[q](engines[q]);
                    bool finite = true;
                    for (std::size_t i = 0; i < du; ++i) {
                        double noise;
                        if (scalar_sigma) {
                            noise = s[0] * xi[i];
                        } else {
                            noise = 0.0;
                            for (std::size_t j = 0; j < du; ++j) noise += s[i * du + j] * xi[j];
                        }
                        y[i] = x[i] + b[i] * dt + noise * sqdt;
                        finite = finite && std::isfinite(y[i]);
                    }
                    if (!finite) {
                        dead_at[q] = static_cast<std::size_t>(k) + 2;
                        any_dead = true;
                    }
                }
            }
            if (any_dead) {
                std::lock_guard lock(fail_mutex);
                for (std::size_t q = 0; q < m; ++q)
                    if (dead_at[q] && p0 + q < fail_path) {
                        fail_path = p0 + q;
                        fail_step = dead_at[q] - 1;
                    }
                return;  // later blocks of this chunk cannot hold a lower failing path
            }
        }
    });
    if (fail_path != std::numeric_limits<std::size_t>::max()) throw BlowUpError(fail_path, fail_step);
    return e;
}

}  // namespace stochemb
