#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stochemb/core/error.hpp"

namespace stochemb {

/// Uniform grid t_k = t0 + k dt, k = 0..n_steps.
struct TimeGrid {
    double t0 = 0.0;
    double t1 = 1.0;
    int n_steps = 2;

    TimeGrid() = default;
    TimeGrid(double a, double b, int n) : t0(a), t1(b), n_steps(n) { validate(); }

    void validate() const {
        if (!(t1 > t0)) throw InvalidArgument("time grid needs t1 > t0");
        if (n_steps < 2) throw InvalidArgument("time grid needs n_steps >= 2");
    }
    double dt() const { return (t1 - t0) / n_steps; }
    double time(int k) const { return k == n_steps ? t1 : t0 + k * dt(); }
    std::size_t n_points() const { return static_cast<std::size_t>(n_steps) + 1; }
    /// Index of the grid point nearest to t.
    int index_of(double t) const {
        const double k = std::round((t - t0) / dt());
        if (k < 0 || k > n_steps) throw InvalidArgument("time " + std::to_string(t) + " outside the grid");
        return static_cast<int>(k);
    }
    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// N sampled trajectories of an R^d-valued process, stored time-major as
/// values[step][path][component].
class PathEnsemble {
public:
    PathEnsemble() = default;
    PathEnsemble(TimeGrid grid, int dim, std::size_t n_paths, std::uint64_t seed = 0, std::string model_tag = {})
        : grid_(grid), dim_(dim), n_paths_(n_paths), seed_(seed), tag_(std::move(model_tag)) {
        grid_.validate();
        if (dim < 1) throw InvalidArgument("ensemble dimension must be >= 1");
        if (n_paths < 1) throw InvalidArgument("ensemble needs at least one path");
        values_.assign(grid_.n_points() * n_paths_ * static_cast<std::size_t>(dim_), 0.0);
    }

    const TimeGrid& grid() const { return grid_; }
    int dim() const { return dim_; }
    std::size_t n_paths() const { return n_paths_; }
    std::uint64_t seed() const { return seed_; }
    const std::string& model_tag() const { return tag_; }
    void set_model_tag(std::string tag) { tag_ = std::move(tag); }

    double& at(int step, std::size_t path, int i) { return values_[offset(step, path) + static_cast<std::size_t>(i)]; }
    double at(int step, std::size_t path, int i) const {
        return values_[offset(step, path) + static_cast<std::size_t>(i)];
    }

    std::span<const double> state(int step, std::size_t path) const {
        return {values_.data() + offset(step, path), static_cast<std::size_t>(dim_)};
    }
    std::span<double> state(int step, std::size_t path) {
        return {values_.data() + offset(step, path), static_cast<std::size_t>(dim_)};
    }
    /// All paths at one time, path-major, n_paths * dim values.
    std::span<const double> slice(int step) const {
        return {values_.data() + offset(step, 0), n_paths_ * static_cast<std::size_t>(dim_)};
    }
    std::span<double> slice(int step) { return {values_.data() + offset(step, 0), n_paths_ * static_cast<std::size_t>(dim_)}; }

    /// Component i of every path at one time.
    std::vector<double> component(int step, int i) const {
        std::vector<double> out(n_paths_);
        for (std::size_t p = 0; p < n_paths_; ++p) out[p] = at(step, p, i);
        return out;
    }

    const std::vector<double>& raw() const { return values_; }
    std::vector<double>& raw() { return values_; }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const PathEnsemble& a, const PathEnsemble& b) {
        return a.grid_ == b.grid_ && a.dim_ == b.dim_ && a.n_paths_ == b.n_paths_ && a.seed_ == b.seed_ &&
               a.tag_ == b.tag_ && a.values_ == b.values_;
    }

private:
    TimeGrid grid_;
    int dim_ = 1;
    std::size_t n_paths_ = 0;
    std::uint64_t seed_ = 0;
    std::string tag_;
    std::vector<double> values_;

    std::size_t offset(int step, std::size_t path) const {
        return (static_cast<std::size_t>(step) * n_paths_ + path) * static_cast<std::size_t>(dim_);
    }
};

/// X~(t) = X(t0 + t1 - t): the same grid with the time axis reversed.
inline PathEnsemble time_reverse(const PathEnsemble& e) {
    PathEnsemble r(e.grid(), e.dim(), e.n_paths(), e.seed(), e.model_tag());
    const int n = e.grid().n_steps;
    for (int k = 0; k <= n; ++k) {
        auto src = e.slice(n - k);
        auto dst = r.slice(k);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return r;
}

/// Builds an ensemble from a deterministic trajectory x(t), one or more identical paths.
template <class F>
PathEnsemble deterministic_ensemble(const TimeGrid& grid, int dim, std::size_t n_paths, F&& x_of_t) {
    PathEnsemble e(grid, dim, n_paths, 0, "deterministic");
    for (int k = 0; k <= grid.n_steps; ++k) {
        const std::vector<double> x = x_of_t(grid.time(k));
        for (std::size_t p = 0; p < n_paths; ++p)
            for (int i = 0; i < dim; ++i) e.at(k, p, i) = x[static_cast<std::size_t>(i)];
    }
    return e;
}

}  // namespace stochemb
