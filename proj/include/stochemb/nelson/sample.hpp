#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/sde/ensemble.hpp"

namespace stochemb {

using cplx = std::complex<double>;

enum class SampleKind { Forward, Backward, Stochastic, Second, Momentum, Residual, Function };

inline const char* kind_name(SampleKind k) {
    switch (k) {
        case SampleKind::Forward: return "forward";
        case SampleKind::Backward: return "backward";
        case SampleKind::Stochastic: return "stochastic";
        case SampleKind::Second: return "second";
        case SampleKind::Momentum: return "momentum";
        case SampleKind::Residual: return "residual";
        case SampleKind::Function: return "function";
    }
    return "?";
}

/// Per-path complex values at a set of grid times, stored [slice][path][component].
class ComplexProcessSample {
public:
    ComplexProcessSample() = default;
    ComplexProcessSample(TimeGrid grid, std::vector<int> steps, std::size_t n_paths, int dim, SampleKind kind, int mu = 0)
        : grid_(grid), steps_(std::move(steps)), n_paths_(n_paths), dim_(dim), kind_(kind), mu_(mu) {
        if (dim < 1) throw InvalidArgument("sample dimension must be >= 1");
        for (int s : steps_)
            if (s < 0 || s > grid_.n_steps) throw InvalidArgument("sample time index outside the grid");
        values_.assign(steps_.size() * n_paths_ * static_cast<std::size_t>(dim_), cplx{});
    }

    const TimeGrid& grid() const { return grid_; }
    const std::vector<int>& steps() const { return steps_; }
    std::size_t n_slices() const { return steps_.size(); }
    std::size_t n_paths() const { return n_paths_; }
    int dim() const { return dim_; }
    SampleKind kind() const { return kind_; }
    int mu() const { return mu_; }
    void set_kind(SampleKind k, int mu) {
        kind_ = k;
        mu_ = mu;
    }

    /// Slice index of a grid step; throws if the step is not sampled.
    std::size_t slice_of(int step) const {
        for (std::size_t s = 0; s < steps_.size(); ++s)
            if (steps_[s] == step) return s;
        throw InvalidArgument("step " + std::to_string(step) + " not in sample");
    }

    cplx& at(std::size_t slice, std::size_t path, int i) { return values_[offset(slice, path) + static_cast<std::size_t>(i)]; }
    const cplx& at(std::size_t slice, std::size_t path, int i) const {
        return values_[offset(slice, path) + static_cast<std::size_t>(i)];
    }
    std::span<const cplx> state(std::size_t slice, std::size_t path) const {
        return {values_.data() + offset(slice, path), static_cast<std::size_t>(dim_)};
    }
    std::span<cplx> state(std::size_t slice, std::size_t path) {
        return {values_.data() + offset(slice, path), static_cast<std::size_t>(dim_)};
    }

    std::vector<cplx>& raw() { return values_; }
    const std::vector<cplx>& raw() const { return values_; }

    bool same_shape(const ComplexProcessSample& o) const {
        return grid_ == o.grid_ && steps_ == o.steps_ && n_paths_ == o.n_paths_ && dim_ == o.dim_;
    }

    /// Component i at slice s for every path, real or imaginary part.
    std::vector<double> real_part(std::size_t s, int i) const {
        std::vector<double> out(n_paths_);
        for (std::size_t p = 0; p < n_paths_; ++p) out[p] = at(s, p, i).real();
        return out;
    }
    std::vector<double> imag_part(std::size_t s, int i) const {
        std::vector<double> out(n_paths_);
        for (std::size_t p = 0; p < n_paths_; ++p) out[p] = at(s, p, i).imag();
        return out;
    }

    bool all_finite() const {
        for (const auto& v : values_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }

private:
    TimeGrid grid_;
    std::vector<int> steps_;
    std::size_t n_paths_ = 0;
    int dim_ = 1;
    SampleKind kind_ = SampleKind::Forward;
    int mu_ = 0;
    std::vector<cplx> values_;

    std::size_t offset(std::size_t slice, std::size_t path) const {
        return (slice * n_paths_ + path) * static_cast<std::size_t>(dim_);
    }
};

/// The real process X itself as a sample on the given steps.
inline ComplexProcessSample as_sample(const PathEnsemble& e, const std::vector<int>& steps) {
    ComplexProcessSample s(e.grid(), steps, e.n_paths(), e.dim(), SampleKind::Function);
    for (std::size_t k = 0; k < steps.size(); ++k)
        for (std::size_t p = 0; p < e.n_paths(); ++p)
            for (int i = 0; i < e.dim(); ++i) s.at(k, p, i) = e.at(steps[k], p, i);
    return s;
}

inline std::vector<int> step_range(int first, int last, int stride = 1) {
    std::vector<int> out;
    for (int k = first; k <= last; k += stride) out.push_back(k);
    return out;
}

}  // namespace stochemb
