#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/rng.hpp"

namespace stochemb::stats {

/// Neumaier-compensated accumulator. Summation order is the caller's order.
class Accumulator {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double sum() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double sum(std::span<const double> xs) {
    Accumulator acc;
    for (double x : xs) acc.add(x);
    return acc.sum();
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw InvalidArgument("mean of empty sample");
    return sum(xs) / static_cast<double>(xs.size());
}

inline double variance(std::span<const double> xs) {
    if (xs.size() < 2) throw InvalidArgument("variance needs at least two values");
    const double m = mean(xs);
    Accumulator acc;
    for (double x : xs) acc.add((x - m) * (x - m));
    return acc.sum() / static_cast<double>(xs.size() - 1);
}

/// Standard error of the mean under the ideal (infinite-replicate) nonparametric
/// bootstrap: sqrt(sum (x - mean)^2 / n) / sqrt(n).
inline double bootstrap_se_of_mean(std::span<const double> xs) {
    if (xs.size() < 2) throw InvalidArgument("standard error needs at least two values");
    const double m = mean(xs);
    Accumulator acc;
    for (double x : xs) acc.add((x - m) * (x - m));
    const double n = static_cast<double>(xs.size());
    return std::sqrt(acc.sum() / n) / std::sqrt(n);
}

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit ols(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("ols: need matching samples, n >= 2");
    const double mx = mean(x), my = mean(y);
    Accumulator sxy, sxx;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy.add((x[i] - mx) * (y[i] - my));
        sxx.add((x[i] - mx) * (x[i] - mx));
    }
    if (sxx.sum() == 0.0) throw InvalidArgument("ols: regressor has zero variance");
    LinearFit fit;
    fit.slope = sxy.sum() / sxx.sum();
    fit.intercept = my - fit.slope * mx;
    return fit;
}

/// Streaming OLS through accumulated moments, for pooling over many slices.
class RegressionAccumulator {
public:
    void add(double x, double y) noexcept {
        ++n_;
        sx_.add(x);
        sy_.add(y);
        sxx_.add(x * x);
        sxy_.add(x * y);
    }
    std::uint64_t count() const noexcept { return n_; }
    double slope() const {
        if (n_ < 2) throw InvalidArgument("regression needs at least two points");
        const double n = static_cast<double>(n_);
        const double cxx = sxx_.sum() - sx_.sum() * sx_.sum() / n;
        const double cxy = sxy_.sum() - sx_.sum() * sy_.sum() / n;
        if (cxx == 0.0) throw InvalidArgument("regression: regressor has zero variance");
        return cxy / cxx;
    }
    double intercept() const {
        const double n = static_cast<double>(n_);
        return (sy_.sum() - slope() * sx_.sum()) / n;
    }

private:
    std::uint64_t n_ = 0;
    Accumulator sx_, sy_, sxx_, sxy_;
};

/// OLS weights w with slope = sum_i w_i * y_i for fixed regressor x.
inline std::vector<double> ols_slope_weights(std::span<const double> x) {
    if (x.size() < 2) throw InvalidArgument("ols weights: need n >= 2");
    const double mx = mean(x);
    Accumulator sxx;
    for (double xi : x) sxx.add((xi - mx) * (xi - mx));
    if (sxx.sum() == 0.0) throw InvalidArgument("ols weights: regressor has zero variance");
    std::vector<double> w(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) w[i] = (x[i] - mx) / sxx.sum();
    return w;
}

/// Least squares y = c1 * x + c2 * x^2 (no intercept).
struct QuadraticFit {
    double c1 = 0.0;
    double c2 = 0.0;
};

inline QuadraticFit fit_linear_quadratic(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("quadratic fit: need n >= 2");
    Accumulator s2, s3, s4, sy1, sy2;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        s2.add(xi * xi);
        s3.add(xi * xi * xi);
        s4.add(xi * xi * xi * xi);
        sy1.add(xi * y[i]);
        sy2.add(xi * xi * y[i]);
    }
    const double det = s2.sum() * s4.sum() - s3.sum() * s3.sum();
    if (det == 0.0) throw InvalidArgument("quadratic fit: need at least two distinct nonzero x");
    QuadraticFit f;
    f.c1 = (sy1.sum() * s4.sum() - sy2.sum() * s3.sum()) / det;
    f.c2 = (s2.sum() * sy2.sum() - s3.sum() * sy1.sum()) / det;
    return f;
}

/// Monte Carlo bootstrap replicates of the mean of per-path contributions.
///
/// Replicate r resamples indices from stream (seed, kBootstrapStreamTag + r), so
/// replicates are reproducible and independent of each other.
inline std::vector<std::complex<double>> bootstrap_means(std::span<const std::complex<double>> xs,
                                                         int replicates, std::uint64_t seed) {
    if (xs.empty()) throw InvalidArgument("bootstrap of empty sample");
    std::vector<std::complex<double>> out(static_cast<std::size_t>(replicates));
    const std::size_t n = xs.size();
    for (int r = 0; r < replicates; ++r) {
        Engine eng = make_stream(seed, kBootstrapStreamTag + static_cast<std::uint64_t>(r));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        Accumulator re, im;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& v = xs[pick(eng)];
            re.add(v.real());
            im.add(v.imag());
        }
        out[static_cast<std::size_t>(r)] = {re.sum() / static_cast<double>(n), im.sum() / static_cast<double>(n)};
    }
    return out;
}

/// Standard deviation of the real and imaginary parts of bootstrap replicates.
inline std::complex<double> replicate_sd(std::span<const std::complex<double>> reps) {
    std::vector<double> re(reps.size()), im(reps.size());
    for (std::size_t i = 0; i < reps.size(); ++i) {
        re[i] = reps[i].real();
        im[i] = reps[i].imag();
    }
    return {std::sqrt(variance(re)), std::sqrt(variance(im))};
}

/// Trapezoidal integral of uniformly spaced samples.
template <class T>
T trapezoid(std::span<const T> ys, double dx) {
    if (ys.size() < 2) return T{};
    T acc{};
    for (std::size_t i = 1; i + 1 < ys.size(); ++i) acc += ys[i];
    acc += (ys.front() + ys.back()) * 0.5;
    return acc * dx;
}

}  // namespace stochemb::stats
