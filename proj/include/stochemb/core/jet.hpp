#pragma once

// Second-order forward-mode automatic differentiation.
//
// A Jet carries a value together with its gradient and Hessian with respect to
// up to kJetVars independent variables. Variable 0 is time, variables 1..d are
// the spatial coordinates, so spatial dimension is limited to kJetVars - 1.

#include <array>
#include <cmath>

namespace stochemb {

inline constexpr int kJetVars = 4;

struct Jet {
    double v = 0.0;
    std::array<double, kJetVars> g{};
    std::array<double, kJetVars * kJetVars> h{};

    constexpr Jet() = default;
    constexpr Jet(double value) : v(value) {}  // NOLINT: implicit constant promotion

    static Jet variable(double value, int index) {
        Jet j(value);
        j.g[index] = 1.0;
        return j;
    }

    double grad(int i) const { return g[i]; }
    double hess(int i, int j) const { return h[i * kJetVars + j]; }
};

namespace detail {

// Chain rule for a unary function with derivatives f1 = f'(v), f2 = f''(v).
inline Jet chain(const Jet& a, double f0, double f1, double f2) {
    Jet r(f0);
    for (int i = 0; i < kJetVars; ++i) r.g[i] = f1 * a.g[i];
    for (int i = 0; i < kJetVars; ++i)
        for (int j = 0; j < kJetVars; ++j)
            r.h[i * kJetVars + j] = f1 * a.h[i * kJetVars + j] + f2 * a.g[i] * a.g[j];
    return r;
}

}  // namespace detail

inline Jet operator+(const Jet& a, const Jet& b) {
    Jet r(a.v + b.v);
    for (int i = 0; i < kJetVars; ++i) r.g[i] = a.g[i] + b.g[i];
    for (int i = 0; i < kJetVars * kJetVars; ++i) r.h[i] = a.h[i] + b.h[i];
    return r;
}

inline Jet operator-(const Jet& a, const Jet& b) {
    Jet r(a.v - b.v);
    for (int i = 0; i < kJetVars; ++i) r.g[i] = a.g[i] - b.g[i];
    for (int i = 0; i < kJetVars * kJetVars; ++i) r.h[i] = a.h[i] - b.h[i];
    return r;
}

inline Jet operator-(const Jet& a) {
    Jet r(-a.v);
    for (int i = 0; i < kJetVars; ++i) r.g[i] = -a.g[i];
    for (int i = 0; i < kJetVars * kJetVars; ++i) r.h[i] = -a.h[i];
    return r;
}

inline Jet operator*(const Jet& a, const Jet& b) {
    Jet r(a.v * b.v);
    for (int i = 0; i < kJetVars; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
    for (int i = 0; i < kJetVars; ++i)
        for (int j = 0; j < kJetVars; ++j) {
            const int k = i * kJetVars + j;
            r.h[k] = a.h[k] * b.v + a.v * b.h[k] + a.g[i] * b.g[j] + a.g[j] * b.g[i];
        }
    return r;
}

inline Jet operator*(const Jet& a, double s) {
    Jet r(a.v * s);
    for (int i = 0; i < kJetVars; ++i) r.g[i] = a.g[i] * s;
    for (int i = 0; i < kJetVars * kJetVars; ++i) r.h[i] = a.h[i] * s;
    return r;
}

inline Jet operator*(double s, const Jet& a) { return a * s; }

inline Jet reciprocal(const Jet& a) {
    const double inv = 1.0 / a.v;
    return detail::chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet operator/(const Jet& a, double s) { return a * (1.0 / s); }

inline Jet& operator+=(Jet& a, const Jet& b) { return a = a + b; }
inline Jet& operator-=(Jet& a, const Jet& b) { return a = a - b; }
inline Jet& operator*=(Jet& a, const Jet& b) { return a = a * b; }

inline Jet exp(const Jet& a) {
    const double e = std::exp(a.v);
    return detail::chain(a, e, e, e);
}

inline Jet log(const Jet& a) {
    const double inv = 1.0 / a.v;
    return detail::chain(a, std::log(a.v), inv, -inv * inv);
}

inline Jet sin(const Jet& a) {
    const double s = std::sin(a.v), c = std::cos(a.v);
    return detail::chain(a, s, c, -s);
}

inline Jet cos(const Jet& a) {
    const double s = std::sin(a.v), c = std::cos(a.v);
    return detail::chain(a, c, -s, -c);
}

inline Jet sqrt(const Jet& a) {
    const double r = std::sqrt(a.v);
    return detail::chain(a, r, 0.5 / r, -0.25 / (r * a.v));
}

// Derivative of |x| is taken as sign(x); the second derivative is zero away from 0.
inline Jet abs(const Jet& a) {
    const double s = a.v < 0.0 ? -1.0 : 1.0;
    return a * s;
}

inline Jet powi(const Jet& a, int n) {
    if (n == 0) return Jet(1.0);
    if (n == 1) return a;
    const double f0 = std::pow(a.v, n);
    const double f1 = n * std::pow(a.v, n - 1);
    const double f2 = n * (n - 1) * std::pow(a.v, n - 2);
    return detail::chain(a, f0, f1, f2);
}

inline double powi(double a, int n) { return std::pow(a, n); }

// Chain rule for f(t, x) of two jets, given the partials of f up to order two.
inline Jet chain2(const Jet& t, const Jet& x, double f, double ft, double fx, double ftt, double ftx, double fxx) {
    Jet r(f);
    for (int i = 0; i < kJetVars; ++i) r.g[i] = ft * t.g[i] + fx * x.g[i];
    for (int i = 0; i < kJetVars; ++i)
        for (int j = 0; j < kJetVars; ++j) {
            const int k = i * kJetVars + j;
            r.h[k] = ft * t.h[k] + fx * x.h[k] + ftt * t.g[i] * t.g[j] + ftx * (t.g[i] * x.g[j] + x.g[i] * t.g[j]) +
                     fxx * x.g[i] * x.g[j];
        }
    return r;
}

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.v; }

}  // namespace stochemb
