#pragma once

// Exact Gaussian rationals (p/q + i r/s) for symbolic operator coefficients.

#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>

#include "stochemb/core/error.hpp"

namespace stochemb::opalgebra {

namespace detail {
inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw NumericalError("rational coefficient overflow");
    return r;
}
inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw NumericalError("rational coefficient overflow");
    return r;
}
}  // namespace detail

class Rational {
public:
    Rational() = default;
    Rational(std::int64_t n) : num_(n) {}  // NOLINT: integers convert implicitly
    Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) {
        if (d == 0) throw InvalidArgument("rational with zero denominator");
        normalize();
    }

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    bool is_zero() const { return num_ == 0; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    friend Rational operator+(const Rational& a, const Rational& b) {
        const std::int64_t g = std::gcd(a.den_, b.den_);
        const std::int64_t da = a.den_ / g;
        return Rational(detail::checked_add(detail::checked_mul(a.num_, b.den_ / g), detail::checked_mul(b.num_, da)),
                        detail::checked_mul(da, b.den_));
    }
    friend Rational operator-(const Rational& a) { return Rational(-a.num_, a.den_); }
    friend Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }
    friend Rational operator*(const Rational& a, const Rational& b) {
        const std::int64_t g1 = std::gcd(a.num_, b.den_), g2 = std::gcd(b.num_, a.den_);
        const std::int64_t n1 = g1 ? a.num_ / g1 : a.num_, d2 = g1 ? b.den_ / g1 : b.den_;
        const std::int64_t n2 = g2 ? b.num_ / g2 : b.num_, d1 = g2 ? a.den_ / g2 : a.den_;
        return Rational(detail::checked_mul(n1, n2), detail::checked_mul(d1, d2));
    }
    friend bool operator==(const Rational& a, const Rational& b) { return a.num_ == b.num_ && a.den_ == b.den_; }

    std::string to_string() const { return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_); }

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;

    void normalize() {
        if (den_ < 0) {
            num_ = -num_;
            den_ = -den_;
        }
        const std::int64_t g = std::gcd(num_, den_);
        if (g > 1) {
            num_ /= g;
            den_ /= g;
        }
        if (num_ == 0) den_ = 1;
    }
};

/// re + i im with exact rational parts.
struct QComplex {
    Rational re;
    Rational im;

    QComplex() = default;
    QComplex(Rational r) : re(r) {}  // NOLINT
    QComplex(std::int64_t n) : re(n) {}  // NOLINT
    QComplex(Rational r, Rational i) : re(r), im(i) {}

    static QComplex i() { return {0, 1}; }
    bool is_zero() const { return re.is_zero() && im.is_zero(); }
    bool is_real() const { return im.is_zero(); }

    friend QComplex operator+(const QComplex& a, const QComplex& b) { return {a.re + b.re, a.im + b.im}; }
    friend QComplex operator-(const QComplex& a) { return {-a.re, -a.im}; }
    friend QComplex operator-(const QComplex& a, const QComplex& b) { return a + (-b); }
    friend QComplex operator*(const QComplex& a, const QComplex& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend bool operator==(const QComplex& a, const QComplex& b) { return a.re == b.re && a.im == b.im; }

    std::string to_string() const {
        if (im.is_zero()) return re.to_string();
        if (re.is_zero()) return imag_string(im);
        const bool neg = im.num() < 0;
        return "(" + re.to_string() + (neg ? "-" : "+") + imag_string(neg ? -im : im) + ")";
    }

private:
    static std::string imag_string(const Rational& v) {
        if (v == Rational(1)) return "i";
        if (v == Rational(-1)) return "-i";
        if (v.den() == 1) return v.to_string() + "i";
        return "(" + v.to_string() + ")i";
    }
};

inline QComplex conj(const QComplex& z) { return {z.re, -z.im}; }

inline std::ostream& operator<<(std::ostream& os, const QComplex& z) { return os << z.to_string(); }

}  // namespace stochemb::opalgebra
