#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/fieldexpr/field.hpp"

namespace stochemb {

/// Scalar field of (t, x) with x in R, stored as nodal values and slopes on a
/// uniform x grid at a sorted list of snapshot times.
///
/// Cubic Hermite in x. In t, cubic Hermite between snapshots with three-point
/// (one-sided at the ends) time slopes, so quadratics in t are reproduced; two
/// snapshots give linear interpolation. Outside the x range the field takes its
/// boundary value (zero derivatives); outside the time range the nearest
/// snapshot is used.
class TabulatedField1D final : public Field {
public:
    struct Snapshot {
        double t = 0.0;
        std::vector<double> value;
        std::vector<double> slope;
    };

    TabulatedField1D(double x0, double dx, std::vector<Snapshot> snaps) : x0_(x0), dx_(dx), s_(std::move(snaps)) {
        if (!(dx > 0.0)) throw InvalidArgument("tabulated field: dx must be positive");
        if (s_.empty()) throw InvalidArgument("tabulated field: no snapshots");
        n_ = s_[0].value.size();
        if (n_ < 2) throw InvalidArgument("tabulated field: need at least two nodes");
        for (std::size_t k = 0; k < s_.size(); ++k) {
            if (s_[k].value.size() != n_ || s_[k].slope.size() != n_)
                throw InvalidArgument("tabulated field: snapshot size mismatch");
            if (k > 0 && !(s_[k].t > s_[k - 1].t)) throw InvalidArgument("tabulated field: snapshot times must increase");
        }
    }

    int dim() const override { return 1; }
    int arity() const override { return 1; }
    double x_min() const { return x0_; }
    double x_max() const { return x0_ + dx_ * static_cast<double>(n_ - 1); }
    const std::vector<Snapshot>& snapshots() const { return s_; }

    void eval(double t, std::span<const double> x, std::span<double> out) const override {
        Partials p = partials(t, x[0]);
        out[0] = p.f;
    }

    void eval_jet(const Jet& t, std::span<const Jet> x, std::span<Jet> out) const override {
        Partials p = partials(t.v, x[0].v);
        out[0] = chain2(t, x[0], p.f, p.ft, p.fx, p.ftt, p.ftx, p.fxx);
    }

private:
    struct Partials {
        double f = 0, ft = 0, fx = 0, ftt = 0, ftx = 0, fxx = 0;
    };
    struct Local {
        double f = 0, fx = 0, fxx = 0;
    };

    double x0_, dx_;
    std::vector<Snapshot> s_;
    std::size_t n_ = 0;

    Local hermite(const Snapshot& s, double x) const {
        const double u = (x - x0_) / dx_;
        if (u <= 0.0) return {s.value.front(), 0.0, 0.0};
        if (u >= static_cast<double>(n_ - 1)) return {s.value.back(), 0.0, 0.0};
        std::size_t j = static_cast<std::size_t>(u);
        if (j >= n_ - 1) j = n_ - 2;
        const double r = u - static_cast<double>(j);
        const double y0 = s.value[j], y1 = s.value[j + 1];
        const double m0 = s.slope[j] * dx_, m1 = s.slope[j + 1] * dx_;
        const double r2 = r * r, r3 = r2 * r;
        const double f = (2 * r3 - 3 * r2 + 1) * y0 + (r3 - 2 * r2 + r) * m0 + (-2 * r3 + 3 * r2) * y1 + (r3 - r2) * m1;
        const double fr = (6 * r2 - 6 * r) * y0 + (3 * r2 - 4 * r + 1) * m0 + (-6 * r2 + 6 * r) * y1 + (3 * r2 - 2 * r) * m1;
        const double frr = (12 * r - 6) * y0 + (6 * r - 4) * m0 + (-12 * r + 6) * y1 + (6 * r - 2) * m1;
        return {f, fr / dx_, frr / (dx_ * dx_)};
    }

    // Time slope at snapshot k from three neighbouring snapshots (one-sided at the ends).
    Local time_slope(std::size_t k, double x) const {
        const std::size_t m = s_.size();
        if (m == 2) {
            const Local a = hermite(s_[0], x), b = hermite(s_[1], x);
            const double h = s_[1].t - s_[0].t;
            return {(b.f - a.f) / h, (b.fx - a.fx) / h, (b.fxx - a.fxx) / h};
        }
        const std::size_t c = std::clamp<std::size_t>(k, 1, m - 2);
        const double t0 = s_[c - 1].t, t1 = s_[c].t, t2 = s_[c + 1].t, tk = s_[k].t;
        // Derivative at tk of the quadratic through the three snapshots.
        const double w0 = (2 * tk - t1 - t2) / ((t0 - t1) * (t0 - t2));
        const double w1 = (2 * tk - t0 - t2) / ((t1 - t0) * (t1 - t2));
        const double w2 = (2 * tk - t0 - t1) / ((t2 - t0) * (t2 - t1));
        const Local a = hermite(s_[c - 1], x), b = hermite(s_[c], x), d = hermite(s_[c + 1], x);
        return {w0 * a.f + w1 * b.f + w2 * d.f, w0 * a.fx + w1 * b.fx + w2 * d.fx, w0 * a.fxx + w1 * b.fxx + w2 * d.fxx};
    }

    Partials partials(double t, double x) const {
        if (s_.size() == 1 || t < s_.front().t || t > s_.back().t) {
            const Local l = hermite(s_.size() == 1 || t < s_.front().t ? s_.front() : s_.back(), x);
            return {l.f, 0.0, l.fx, 0.0, 0.0, l.fxx};
        }
        auto it = std::upper_bound(s_.begin(), s_.end(), t, [](double v, const Snapshot& s) { return v < s.t; });
        if (it == s_.end()) --it;
        const std::size_t ib = static_cast<std::size_t>(it - s_.begin()), ia = ib - 1;
        const double h = s_[ib].t - s_[ia].t;
        const double r = (t - s_[ia].t) / h, r2 = r * r, r3 = r2 * r;
        const Local la = hermite(s_[ia], x), lb = hermite(s_[ib], x);
        const Local ma = time_slope(ia, x), mb = time_slope(ib, x);
        // Hermite basis, its first and second derivatives in r.
        const double h00 = 2 * r3 - 3 * r2 + 1, h10 = r3 - 2 * r2 + r, h01 = -2 * r3 + 3 * r2, h11 = r3 - r2;
        const double d00 = 6 * r2 - 6 * r, d10 = 3 * r2 - 4 * r + 1, d01 = -6 * r2 + 6 * r, d11 = 3 * r2 - 2 * r;
        const double e00 = 12 * r - 6, e10 = 6 * r - 4, e01 = -12 * r + 6, e11 = 6 * r - 2;
        auto mix = [&](double c00, double c10, double c01, double c11, double ya, double sa, double yb, double sb) {
            return c00 * ya + c10 * h * sa + c01 * yb + c11 * h * sb;
        };
        Partials p;
        p.f = mix(h00, h10, h01, h11, la.f, ma.f, lb.f, mb.f);
        p.fx = mix(h00, h10, h01, h11, la.fx, ma.fx, lb.fx, mb.fx);
        p.fxx = mix(h00, h10, h01, h11, la.fxx, ma.fxx, lb.fxx, mb.fxx);
        p.ft = mix(d00, d10, d01, d11, la.f, ma.f, lb.f, mb.f) / h;
        p.ftx = mix(d00, d10, d01, d11, la.fx, ma.fx, lb.fx, mb.fx) / h;
        p.ftt = mix(e00, e10, e01, e11, la.f, ma.f, lb.f, mb.f) / (h * h);
        return p;
    }
};

}  // namespace stochemb
