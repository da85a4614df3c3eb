#pragma once

// First integrals from one-parameter symmetry groups:
//   I(t) = E[(M D_mu X) . d_s phi_s(X)|_{s=0}],
// with a linear drift fit of I(t) and bootstrap confidence intervals.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/stats.hpp"
#include "stochemb/lagrange/lagrangian.hpp"
#include "stochemb/nelson/checks.hpp"
#include "stochemb/nelson/estimators.hpp"

namespace stochemb::lagrange {

struct SymmetryGroupSpec {
    enum class Kind { Translation, Rotation };
    Kind kind = Kind::Translation;
    std::vector<double> direction;  // translations
    int axis = 2;                   // rotations in 3D: about e_axis (0-based); ignored in 2D

    static SymmetryGroupSpec translation(std::vector<double> e) { return {Kind::Translation, std::move(e), 0}; }
    static SymmetryGroupSpec rotation(int axis = 2) { return {Kind::Rotation, {}, axis}; }

    /// d_s phi_s(x) at s = 0.
    std::vector<double> generator(std::span<const double> x) const {
        const std::size_t d = x.size();
        if (kind == Kind::Translation) {
            if (direction.size() != d) throw InvalidArgument("translation direction has the wrong dimension");
            return direction;
        }
        if (d == 2) return {-x[1], x[0]};
        if (d != 3) throw InvalidArgument("rotations are defined in 2D and 3D");
        if (axis < 0 || axis > 2) throw InvalidArgument("rotation axis must be 0, 1 or 2");
        // e_axis ^ x
        std::vector<double> e(3, 0.0);
        e[static_cast<std::size_t>(axis)] = 1.0;
        return {e[1] * x[2] - e[2] * x[1], e[2] * x[0] - e[0] * x[2], e[0] * x[1] - e[1] * x[0]};
    }
};

struct ConservationOptions {
    double level = 0.95;      // two-sided CI level for the drift slope
    int replicates = 500;     // bootstrap resamples of the slope
    std::uint64_t seed = 1;
    double n_se = 4.0;        // bound on max |I(t) - I(t0)| in units of its s.e.
    double abs_tol = 1e-12;   // additive slack on both tests (exactly conserved deterministic cases)
};

struct ConservationReport {
    std::vector<double> t;
    std::vector<cplx> integral;
    std::vector<cplx> se;          // per time, (re, im)
    cplx slope{};
    cplx slope_lo{}, slope_hi{};   // CI bounds of the real and imaginary slopes
    double max_deviation = 0.0;    // max_t |I(t) - I(t0)|
    double deviation_bound = 0.0;
    bool conserved = false;
    std::vector<std::string> warnings;
    /// Rotations: E[X ^ D X] per time, componentwise (one component in 2D, three in 3D).
    std::vector<std::vector<cplx>> angular_momentum;
};

namespace detail {

inline double normal_quantile(double p) {
    // Acklam's rational approximation; |error| < 1.2e-9 is ample for CI widths.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00};
    if (!(p > 0 && p < 1)) throw InvalidArgument("quantile level must lie in (0, 1)");
    const double pl = 0.02425;
    if (p < pl) {
        const double q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > 1 - pl) return -normal_quantile(1 - p);
    const double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

// |grad U . gen| relative to |grad U| at the given states; the largest ratio is returned.
inline double invariance_defect(const LagrangianSpec& L, const SymmetryGroupSpec& g, const PathEnsemble& e, const std::vector<int>& steps) {
    const FieldExpr gu = potential_gradient(L);
    double worst = 0;
    const std::size_t step_p = std::max<std::size_t>(1, e.n_paths() / 200);
    for (int k : steps) {
        const double t = e.grid().time(k);
        for (std::size_t p = 0; p < e.n_paths(); p += step_p) {
            auto x = e.state(k, p);
            const auto grad = gu.values(t, x);
            const auto gen = g.generator(x);
            double dot = 0, norm = 0, gn = 0;
            for (std::size_t i = 0; i < grad.size(); ++i) {
                dot += grad[i] * gen[i];
                norm += grad[i] * grad[i];
                gn += gen[i] * gen[i];
            }
            worst = std::max(worst, std::abs(dot) / (1e-300 + std::sqrt(norm * gn) + 1e-12));
        }
    }
    return worst;
}

}  // namespace detail

namespace detail {

inline std::vector<cplx> angular_momentum_mean(const PathEnsemble& e, const ComplexProcessSample& dX, std::size_t s) {
    const std::size_t n = e.n_paths(), d = static_cast<std::size_t>(e.dim());
    std::vector<cplx> ang(d == 3 ? 3 : 1, cplx{});
    for (std::size_t p = 0; p < n; ++p) {
        auto x = e.state(dX.steps()[s], p);
        auto dx = dX.state(s, p);
        if (d == 2) {
            ang[0] += x[0] * dx[1] - x[1] * dx[0];
        } else {
            ang[0] += x[1] * dx[2] - x[2] * dx[1];
            ang[1] += x[2] * dx[0] - x[0] * dx[2];
            ang[2] += x[0] * dx[1] - x[1] * dx[0];
        }
    }
    for (auto& a : ang) a /= static_cast<double>(n);
    return ang;
}

// Verdict from per-path contributions c[p * ns + s] whose slice means are I(t_s).
inline void conservation_verdict(ConservationReport& rep, const std::vector<cplx>& c, std::size_t n, const ConservationOptions& opts) {
    const std::size_t ns = rep.t.size();
    std::vector<double> re(n), im(n), dre(n), dim_(n);
    double worst = -INFINITY;
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t p = 0; p < n; ++p) {
            re[p] = c[p * ns + s].real();
            im[p] = c[p * ns + s].imag();
            dre[p] = re[p] - c[p * ns].real();
            dim_[p] = im[p] - c[p * ns].imag();
        }
        rep.integral.emplace_back(stats::mean(re), stats::mean(im));
        rep.se.emplace_back(stats::bootstrap_se_of_mean(re), stats::bootstrap_se_of_mean(im));
        if (s == 0) continue;
        const double dev = std::abs(cplx(stats::mean(dre), stats::mean(dim_)));
        const double sr = stats::bootstrap_se_of_mean(dre), si = stats::bootstrap_se_of_mean(dim_);
        const double bound = opts.n_se * std::sqrt(sr * sr + si * si) + opts.abs_tol;
        // keep the time where the deviation is largest relative to its bound
        if (dev - bound > worst) {
            worst = dev - bound;
            rep.max_deviation = dev;
            rep.deviation_bound = bound;
        }
    }
    const auto w = stats::ols_slope_weights(rep.t);
    std::vector<cplx> per_path(n);
    cplx slope{};
    for (std::size_t p = 0; p < n; ++p) {
        cplx v{};
        for (std::size_t q = 0; q < ns; ++q) v += w[q] * c[p * ns + q];
        per_path[p] = v;
        slope += v;
    }
    rep.slope = slope / static_cast<double>(n);
    const auto reps = stats::bootstrap_means(per_path, opts.replicates, opts.seed);
    const cplx sd = stats::replicate_sd(reps);
    const double zq = normal_quantile(0.5 + 0.5 * opts.level);
    rep.slope_lo = rep.slope - zq * sd;
    rep.slope_hi = rep.slope + zq * sd;
    const double tol = opts.abs_tol;
    const bool zero_in_ci =
        rep.slope_lo.real() <= tol && -tol <= rep.slope_hi.real() && rep.slope_lo.imag() <= tol && -tol <= rep.slope_hi.imag();
    rep.conserved = zero_in_ci && rep.max_deviation <= rep.deviation_bound;
}

inline ConservationReport start_report(const PathEnsemble& e, const LagrangianSpec& L, const SymmetryGroupSpec& g,
                                       const std::vector<int>& steps) {
    L.validate();
    if (L.dim != e.dim()) throw InvalidArgument("Lagrangian dimension does not match the ensemble");
    if (steps.size() < 3) throw InvalidArgument("conservation check needs at least three sampled times");
    ConservationReport rep;
    const double defect = invariance_defect(L, g, e, steps);
    if (defect > 1e-8)
        rep.warnings.push_back("potential is not invariant under the symmetry (relative defect " + std::to_string(defect) + ")");
    for (int k : steps) rep.t.push_back(e.grid().time(k));
    return rep;
}

// u_j(x) = sum_i gen_i(x) M_ij, so that (M v) . gen = u . v.
inline std::vector<double> weighted_generator(const LagrangianSpec& L, const SymmetryGroupSpec& g, std::span<const double> x) {
    const auto gen = g.generator(x);
    std::vector<double> u(gen.size(), 0.0);
    for (std::size_t j = 0; j < gen.size(); ++j)
        for (std::size_t i = 0; i < gen.size(); ++i) u[j] += gen[i] * L.M(i, j);
    return u;
}

}  // namespace detail

/// I(t) along the sampled steps of dX. Per-path terms (M D X) . gen(X) are treated as
/// independent across paths, which holds when dX is a function of X(t) (field route).
/// The slope CI comes from bootstrapping per-path OLS slope contributions, which
/// average to the slope of the mean series.
inline ConservationReport noether_integral(const PathEnsemble& e, const LagrangianSpec& L, const SymmetryGroupSpec& g,
                                           const ComplexProcessSample& dX, const ConservationOptions& opts = {}) {
    if (dX.dim() != e.dim() || dX.n_paths() != e.n_paths()) throw InvalidArgument("D X sample does not match the ensemble");
    ConservationReport rep = detail::start_report(e, L, g, dX.steps());
    const std::size_t n = e.n_paths(), ns = dX.n_slices(), d = static_cast<std::size_t>(e.dim());
    std::vector<cplx> c(n * ns);
    for (std::size_t s = 0; s < ns; ++s) {
        const int k = dX.steps()[s];
        for (std::size_t p = 0; p < n; ++p) {
            const auto u = detail::weighted_generator(L, g, e.state(k, p));
            auto v = dX.state(s, p);
            cplx acc{};
            for (std::size_t i = 0; i < d; ++i) acc += u[i] * v[i];
            c[p * ns + s] = acc;
        }
        if (g.kind == SymmetryGroupSpec::Kind::Rotation) rep.angular_momentum.push_back(detail::angular_momentum_mean(e, dX, s));
    }
    detail::conservation_verdict(rep, c, n, opts);
    return rep;
}

/// Estimator route: D_mu X from k-NN regression of increments. The k-NN fit is a linear
/// smoother W, so E[u . W y] = E[(W^T u) . y] is written as a mean of per-path terms
/// built from raw increments y, which are independent across paths.
inline ConservationReport noether_integral(const PathEnsemble& e, const LagrangianSpec& L, const SymmetryGroupSpec& g,
                                           const std::vector<int>& steps, const EstimatorConfig& cfg, int mu = 1,
                                           const ConservationOptions& opts = {}) {
    if (mu < -1 || mu > 1) throw InvalidArgument("mu must be -1, 0 or +1");
    ConservationReport rep = detail::start_report(e, L, g, steps);
    const std::size_t n = e.n_paths(), ns = steps.size();
    const int d = e.dim();
    const int h = cfg.h_steps;
    const cplx wf(0.5, 0.5 * mu), wb(0.5, -0.5 * mu);
    std::vector<cplx> c(n * ns, cplx{});
    std::vector<double> uj(n);
    for (std::size_t s = 0; s < ns; ++s) {
        const int k = steps[s];
        stochemb::detail::check_estimator(e, k, cfg, true);
        stochemb::detail::check_estimator(e, k, cfg, false);
        std::vector<std::vector<double>> u(n);
        for (std::size_t p = 0; p < n; ++p) u[p] = detail::weighted_generator(L, g, e.state(k, p));
        for (int j = 0; j < d; ++j) {
            for (std::size_t p = 0; p < n; ++p) uj[p] = u[p][static_cast<std::size_t>(j)];
            const auto wt = stochemb::detail::smoother_adjoint(e, k, uj, cfg);
            const auto fy = stochemb::detail::quotient(e, j, k, k + h), by = stochemb::detail::quotient(e, j, k - h, k);
            for (std::size_t p = 0; p < n; ++p) c[p * ns + s] += wt[p] * (wf * fy[p] + wb * by[p]);
        }
    }
    if (g.kind == SymmetryGroupSpec::Kind::Rotation) {
        const auto dX = stochastic_derivative(forward_derivative(e, steps, cfg), backward_derivative(e, steps, cfg), mu);
        for (std::size_t s = 0; s < ns; ++s) rep.angular_momentum.push_back(detail::angular_momentum_mean(e, dX, s));
    }
    detail::conservation_verdict(rep, c, n, opts);
    return rep;
}

}  // namespace stochemb::lagrange
