#pragma once

// Stochastic derivatives of functions of the process,
//   D_mu f(t, X) = d_t f + (D_mu X) . grad f + (i mu / 2) a^{ij} d_ij f,
// extended C-linearly to complex f. With D_mu X = g(t, X) from the Nelson
// fields, D_mu^2 X is D_mu applied to the complex field g.

#include <algorithm>
#include <complex>
#include <span>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/parallel.hpp"
#include "stochemb/nelson/estimators.hpp"
#include "stochemb/nelson/fields.hpp"
#include "stochemb/nelson/sample.hpp"
#include "stochemb/sde/ensemble.hpp"

namespace stochemb {

/// D_mu of the complex scalar re + i im at a point, given their jets.
inline cplx apply_stochastic_derivative(const Jet& re, const Jet& im, std::span<const cplx> dX, std::span<const double> a, int mu) {
    const std::size_t d = dX.size();
    const cplx f_t(re.grad(0), im.grad(0));
    cplx drift{};
    double diff_re = 0, diff_im = 0;
    for (std::size_t i = 0; i < d; ++i) {
        const int ii = static_cast<int>(i) + 1;
        drift += dX[i] * cplx(re.grad(ii), im.grad(ii));
        for (std::size_t j = 0; j < d; ++j) {
            const int jj = static_cast<int>(j) + 1;
            diff_re += a[i * d + j] * re.hess(ii, jj);
            diff_im += a[i * d + j] * im.hess(ii, jj);
        }
    }
    // (i mu / 2) (diff_re + i diff_im)
    const cplx diffusion = cplx(0.0, 0.5 * mu) * cplx(diff_re, diff_im);
    return f_t + drift + diffusion;
}

/// Complex vector field re + i im; `im` may be null (real field).
struct ComplexField {
    FieldPtr re;
    FieldPtr im;
    int arity() const { return re->arity(); }
    int dim() const { return re->dim(); }
};

inline ComplexField stochastic_velocity(const NelsonFields& nf, int mu) { return {nf.velocity_re(), nf.velocity_im(mu)}; }

namespace detail {

inline void check_mu(int mu) {
    if (mu < -1 || mu > 1) throw InvalidArgument("mu must be -1, 0 or +1");
}

inline void check_steps(const PathEnsemble& e, const std::vector<int>& steps) {
    for (int s : steps)
        if (s < 0 || s > e.grid().n_steps) throw InvalidArgument("step outside the grid");
}

// Core loop: D_mu F(t, X) per path, with D_mu X either from a sample or from a field.
inline ComplexProcessSample derivative_core(const ComplexField& F, const PathEnsemble& e, const FieldPtr& a_field, int mu,
                                            const std::vector<int>& steps, const ComplexField* velocity,
                                            const ComplexProcessSample* dX, SampleKind kind, int workers) {
    check_mu(mu);
    check_steps(e, steps);
    const int d = e.dim();
    if (F.dim() != d) throw InvalidArgument("field dimension does not match the ensemble");
    if (d > kJetVars - 1) throw InvalidArgument("field composition supports dimension <= 3");
    const int m = F.arity();
    ComplexProcessSample out(e.grid(), steps, e.n_paths(), m, kind, mu);
    if (dX) {
        if (dX->dim() != d || dX->n_paths() != e.n_paths()) throw InvalidArgument("D_mu X sample does not match the ensemble");
    }
    const std::size_t du = static_cast<std::size_t>(d);
    const std::size_t mu_ = static_cast<std::size_t>(m);
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const int k = steps[s];
        const double t = e.grid().time(k);
        const std::size_t dx_slice = dX ? dX->slice_of(k) : 0;
        parallel_for_chunks(e.n_paths(), workers > 0 ? workers : default_workers(), [&](std::size_t b, std::size_t end) {
            std::vector<Jet> jx(du), fre(mu_), fim(mu_), vre(du), vim(du);
            std::vector<cplx> v(du);
            std::vector<double> a(du * du), vr(du), vi(du);
            for (std::size_t p = b; p < end; ++p) {
                auto x = e.state(k, p);
                const Jet jt = Jet::variable(t, 0);
                for (std::size_t i = 0; i < du; ++i) jx[i] = Jet::variable(x[i], static_cast<int>(i) + 1);
                F.re->eval_jet(jt, jx, fre);
                if (F.im)
                    F.im->eval_jet(jt, jx, fim);
                else
                    std::fill(fim.begin(), fim.end(), Jet(0.0));
                if (dX) {
                    auto st = dX->state(dx_slice, p);
                    std::copy(st.begin(), st.end(), v.begin());
                } else {
                    velocity->re->eval(t, x, vr);
                    velocity->im->eval(t, x, vi);
                    for (std::size_t i = 0; i < du; ++i) v[i] = {vr[i], vi[i]};
                }
                a_field->eval(t, x, a);
                for (std::size_t c = 0; c < mu_; ++c) out.at(s, p, static_cast<int>(c)) = apply_stochastic_derivative(fre[c], fim[c], v, a, mu);
            }
        });
    }
    return out;
}

}  // namespace detail

/// D_mu f(t, X(t)) per path with D_mu X = g_mu(t, X) from the Nelson fields.
inline ComplexProcessSample derivative_of_function(const ComplexField& f, const PathEnsemble& e, const NelsonFields& nf, int mu,
                                                   const std::vector<int>& steps, int workers = 0) {
    const ComplexField g = stochastic_velocity(nf, mu);
    return detail::derivative_core(f, e, nf.a, mu, steps, &g, nullptr, SampleKind::Function, workers);
}

inline ComplexProcessSample derivative_of_function(const FieldExpr& f, const PathEnsemble& e, const NelsonFields& nf, int mu,
                                                   const std::vector<int>& steps, int workers = 0) {
    return derivative_of_function(ComplexField{make_field(f), nullptr}, e, nf, mu, steps, workers);
}

/// Same formula with D_mu X taken from an estimated sample instead of the fields.
inline ComplexProcessSample derivative_of_function(const ComplexField& f, const PathEnsemble& e, const ComplexProcessSample& dX,
                                                   const FieldPtr& a, int mu, int workers = 0) {
    return detail::derivative_core(f, e, a, mu, dX.steps(), nullptr, &dX, SampleKind::Function, workers);
}

/// D_mu X = g_mu(t, X) evaluated along the paths.
inline ComplexProcessSample stochastic_derivative_from_fields(const PathEnsemble& e, const NelsonFields& nf, int mu,
                                                              const std::vector<int>& steps) {
    detail::check_mu(mu);
    detail::check_steps(e, steps);
    const int d = e.dim();
    ComplexProcessSample out(e.grid(), steps, e.n_paths(), d, SampleKind::Stochastic, mu);
    auto re = nf.velocity_re();
    auto im = nf.velocity_im(mu);
    std::vector<double> vr(static_cast<std::size_t>(d)), vi(static_cast<std::size_t>(d));
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const double t = e.grid().time(steps[s]);
        for (std::size_t p = 0; p < e.n_paths(); ++p) {
            auto x = e.state(steps[s], p);
            re->eval(t, x, vr);
            im->eval(t, x, vi);
            for (int i = 0; i < d; ++i) out.at(s, p, i) = {vr[static_cast<std::size_t>(i)], vi[static_cast<std::size_t>(i)]};
        }
    }
    return out;
}

/// D_mu^2 X by field composition: D_mu applied to g_mu(t, X).
inline ComplexProcessSample second_derivative(const PathEnsemble& e, const NelsonFields& nf, int mu, const std::vector<int>& steps,
                                              int workers = 0) {
    const ComplexField g = stochastic_velocity(nf, mu);
    auto out = detail::derivative_core(g, e, nf.a, mu, steps, &g, nullptr, SampleKind::Second, workers);
    out.set_kind(SampleKind::Second, mu);
    return out;
}

/// D_mu of an estimated complex process Y, by k-NN regression of its increments on X(t).
/// Y must be sampled at every step s and s +- h_steps for the requested steps.
inline ComplexProcessSample derivative_of_sample(const PathEnsemble& e, const ComplexProcessSample& Y, int mu,
                                                 const std::vector<int>& steps, const EstimatorConfig& cfg = {}) {
    detail::check_mu(mu);
    const std::size_t n = e.n_paths();
    const int m = Y.dim();
    const std::size_t mm = static_cast<std::size_t>(m);
    const double h = cfg.h_steps * e.grid().dt();
    ComplexProcessSample out(e.grid(), steps, n, m, SampleKind::Stochastic, mu);
    std::vector<double> yf(n * 2 * mm), yb(n * 2 * mm);
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const int k = steps[s];
        const std::size_t sp = Y.slice_of(k + cfg.h_steps), s0 = Y.slice_of(k), sm = Y.slice_of(k - cfg.h_steps);
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t c = 0; c < mm; ++c) {
                const cplx f = (Y.at(sp, p, static_cast<int>(c)) - Y.at(s0, p, static_cast<int>(c))) / h;
                const cplx b = (Y.at(s0, p, static_cast<int>(c)) - Y.at(sm, p, static_cast<int>(c))) / h;
                yf[p * 2 * mm + 2 * c] = f.real();
                yf[p * 2 * mm + 2 * c + 1] = f.imag();
                yb[p * 2 * mm + 2 * c] = b.real();
                yb[p * 2 * mm + 2 * c + 1] = b.imag();
            }
        const auto x = detail::conditioning_states(e, k, cfg.condition_on);
        const int dc = cfg.condition_on.empty() ? e.dim() : static_cast<int>(cfg.condition_on.size());
        const auto ef = knn_regress(x, dc, yf, 2 * m, cfg.knn());
        const auto eb = knn_regress(x, dc, yb, 2 * m, cfg.knn());
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t c = 0; c < mm; ++c) {
                const cplx f(ef[p * 2 * mm + 2 * c], ef[p * 2 * mm + 2 * c + 1]);
                const cplx b(eb[p * 2 * mm + 2 * c], eb[p * 2 * mm + 2 * c + 1]);
                out.at(s, p, static_cast<int>(c)) = 0.5 * (f + b) + cplx(0.0, 0.5 * mu) * (f - b);
            }
    }
    return out;
}

/// D_mu^2 X by chaining the sample estimators (cross-check of the field route).
inline ComplexProcessSample second_derivative_chained(const PathEnsemble& e, int mu, const std::vector<int>& steps,
                                                      const EstimatorConfig& cfg = {}) {
    std::vector<int> need;
    for (int s : steps)
        for (int o : {-cfg.h_steps, 0, cfg.h_steps}) need.push_back(s + o);
    std::sort(need.begin(), need.end());
    need.erase(std::unique(need.begin(), need.end()), need.end());
    auto fwd = forward_derivative(e, need, cfg);
    auto bwd = backward_derivative(e, need, cfg);
    auto dX = stochastic_derivative(fwd, bwd, mu);
    auto out = derivative_of_sample(e, dX, mu, steps, cfg);
    out.set_kind(SampleKind::Second, mu);
    return out;
}

}  // namespace stochemb
