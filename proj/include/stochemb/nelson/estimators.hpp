#pragma once

// Sample-based Nelson derivatives. Conditional expectations given the past
// (future) are replaced by k-NN regression on the current state X(t), which is
// exact for Markov diffusions.

#include <complex>
#include <string>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/nelson/knn.hpp"
#include "stochemb/nelson/sample.hpp"
#include "stochemb/sde/ensemble.hpp"

namespace stochemb {

struct EstimatorConfig {
    int h_steps = 1;
    std::size_t k = 0;  // 0: ceil(sqrt(N))
    RegressionMethod method = RegressionMethod::LocalMean;
    int workers = 0;
    /// Components of the state used for conditioning; empty means all.
    std::vector<int> condition_on;

    KnnOptions knn() const { return {k, method, workers}; }
};

namespace detail {

inline std::vector<double> conditioning_states(const PathEnsemble& e, int step, const std::vector<int>& comps) {
    if (comps.empty()) {
        auto s = e.slice(step);
        return {s.begin(), s.end()};
    }
    std::vector<double> out;
    out.reserve(e.n_paths() * comps.size());
    for (std::size_t p = 0; p < e.n_paths(); ++p)
        for (int c : comps) {
            if (c < 0 || c >= e.dim()) throw InvalidArgument("conditioning component out of range");
            out.push_back(e.at(step, p, c));
        }
    return out;
}

inline void check_estimator(const PathEnsemble& e, int t_index, const EstimatorConfig& cfg, bool forward) {
    if (cfg.h_steps < 1) throw InvalidArgument("h_steps must be >= 1");
    const std::size_t k = cfg.k ? cfg.k : default_k(e.n_paths());
    if (k > e.n_paths()) throw InvalidArgument("k_neighbors exceeds the number of paths");
    if (forward && (t_index < 0 || t_index + cfg.h_steps > e.grid().n_steps))
        throw InvalidArgument("forward derivative needs t_index + h_steps <= n_steps (right boundary)");
    if (!forward && (t_index - cfg.h_steps < 0 || t_index > e.grid().n_steps))
        throw InvalidArgument("backward derivative needs t_index - h_steps >= 0 (left boundary)");
}

inline ComplexProcessSample nelson_estimate(const PathEnsemble& e, const std::vector<int>& steps, const EstimatorConfig& cfg,
                                            bool forward) {
    ComplexProcessSample out(e.grid(), steps, e.n_paths(), e.dim(), forward ? SampleKind::Forward : SampleKind::Backward);
    const double h = cfg.h_steps * e.grid().dt();
    const std::size_t n = e.n_paths();
    const int d = e.dim();
    const int dim_cond = cfg.condition_on.empty() ? d : static_cast<int>(cfg.condition_on.size());
    std::vector<double> y(n * static_cast<std::size_t>(d));
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const int k = steps[s];
        check_estimator(e, k, cfg, forward);
        const int a = forward ? k : k - cfg.h_steps;
        const int b = forward ? k + cfg.h_steps : k;
        for (std::size_t p = 0; p < n; ++p)
            for (int i = 0; i < d; ++i) y[p * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] = (e.at(b, p, i) - e.at(a, p, i)) / h;
        const auto x = conditioning_states(e, k, cfg.condition_on);
        const auto est = knn_regress(x, dim_cond, y, d, cfg.knn());
        for (std::size_t p = 0; p < n; ++p)
            for (int i = 0; i < d; ++i) out.at(s, p, i) = {est[p * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)], 0.0};
    }
    return out;
}

}  // namespace detail

/// DX(t) = E[(X(t+h) - X(t))/h | X(t)], per path, on each requested step.
inline ComplexProcessSample forward_derivative(const PathEnsemble& e, const std::vector<int>& steps, const EstimatorConfig& cfg = {}) {
    return detail::nelson_estimate(e, steps, cfg, true);
}

inline ComplexProcessSample forward_derivative(const PathEnsemble& e, int t_index, int h_steps = 1, std::size_t k_neighbors = 0) {
    EstimatorConfig cfg;
    cfg.h_steps = h_steps;
    cfg.k = k_neighbors;
    return forward_derivative(e, std::vector<int>{t_index}, cfg);
}

/// D_*X(t) = E[(X(t) - X(t-h))/h | X(t)], per path, on each requested step.
inline ComplexProcessSample backward_derivative(const PathEnsemble& e, const std::vector<int>& steps, const EstimatorConfig& cfg = {}) {
    return detail::nelson_estimate(e, steps, cfg, false);
}

inline ComplexProcessSample backward_derivative(const PathEnsemble& e, int t_index, int h_steps = 1, std::size_t k_neighbors = 0) {
    EstimatorConfig cfg;
    cfg.h_steps = h_steps;
    cfg.k = k_neighbors;
    return backward_derivative(e, std::vector<int>{t_index}, cfg);
}

/// (D + D_*)/2 + i mu (D - D_*)/2, elementwise.
inline ComplexProcessSample stochastic_derivative(const ComplexProcessSample& fwd, const ComplexProcessSample& bwd, int mu) {
    if (mu < -1 || mu > 1) throw InvalidArgument("mu must be -1, 0 or +1");
    if (!fwd.same_shape(bwd)) throw InvalidArgument("forward and backward samples differ in shape");
    ComplexProcessSample out = fwd;
    out.set_kind(SampleKind::Stochastic, mu);
    const cplx half_i_mu(0.0, 0.5 * mu);
    auto& o = out.raw();
    const auto& f = fwd.raw();
    const auto& b = bwd.raw();
    for (std::size_t j = 0; j < o.size(); ++j) {
        const cplx sym = 0.5 * (f[j] + b[j]);
        const cplx anti = f[j] - b[j];
        o[j] = mu == 0 ? sym : sym + half_i_mu * anti;
    }
    return out;
}

/// Forward quadratic variation E[(X(t+h)-X(t))(X(t+h)-X(t))^T / h | X(t)], d*d per path.
inline std::vector<double> quadratic_variation(const PathEnsemble& e, int t_index, int h_steps = 1, std::size_t k_neighbors = 0,
                                               RegressionMethod method = RegressionMethod::LocalMean) {
    EstimatorConfig cfg;
    cfg.h_steps = h_steps;
    cfg.k = k_neighbors;
    cfg.method = method;
    detail::check_estimator(e, t_index, cfg, true);
    const std::size_t n = e.n_paths();
    const std::size_t d = static_cast<std::size_t>(e.dim());
    const double h = h_steps * e.grid().dt();
    std::vector<double> y(n * d * d);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double di = e.at(t_index + h_steps, p, static_cast<int>(i)) - e.at(t_index, p, static_cast<int>(i));
                const double dj = e.at(t_index + h_steps, p, static_cast<int>(j)) - e.at(t_index, p, static_cast<int>(j));
                y[(p * d + i) * d + j] = di * dj / h;
            }
    auto s = e.slice(t_index);
    return knn_regress(std::vector<double>(s.begin(), s.end()), e.dim(), y, static_cast<int>(d * d), cfg.knn());
}

}  // namespace stochemb
