#pragma once

// k-nearest-neighbour regression of responses on states, E[Y | X = X_p].

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/core/parallel.hpp"

namespace stochemb {

enum class RegressionMethod { LocalMean, LocalLinear };

struct KnnOptions {
    std::size_t k = 0;  // 0: ceil(sqrt(N))
    RegressionMethod method = RegressionMethod::LocalMean;
    int workers = 0;
};

inline std::size_t default_k(std::size_t n) {
    return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
}

namespace knn_detail {

// Window [l, l+k) of sorted values realising the k nearest neighbours of each
// sorted position; ties go to the lower position.
inline std::vector<std::size_t> windows_1d(std::span<const double> sorted, std::size_t k) {
    const std::size_t n = sorted.size();
    std::vector<std::size_t> left(n);
    std::size_t l = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (l + k <= i) l = i + 1 - k;
        while (l + k < n && sorted[l + k] - sorted[i] < sorted[i] - sorted[l]) ++l;
        left[i] = l;
    }
    return left;
}

// Gaussian elimination with partial pivoting; near-singular directions get a zero coefficient.
inline std::vector<double> solve_small(std::vector<double> a, std::vector<double> b, std::size_t n) {
    std::vector<int> used_col(n, 1);
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
        double scale = 0;
        for (std::size_t r = 0; r < n; ++r) scale = std::max(scale, std::abs(a[r * n + r]));
        if (std::abs(a[piv * n + c]) <= 1e-12 * (scale > 0 ? scale : 1.0)) {
            used_col[c] = 0;
            continue;
        }
        if (piv != c) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[c * n + j], a[piv * n + j]);
            std::swap(b[c], b[piv]);
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r * n + c] / a[c * n + c];
            if (f == 0) continue;
            for (std::size_t j = c; j < n; ++j) a[r * n + j] -= f * a[c * n + j];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t c = 0; c < n; ++c)
        if (used_col[c]) x[c] = b[c] / a[c * n + c];
    return x;
}

class KdTree {
public:
    KdTree(std::span<const double> pts, std::size_t dim) : p_(pts), d_(dim), n_(pts.size() / dim) {
        idx_.resize(n_);
        std::iota(idx_.begin(), idx_.end(), std::size_t{0});
        nodes_.reserve(2 * n_ / kLeaf + 2);
        build(0, n_);
    }

    /// Indices of the k nearest points to q, ordered by (distance, index).
    void query(std::span<const double> q, std::size_t k, std::vector<std::pair<double, std::size_t>>& heap) const {
        heap.clear();
        search(0, q, k, heap);
        std::sort_heap(heap.begin(), heap.end());
    }

private:
    static constexpr std::size_t kLeaf = 16;
    struct Node {
        std::size_t begin, end;
        int axis = -1;
        double split = 0;
        int left = -1, right = -1;
    };
    std::span<const double> p_;
    std::size_t d_, n_;
    std::vector<std::size_t> idx_;
    std::vector<Node> nodes_;

    double coord(std::size_t i, std::size_t a) const { return p_[i * d_ + a]; }

    int build(std::size_t b, std::size_t e) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({b, e});
        if (e - b <= kLeaf) return id;
        std::size_t axis = 0;
        double best = -1;
        for (std::size_t a = 0; a < d_; ++a) {
            double lo = coord(idx_[b], a), hi = lo;
            for (std::size_t i = b; i < e; ++i) {
                lo = std::min(lo, coord(idx_[i], a));
                hi = std::max(hi, coord(idx_[i], a));
            }
            if (hi - lo > best) {
                best = hi - lo;
                axis = a;
            }
        }
        if (best <= 0) return id;  // all points identical: keep as a leaf
        const std::size_t mid = b + (e - b) / 2;
        std::nth_element(idx_.begin() + static_cast<std::ptrdiff_t>(b), idx_.begin() + static_cast<std::ptrdiff_t>(mid),
                         idx_.begin() + static_cast<std::ptrdiff_t>(e), [&](std::size_t x, std::size_t y) {
                             const double cx = coord(x, axis), cy = coord(y, axis);
                             return cx < cy || (cx == cy && x < y);
                         });
        const double split = coord(idx_[mid], axis);
        const int l = build(b, mid);
        const int r = build(mid, e);
        nodes_[static_cast<std::size_t>(id)].axis = static_cast<int>(axis);
        nodes_[static_cast<std::size_t>(id)].split = split;
        nodes_[static_cast<std::size_t>(id)].left = l;
        nodes_[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    void search(int id, std::span<const double> q, std::size_t k, std::vector<std::pair<double, std::size_t>>& heap) const {
        const Node& nd = nodes_[static_cast<std::size_t>(id)];
        if (nd.axis < 0) {
            for (std::size_t i = nd.begin; i < nd.end; ++i) {
                const std::size_t j = idx_[i];
                double dist = 0;
                for (std::size_t a = 0; a < d_; ++a) {
                    const double u = q[a] - coord(j, a);
                    dist += u * u;
                }
                std::pair<double, std::size_t> cand{dist, j};
                if (heap.size() < k) {
                    heap.push_back(cand);
                    std::push_heap(heap.begin(), heap.end());
                } else if (cand < heap.front()) {
                    std::pop_heap(heap.begin(), heap.end());
                    heap.back() = cand;
                    std::push_heap(heap.begin(), heap.end());
                }
            }
            return;
        }
        const double diff = q[static_cast<std::size_t>(nd.axis)] - nd.split;
        const int near = diff < 0 ? nd.left : nd.right;
        const int far = diff < 0 ? nd.right : nd.left;
        search(near, q, k, heap);
        if (heap.size() < k || diff * diff <= heap.front().first) search(far, q, k, heap);
    }
};

}  // namespace knn_detail

/// For every point p, the k-NN regression estimate of E[Y | X = X_p].
///
/// X holds n points of dimension d (point-major); Y holds n responses with m
/// components. Coordinates are standardised before neighbour search. Output is
/// n*m values, independent of the worker count.
inline std::vector<double> knn_regress(std::span<const double> X, int dim, std::span<const double> Y, int m,
                                       KnnOptions opts = {}) {
    const std::size_t d = static_cast<std::size_t>(dim);
    const std::size_t mu = static_cast<std::size_t>(m);
    const std::size_t n = X.size() / d;
    if (n == 0 || Y.size() != n * mu) throw InvalidArgument("knn: mismatched states and responses");
    const std::size_t k = opts.k ? opts.k : default_k(n);
    if (k > n) throw InvalidArgument("k_neighbors exceeds the number of paths");
    if (k < 1) throw InvalidArgument("k_neighbors must be >= 1");
    const int workers = opts.workers > 0 ? opts.workers : default_workers();
    std::vector<double> out(n * mu, 0.0);

    if (d == 1) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return X[a] < X[b] || (X[a] == X[b] && a < b); });
        double center = 0;
        for (double v : X) center += v;
        center /= static_cast<double>(n);
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) xs[i] = X[order[i]];
        const auto left = knn_detail::windows_1d(xs, k);
        // Prefix sums over sorted order in extended precision.
        std::vector<long double> sx(n + 1, 0), sxx(n + 1, 0);
        std::vector<long double> sy((n + 1) * mu, 0), sxy((n + 1) * mu, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const long double x = xs[i] - center;
            sx[i + 1] = sx[i] + x;
            sxx[i + 1] = sxx[i] + x * x;
            for (std::size_t c = 0; c < mu; ++c) {
                const long double y = Y[order[i] * mu + c];
                sy[(i + 1) * mu + c] = sy[i * mu + c] + y;
                sxy[(i + 1) * mu + c] = sxy[i * mu + c] + x * y;
            }
        }
        const long double kk = static_cast<long double>(k);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t l = left[i], r = left[i] + k;
            const long double mx = (sx[r] - sx[l]) / kk;
            const long double cxx = (sxx[r] - sxx[l]) - kk * mx * mx;
            for (std::size_t c = 0; c < mu; ++c) {
                const long double my = (sy[r * mu + c] - sy[l * mu + c]) / kk;
                long double est = my;
                if (opts.method == RegressionMethod::LocalLinear && cxx > 1e-14L * kk * (1 + mx * mx)) {
                    const long double cxy = (sxy[r * mu + c] - sxy[l * mu + c]) - kk * mx * my;
                    est = my + cxy / cxx * ((xs[i] - center) - mx);
                }
                out[order[i] * mu + c] = static_cast<double>(est);
            }
        }
        return out;
    }

    // Standardise coordinates; a constant coordinate keeps unit scale.
    std::vector<double> z(X.begin(), X.end());
    for (std::size_t a = 0; a < d; ++a) {
        double mean = 0, sq = 0;
        for (std::size_t p = 0; p < n; ++p) mean += X[p * d + a];
        mean /= static_cast<double>(n);
        for (std::size_t p = 0; p < n; ++p) sq += (X[p * d + a] - mean) * (X[p * d + a] - mean);
        const double sd = std::sqrt(sq / static_cast<double>(n));
        const double scale = sd > 0 ? 1.0 / sd : 1.0;
        for (std::size_t p = 0; p < n; ++p) z[p * d + a] = (X[p * d + a] - mean) * scale;
    }
    knn_detail::KdTree tree(z, d);
    parallel_for_chunks(n, workers, [&](std::size_t b, std::size_t e) {
        std::vector<std::pair<double, std::size_t>> heap;
        heap.reserve(k + 1);
        const std::size_t q = d + 1;
        for (std::size_t p = b; p < e; ++p) {
            tree.query(std::span<const double>(z.data() + p * d, d), k, heap);
            if (opts.method == RegressionMethod::LocalMean) {
                for (std::size_t c = 0; c < mu; ++c) {
                    double s = 0;
                    for (const auto& [dist, j] : heap) s += Y[j * mu + c];
                    out[p * mu + c] = s / static_cast<double>(k);
                }
                continue;
            }
            // Local linear fit centred at the query point; the intercept is the estimate.
            std::vector<double> ata(q * q, 0.0);
            std::vector<double> row(q);
            for (const auto& [dist, j] : heap) {
                row[0] = 1.0;
                for (std::size_t a = 0; a < d; ++a) row[a + 1] = z[j * d + a] - z[p * d + a];
                for (std::size_t r = 0; r < q; ++r)
                    for (std::size_t s = 0; s < q; ++s) ata[r * q + s] += row[r] * row[s];
            }
            for (std::size_t c = 0; c < mu; ++c) {
                std::vector<double> aty(q, 0.0);
                for (const auto& [dist, j] : heap) {
                    const double y = Y[j * mu + c];
                    aty[0] += y;
                    for (std::size_t a = 0; a < d; ++a) aty[a + 1] += (z[j * d + a] - z[p * d + a]) * y;
                }
                out[p * mu + c] = knn_detail::solve_small(ata, aty, q)[0];
            }
        }
    });
    return out;
}

/// Transpose of the regression smoother: returns W^T g where knn_regress(X, Y) = W Y
/// for scalar responses. Used to write a mean of fitted values times g as a
/// mean over independent per-path terms.
inline std::vector<double> knn_adjoint(std::span<const double> X, int dim, std::span<const double> g, KnnOptions opts = {}) {
    const std::size_t d = static_cast<std::size_t>(dim);
    const std::size_t n = X.size() / d;
    if (n == 0 || g.size() != n) throw InvalidArgument("knn: mismatched states and weights");
    const std::size_t k = opts.k ? opts.k : default_k(n);
    if (k > n || k < 1) throw InvalidArgument("k_neighbors must be in [1, N]");
    std::vector<double> out(n, 0.0);

    if (d == 1) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return X[a] < X[b] || (X[a] == X[b] && a < b); });
        double center = 0;
        for (double v : X) center += v;
        center /= static_cast<double>(n);
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) xs[i] = X[order[i]];
        const auto left = knn_detail::windows_1d(xs, k);
        std::vector<long double> sx(n + 1, 0), sxx(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const long double x = xs[i] - center;
            sx[i + 1] = sx[i] + x;
            sxx[i + 1] = sxx[i] + x * x;
        }
        // Difference arrays over sorted ranks for the constant, slope and offset parts.
        std::vector<long double> d0(n + 1, 0), d1(n + 1, 0), d2(n + 1, 0);
        const long double kk = static_cast<long double>(k);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t l = left[i], r = left[i] + k;
            const long double gi = g[order[i]];
            d0[l] += gi / kk;
            d0[r] -= gi / kk;
            if (opts.method != RegressionMethod::LocalLinear) continue;
            const long double mx = (sx[r] - sx[l]) / kk;
            const long double cxx = (sxx[r] - sxx[l]) - kk * mx * mx;
            if (!(cxx > 1e-14L * kk * (1 + mx * mx))) continue;
            const long double c = ((xs[i] - center) - mx) / cxx;
            d1[l] += gi * c;
            d1[r] -= gi * c;
            d2[l] += gi * c * mx;
            d2[r] -= gi * c * mx;
        }
        long double a0 = 0, a1 = 0, a2 = 0;
        for (std::size_t j = 0; j < n; ++j) {
            a0 += d0[j];
            a1 += d1[j];
            a2 += d2[j];
            out[order[j]] = static_cast<double>(a0 + (xs[j] - center) * a1 - a2);
        }
        return out;
    }

    std::vector<double> z(X.begin(), X.end());
    for (std::size_t a = 0; a < d; ++a) {
        double mean = 0, sq = 0;
        for (std::size_t p = 0; p < n; ++p) mean += X[p * d + a];
        mean /= static_cast<double>(n);
        for (std::size_t p = 0; p < n; ++p) sq += (X[p * d + a] - mean) * (X[p * d + a] - mean);
        const double sd = std::sqrt(sq / static_cast<double>(n));
        const double scale = sd > 0 ? 1.0 / sd : 1.0;
        for (std::size_t p = 0; p < n; ++p) z[p * d + a] = (X[p * d + a] - mean) * scale;
    }
    knn_detail::KdTree tree(z, d);
    std::vector<std::pair<double, std::size_t>> heap;
    const std::size_t q = d + 1;
    std::vector<double> ata(q * q), row(q), e0(q, 0.0);
    e0[0] = 1.0;
    for (std::size_t p = 0; p < n; ++p) {
        tree.query(std::span<const double>(z.data() + p * d, d), k, heap);
        if (opts.method == RegressionMethod::LocalMean) {
            for (const auto& [dist, j] : heap) out[j] += g[p] / static_cast<double>(k);
            continue;
        }
        std::fill(ata.begin(), ata.end(), 0.0);
        for (const auto& [dist, j] : heap) {
            row[0] = 1.0;
            for (std::size_t a = 0; a < d; ++a) row[a + 1] = z[j * d + a] - z[p * d + a];
            for (std::size_t r = 0; r < q; ++r)
                for (std::size_t s = 0; s < q; ++s) ata[r * q + s] += row[r] * row[s];
        }
        const auto v = knn_detail::solve_small(ata, e0, q);
        for (const auto& [dist, j] : heap) {
            double w = v[0];
            for (std::size_t a = 0; a < d; ++a) w += (z[j * d + a] - z[p * d + a]) * v[a + 1];
            out[j] += g[p] * w;
        }
    }
    return out;
}

}  // namespace stochemb
