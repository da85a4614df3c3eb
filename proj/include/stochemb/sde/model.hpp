#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/fieldexpr/field.hpp"

namespace stochemb {

struct PointMass {
    std::vector<double> x;
};

struct GaussianLaw {
    std::vector<double> mean;
    std::vector<double> cov;  // d*d, row-major
};

/// Explicit initial samples; path p starts at samples[p % count].
struct SampleLaw {
    std::vector<double> points;  // count*d, point-major
    int dim = 1;
    std::size_t count() const { return points.size() / static_cast<std::size_t>(dim); }
};

using InitialLaw = std::variant<PointMass, GaussianLaw, SampleLaw>;

/// Lower Cholesky factor of a symmetric positive semidefinite matrix.
inline std::vector<double> cholesky_psd(const std::vector<double>& a, int d) {
    std::vector<double> l(static_cast<std::size_t>(d * d), 0.0);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[static_cast<std::size_t>(i * d + j)];
            for (int k = 0; k < j; ++k) s -= l[static_cast<std::size_t>(i * d + k)] * l[static_cast<std::size_t>(j * d + k)];
            if (i == j) {
                const double scale = std::abs(a[static_cast<std::size_t>(i * d + i)]) + 1.0;
                if (s < -1e-12 * scale) throw InvalidArgument("covariance is not positive semidefinite");
                l[static_cast<std::size_t>(i * d + i)] = s > 0 ? std::sqrt(s) : 0.0;
            } else {
                const double ljj = l[static_cast<std::size_t>(j * d + j)];
                l[static_cast<std::size_t>(i * d + j)] = ljj > 0 ? s / ljj : 0.0;
            }
        }
    }
    return l;
}

/// Reads whitespace/comma separated points, one per line; '#' starts a comment.
inline SampleLaw read_sample_file(const std::string& path, int dim) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open initial sample file '" + path + "'");
    SampleLaw law;
    law.dim = dim;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (row.empty()) continue;
        if (row.size() != static_cast<std::size_t>(dim))
            throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) + " values");
        law.points.insert(law.points.end(), row.begin(), row.end());
    }
    if (law.points.empty()) throw InvalidArgument("initial sample file '" + path + "' has no points");
    return law;
}

/// dX = b(t, X) dt + sigma(t, X) dW. The diffusion is a scalar field (sigma * Id)
/// or a d*d matrix field in row-major order.
struct DiffusionModel {
    int dim = 1;
    FieldPtr drift;
    FieldPtr diffusion;
    InitialLaw initial = PointMass{{0.0}};
    std::string tag;

    bool scalar_diffusion() const { return diffusion->arity() == 1; }

    void validate() const {
        if (dim < 1) throw InvalidArgument("model dimension must be >= 1");
        if (!drift || drift->dim() != dim || drift->arity() != dim)
            throw InvalidArgument("drift must be a " + std::to_string(dim) + "-vector field of dimension " + std::to_string(dim));
        if (!diffusion || diffusion->dim() != dim ||
            (diffusion->arity() != 1 && diffusion->arity() != dim * dim))
            throw InvalidArgument("diffusion must be a scalar or a d*d matrix field");
        std::visit(
            [&](const auto& law) {
                using L = std::decay_t<decltype(law)>;
                if constexpr (std::is_same_v<L, PointMass>) {
                    if (law.x.size() != static_cast<std::size_t>(dim)) throw InvalidArgument("point-mass initial law has wrong size");
                } else if constexpr (std::is_same_v<L, GaussianLaw>) {
                    if (law.mean.size() != static_cast<std::size_t>(dim) ||
                        law.cov.size() != static_cast<std::size_t>(dim * dim))
                        throw InvalidArgument("Gaussian initial law has wrong size");
                    for (int i = 0; i < dim; ++i)
                        for (int j = 0; j < dim; ++j)
                            if (law.cov[static_cast<std::size_t>(i * dim + j)] != law.cov[static_cast<std::size_t>(j * dim + i)])
                                throw InvalidArgument("Gaussian covariance must be symmetric");
                    (void)cholesky_psd(law.cov, dim);
                } else {
                    if (law.dim != dim || law.points.empty()) throw InvalidArgument("sample initial law has wrong size");
                }
            },
            initial);
    }

    /// a = sigma sigma^T at (t, x), row-major d*d.
    std::vector<double> a_matrix(double t, std::span<const double> x) const {
        const auto s = diffusion->values(t, x);
        const std::size_t d = static_cast<std::size_t>(dim);
        std::vector<double> a(d * d, 0.0);
        if (s.size() == 1) {
            for (std::size_t i = 0; i < d; ++i) a[i * d + i] = s[0] * s[0];
            return a;
        }
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double v = 0;
                for (std::size_t k = 0; k < d; ++k) v += s[i * d + k] * s[j * d + k];
                a[i * d + j] = v;
            }
        return a;
    }
};

/// Symbolic a = sigma sigma^T when the diffusion is an expression field; null otherwise.
inline std::shared_ptr<const ExprField> diffusion_matrix_expr(const DiffusionModel& m) {
    auto ef = std::dynamic_pointer_cast<const ExprField>(m.diffusion);
    if (!ef) return nullptr;
    using namespace fieldexpr;
    const int d = m.dim;
    const FieldExpr& s = ef->expr();
    std::vector<NodePtr> a(static_cast<std::size_t>(d * d));
    if (s.arity() == 1) {
        NodePtr s2 = pow(s.component(0), 2);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) a[static_cast<std::size_t>(i * d + j)] = i == j ? s2 : constant(0.0);
    } else {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                NodePtr acc = constant(0.0);
                for (int k = 0; k < d; ++k)
                    acc = add(acc, mul(s.component(static_cast<std::size_t>(i * d + k)), s.component(static_cast<std::size_t>(j * d + k))));
                a[static_cast<std::size_t>(i * d + j)] = acc;
            }
    }
    return std::make_shared<const ExprField>(FieldExpr(d, std::move(a), true));
}

/// Convenience: model from expression strings.
inline DiffusionModel make_model(int dim, const std::string& drift, const std::string& diffusion, InitialLaw initial,
                                 const fieldexpr::Constants& constants = {}, std::string tag = {}) {
    DiffusionModel m;
    m.dim = dim;
    m.drift = make_field(fieldexpr::parse_field(drift, dim, static_cast<std::size_t>(dim), constants));
    auto sig = fieldexpr::parse_field(diffusion, dim, constants);
    if (sig.arity() != 1 && sig.arity() != static_cast<std::size_t>(dim * dim))
        throw ParseError("arity mismatch: diffusion needs 1 or " + std::to_string(dim * dim) + " components", 0);
    m.diffusion = make_field(std::move(sig));
    m.initial = std::move(initial);
    m.tag = tag.empty() ? "drift=" + drift + ";diffusion=" + diffusion : std::move(tag);
    m.validate();
    return m;
}

}  // namespace stochemb
