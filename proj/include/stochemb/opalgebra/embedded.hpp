#pragma once

// Stochastic embedding of a differential operator O = sum_i a_i(x, t) d^i/dt^i:
// d/dt is replaced by D_mu, both symbolically (for the reversibility test) and
// numerically along an ensemble (residual of O_stoc . X).

#include <optional>
#include <string>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/fieldexpr/field.hpp"
#include "stochemb/nelson/composition.hpp"
#include "stochemb/opalgebra/word_poly.hpp"

namespace stochemb::opalgebra {

enum class OperatorForm {
    Standard,  // sum_i a_i D^i X (+ forcing)
    Composed,  // a_0 X + D(a_1(X, t)) (+ forcing): the D o a brick
};

struct EmbeddedOperatorSpec {
    int degree = 0;
    std::vector<FieldExpr> coefficients;  // a_0 .. a_degree, scalar or one entry per component
    int mu = 1;                           // 0 is the reversible embedding
    OperatorForm form = OperatorForm::Standard;
    /// Term independent of X's derivatives, e.g. grad U(X) in D^2 X + grad U(X) = 0.
    std::optional<FieldExpr> forcing;

    void validate() const {
        check_mu(mu);
        if (degree < 0) throw InvalidArgument("operator degree must be >= 0");
        if (coefficients.size() != static_cast<std::size_t>(degree) + 1)
            throw InvalidArgument("operator needs degree + 1 coefficients");
        if (form == OperatorForm::Composed && degree != 1) throw InvalidArgument("composed form D o a has degree 1");
        for (const auto& c : coefficients)
            if (c.dim() != coefficients[0].dim()) throw InvalidArgument("operator coefficients differ in dimension");
        if (forcing && forcing->dim() != coefficients[0].dim()) throw InvalidArgument("forcing dimension mismatch");
    }
};

namespace detail {
inline bool identically_zero(const FieldExpr& f) {
    for (std::size_t i = 0; i < f.arity(); ++i)
        if (!fieldexpr::is_const(f.component(i), 0.0)) return false;
    return true;
}
}  // namespace detail

/// One homogeneous piece of the operator: its coefficient index and the word polynomial it multiplies.
struct OperatorTerm {
    int order = 0;  // power of D_mu; -1 for the forcing term
    OperatorWordPoly poly;
};

/// Nonzero terms of the embedded operator, with D_mu^i expanded in C[D, D_*].
inline std::vector<OperatorTerm> operator_terms(const EmbeddedOperatorSpec& spec) {
    spec.validate();
    std::vector<OperatorTerm> out;
    const OperatorWordPoly dmu = build_Dmu(spec.mu);
    for (int i = 0; i <= spec.degree; ++i)
        if (!detail::identically_zero(spec.coefficients[static_cast<std::size_t>(i)])) out.push_back({i, power(dmu, i)});
    if (spec.forcing && !detail::identically_zero(*spec.forcing)) out.push_back({-1, OperatorWordPoly::identity()});
    return out;
}

struct ReversibilityReport {
    bool reversible = false;
    int sign = 0;             // s in R(O) = s O or s conj(O)
    bool conjugated = false;  // true when R(O) = s conj(O)
    /// R(D_0) = -D_0, so for mu = 0 the embedding commutes with time reversal d/dt -> -d/dt.
    bool commutes_with_reversal = false;
    std::vector<OperatorTerm> terms;
    std::vector<OperatorTerm> witness;  // R applied to each term

    std::string describe() const {
        std::string out;
        for (std::size_t k = 0; k < terms.size(); ++k) {
            const std::string name = terms[k].order < 0 ? "forcing" : "a" + std::to_string(terms[k].order);
            out += name + ": " + terms[k].poly.to_string() + "  ->  " + witness[k].poly.to_string() + "\n";
        }
        return out;
    }
};

/// O . X = 0 is reversible when R(O) . X = 0 follows from it. The coefficients
/// a_i(X, t) are real, so with a common sign s this holds when R maps every
/// term to s times itself, or to s times its conjugate (then R(O) X = s conj(O X)).
inline ReversibilityReport is_reversible(const EmbeddedOperatorSpec& spec) {
    ReversibilityReport rep;
    rep.terms = operator_terms(spec);
    rep.commutes_with_reversal = spec.mu == 0;
    for (const auto& t : rep.terms) rep.witness.push_back({t.order, reversibility_transform(t.poly)});
    if (rep.terms.empty()) {
        rep.reversible = true;
        rep.sign = 1;
        return rep;
    }
    for (bool conjugated : {false, true})
        for (int s : {1, -1}) {
            bool ok = true;
            for (std::size_t k = 0; k < rep.terms.size() && ok; ++k) {
                const OperatorWordPoly target = QComplex(s) * (conjugated ? conjugate(rep.terms[k].poly) : rep.terms[k].poly);
                ok = rep.witness[k].poly == target;
            }
            if (ok) {
                rep.reversible = true;
                rep.sign = s;
                rep.conjugated = conjugated;
                return rep;
            }
        }
    return rep;
}

namespace detail {

// Value of coefficient c at (t, x) for output component i (scalar coefficients broadcast).
inline double coeff_value(const FieldExpr& c, std::size_t i, double t, std::span<const double> x) {
    return c.value(c.arity() == 1 ? 0 : i, t, x);
}

}  // namespace detail

/// Per-path residual of O_stoc . X on the requested steps, using field-route D_mu^i X.
inline ComplexProcessSample apply_embedded(const EmbeddedOperatorSpec& spec, const PathEnsemble& e, const NelsonFields& nf,
                                           const std::vector<int>& steps, int workers = 0) {
    spec.validate();
    if (spec.degree > 2) throw InvalidArgument("embedded operators of degree > 2 are not supported");
    const int d = e.dim();
    if (spec.coefficients[0].dim() != d) throw InvalidArgument("operator dimension does not match the ensemble");
    int m = d;
    ComplexProcessSample composed;
    if (spec.form == OperatorForm::Composed) {
        const FieldExpr& a1 = spec.coefficients[1];
        m = static_cast<int>(a1.arity());
        if (m != d && !detail::identically_zero(spec.coefficients[0]))
            throw InvalidArgument("composed form: a_0 X needs a_1 with one component per coordinate");
        composed = derivative_of_function(a1, e, nf, spec.mu, steps, workers);
    }
    for (const auto& c : spec.coefficients)
        if (c.arity() != 1 && static_cast<int>(c.arity()) != m && spec.form == OperatorForm::Standard)
            throw InvalidArgument("coefficient must be scalar or have one component per coordinate");
    if (spec.forcing && static_cast<int>(spec.forcing->arity()) != m) throw InvalidArgument("forcing arity mismatch");

    std::optional<ComplexProcessSample> d1, d2;
    if (spec.form == OperatorForm::Standard) {
        if (spec.degree >= 1 && !detail::identically_zero(spec.coefficients[1]))
            d1 = stochastic_derivative_from_fields(e, nf, spec.mu, steps);
        if (spec.degree >= 2 && !detail::identically_zero(spec.coefficients[2])) d2 = second_derivative(e, nf, spec.mu, steps, workers);
    }
    ComplexProcessSample out(e.grid(), steps, e.n_paths(), m, SampleKind::Residual, spec.mu);
    const bool has_a0 = !detail::identically_zero(spec.coefficients[0]);
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const double t = e.grid().time(steps[s]);
        for (std::size_t p = 0; p < e.n_paths(); ++p) {
            auto x = e.state(steps[s], p);
            for (int i = 0; i < m; ++i) {
                const std::size_t iu = static_cast<std::size_t>(i);
                cplx r{};
                if (has_a0) r += detail::coeff_value(spec.coefficients[0], iu, t, x) * x[iu];
                if (spec.form == OperatorForm::Composed) {
                    r += composed.at(s, p, i);
                } else {
                    if (d1) r += detail::coeff_value(spec.coefficients[1], iu, t, x) * d1->at(s, p, i);
                    if (d2) r += detail::coeff_value(spec.coefficients[2], iu, t, x) * d2->at(s, p, i);
                }
                if (spec.forcing) r += spec.forcing->value(iu, t, x);
                out.at(s, p, i) = r;
            }
        }
    }
    return out;
}

}  // namespace stochemb::opalgebra

namespace stochemb {
using opalgebra::OperatorWordPoly;
}
