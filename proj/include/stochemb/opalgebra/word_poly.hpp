#pragma once

// Polynomials over the free (non-commutative) algebra generated by D and D_*.

#include <map>
#include <string>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/opalgebra/rational.hpp"

namespace stochemb::opalgebra {

enum class Letter : unsigned char { D = 0, Dstar = 1 };

/// Word in D, D_*; the empty word is the identity. Composition is concatenation,
/// with the leftmost letter applied last.
using Word = std::vector<Letter>;

/// Canonical term order: shorter words first, then lexicographic with D < D_*.
struct WordOrder {
    bool operator()(const Word& a, const Word& b) const {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    }
};

inline std::string word_string(const Word& w) {
    if (w.empty()) return "1";
    std::string out;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) out += ' ';
        out += w[i] == Letter::D ? "D" : "D_*";
    }
    return out;
}

class OperatorWordPoly {
public:
    using Terms = std::map<Word, QComplex, WordOrder>;

    OperatorWordPoly() = default;

    static OperatorWordPoly identity() { return monomial({}, 1); }
    static OperatorWordPoly D() { return monomial({Letter::D}, 1); }
    static OperatorWordPoly Dstar() { return monomial({Letter::Dstar}, 1); }
    static OperatorWordPoly monomial(Word w, QComplex c) {
        OperatorWordPoly p;
        p.add_term(std::move(w), c);
        return p;
    }

    const Terms& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    QComplex coefficient(const Word& w) const {
        auto it = terms_.find(w);
        return it == terms_.end() ? QComplex{} : it->second;
    }

    /// Highest word length with a nonzero coefficient (-1 for the zero polynomial).
    int degree() const { return terms_.empty() ? -1 : static_cast<int>(terms_.rbegin()->first.size()); }

    /// Terms whose words have exactly length n.
    OperatorWordPoly homogeneous_part(std::size_t n) const {
        OperatorWordPoly p;
        for (const auto& [w, c] : terms_)
            if (w.size() == n) p.terms_.emplace(w, c);
        return p;
    }

    void add_term(Word w, const QComplex& c) {
        if (c.is_zero()) return;
        auto [it, inserted] = terms_.try_emplace(std::move(w), c);
        if (!inserted) {
            it->second = it->second + c;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    friend OperatorWordPoly operator+(OperatorWordPoly a, const OperatorWordPoly& b) {
        for (const auto& [w, c] : b.terms_) a.add_term(w, c);
        return a;
    }
    friend OperatorWordPoly operator-(const OperatorWordPoly& a) { return QComplex(-1) * a; }
    friend OperatorWordPoly operator-(const OperatorWordPoly& a, const OperatorWordPoly& b) { return a + (-b); }
    friend OperatorWordPoly operator*(const QComplex& s, const OperatorWordPoly& a) {
        OperatorWordPoly out;
        for (const auto& [w, c] : a.terms_) out.add_term(w, s * c);
        return out;
    }
    /// Composition: words concatenate, coefficients multiply (C-linear in both factors).
    friend OperatorWordPoly operator*(const OperatorWordPoly& a, const OperatorWordPoly& b) {
        OperatorWordPoly out;
        for (const auto& [wa, ca] : a.terms_)
            for (const auto& [wb, cb] : b.terms_) {
                Word w = wa;
                w.insert(w.end(), wb.begin(), wb.end());
                out.add_term(std::move(w), ca * cb);
            }
        return out;
    }
    friend bool operator==(const OperatorWordPoly& a, const OperatorWordPoly& b) { return a.terms_ == b.terms_; }

    /// Canonical text form, e.g. "1/2 D + 1/2 D_*".
    std::string to_string() const {
        if (terms_.empty()) return "0";
        std::string out;
        bool first = true;
        for (const auto& [w, c] : terms_) {
            if (!first) out += " + ";
            first = false;
            if (w.empty()) {
                out += c.to_string();
            } else if (c == QComplex(1)) {
                out += word_string(w);
            } else {
                out += c.to_string() + " " + word_string(w);
            }
        }
        return out;
    }

private:
    Terms terms_;
};

inline OperatorWordPoly power(const OperatorWordPoly& p, int n) {
    if (n < 0) throw InvalidArgument("negative operator power");
    OperatorWordPoly out = OperatorWordPoly::identity();
    for (int i = 0; i < n; ++i) out = out * p;
    return out;
}

/// Coefficient-wise complex conjugation (the bar operation).
inline OperatorWordPoly conjugate(const OperatorWordPoly& p) {
    OperatorWordPoly out;
    for (const auto& [w, c] : p.terms()) out.add_term(w, conj(c));
    return out;
}

inline void check_mu(int mu) {
    if (mu < -1 || mu > 1) throw InvalidArgument("mu must be -1, 0 or +1");
}

/// D_mu = (D + D_*)/2 + (i mu / 2)(D - D_*).
inline OperatorWordPoly build_Dmu(int mu) {
    check_mu(mu);
    const QComplex half(Rational(1, 2));
    const QComplex half_i_mu(0, Rational(mu, 2));
    return half * (OperatorWordPoly::D() + OperatorWordPoly::Dstar()) +
           half_i_mu * (OperatorWordPoly::D() - OperatorWordPoly::Dstar());
}

/// The C-morphism R with R(D) = -D_*, R(D_*) = -D, applied letter by letter.
inline OperatorWordPoly reversibility_transform(const OperatorWordPoly& p) {
    OperatorWordPoly out;
    for (const auto& [w, c] : p.terms()) {
        Word r(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) r[i] = w[i] == Letter::D ? Letter::Dstar : Letter::D;
        // Each letter contributes a factor -1.
        out.add_term(std::move(r), w.size() % 2 ? -c : c);
    }
    return out;
}

}  // namespace stochemb::opalgebra
