#include <gtest/gtest.h>

#include <cmath>

#include "stochemb/hamilton/hamilton.hpp"
#include "stochemb/lagrange/lagrangian.hpp"
#include "stochemb/nelson/fields.hpp"
#include "stochemb/sde/simulate.hpp"

using namespace stochemb;
using namespace stochemb::hamilton;

namespace {

FieldExpr expr(const std::string& s, int dim = 1) { return fieldexpr::parse_field(s, dim); }

struct Sim {
    PathEnsemble e;
    NelsonFields nf;
};

// b = -omega x, sigma = 1, stationary N(0, 1 / (2 omega)).
Sim harmonic_state(double omega, std::size_t n, std::uint64_t seed) {
    const fieldexpr::Constants c{{"w", omega}};
    auto m = make_model(1, "-w*x1", "1", GaussianLaw{{0.0}, {0.5 / omega}}, c);
    Sim s{simulate_ensemble(m, TimeGrid(0.0, 1.0, 100), n, seed), {}};
    s.nf = analytic_nelson(m, exact_density(fieldexpr::parse_field("sqrt(w/pi)*exp(-w*x1^2)", 1, c), Region{{-8.0}, {8.0}}));
    return s;
}

const LagrangianSpec kHarmonic = LagrangianSpec::natural(fieldexpr::parse_field("0.5*x1^2", 1));

}  // namespace

TEST(Momentum, IdentityMassGivesStochasticVelocity) {
    auto s = harmonic_state(1.0, 500, 1);
    const auto steps = step_range(0, 100, 10);
    const auto dX = stochastic_derivative_from_fields(s.e, s.nf, 1, steps);
    const auto P = momentum_process(s.e, kHarmonic, s.nf, 1, steps);
    EXPECT_EQ(P.raw(), dX.raw());
    EXPECT_EQ(P.kind(), SampleKind::Momentum);
}

TEST(Momentum, OuVelocityMomentumIsMinusIAlphaV) {
    const double alpha = 1.7;
    auto s = harmonic_state(alpha, 500, 2);
    const auto steps = step_range(0, 100, 25);
    const auto P = momentum_process(s.e, LagrangianSpec::natural(expr("0")), s.nf, 1, steps);
    for (std::size_t q = 0; q < steps.size(); ++q)
        for (std::size_t p = 0; p < s.e.n_paths(); ++p) {
            EXPECT_NEAR(P.at(q, p, 0).real(), 0.0, 1e-12);
            EXPECT_NEAR(P.at(q, p, 0).imag(), -alpha * s.e.at(steps[q], p, 0), 1e-12);
        }
}

TEST(Momentum, DeterministicPathGivesClassicalMomentum) {
    auto m = make_model(1, "-sin(t)", "0", PointMass{{1.0}});
    auto e = simulate_ensemble(m, TimeGrid(0.0, 1.0, 100), 2, 1);
    const LagrangianSpec L(1, expr("0.5*x1^2"), {2.0});
    const auto steps = step_range(0, 100, 10);
    const auto P = momentum_process(e, L, analytic_nelson(m, std::nullopt), 1, steps);
    for (std::size_t q = 0; q < steps.size(); ++q) EXPECT_NEAR(std::abs(P.at(q, 0, 0) - cplx(-2 * std::sin(e.grid().time(steps[q])))), 0.0, 1e-12);
}

TEST(Legendre, ExactForIdentityAndDiagonalMass) {
    auto s = harmonic_state(1.0, 1000, 3);
    const auto steps = step_range(0, 100, 20);
    EXPECT_EQ(legendre_check(s.e, kHarmonic, s.nf, 1, steps).max_deviation, 0.0);
    const LagrangianSpec L2(1, expr("0.5*x1^2"), {2.0});
    EXPECT_EQ(legendre_check(s.e, L2, s.nf, 1, steps).max_deviation, 0.0);
    // D X = P / 2 elementwise.
    const auto dX = stochastic_derivative_from_fields(s.e, s.nf, 1, steps);
    const auto P = momentum_process(L2, dX);
    for (std::size_t k = 0; k < dX.raw().size(); ++k) EXPECT_EQ(dX.raw()[k], P.raw()[k] / 2.0);
}

TEST(Legendre, NonDiagonalMassAndCorruptedMomentum) {
    auto m = make_model(2, "[-x1, -x2 + 0.3*x1]", "0", PointMass{{1.0, -0.5}});
    auto e = simulate_ensemble(m, TimeGrid(0.0, 1.0, 20), 3, 1);
    auto nf = analytic_nelson(m, std::nullopt);
    const LagrangianSpec L(2, expr("0", 2), {2, 0.5, 0.5, 1});
    const auto steps = step_range(0, 20, 5);
    EXPECT_LT(legendre_check(e, L, nf, 1, steps).max_deviation, 1e-15);
    const auto dX = stochastic_derivative_from_fields(e, nf, 1, steps);
    auto P = momentum_process(L, dX);
    P.at(2, 1, 0) += cplx(0.0, 1e-3);
    const auto r = legendre_check(L, dX, P);
    EXPECT_FALSE(r.ok(1e-12));
    EXPECT_GT(r.max_deviation, 1e-4);
}

TEST(Hamiltonian, MatchesDefinitionalForm) {
    const LagrangianSpec L(2, expr("x1^2*x2 + 0.2*x2^4", 2), {2, 0.5, 0.5, 1});
    const HamiltonianSpec H(L);
    const std::vector<double> x{0.3, -1.1};
    for (auto p : {std::vector<cplx>{{1, 0}, {0, 0}}, std::vector<cplx>{{0.5, -2}, {1.5, 0.25}}}) {
        EXPECT_NEAR(std::abs(H.value(0.0, x, p) - H.value_definitional(0.0, x, p)), 0.0, 1e-13);
        // H(M v, x) = (1/2) v^T M v + U
        const auto v = H.legendre(p);
        const auto mv = L.momentum(v);
        for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(std::abs(mv[i] - p[i]), 0.0, 1e-14);
    }
    const std::vector<cplx> real_p{{0.7, 0}, {-0.2, 0}};
    EXPECT_EQ(H.value(0.0, x, real_p).imag(), 0.0);
}

TEST(HamiltonResidualsTest, GroundStateAndLegendreCoherence) {
    auto s = harmonic_state(1.0, 20000, 4);
    const auto steps = step_range(0, 100, 10);
    for (int mu : {1, -1}) {
        const auto r = hamilton_residuals(s.e, HamiltonianSpec(kHarmonic), s.nf, mu, steps);
        for (const auto& v : r.first.raw()) EXPECT_EQ(v, cplx(0.0));
        EXPECT_TRUE(lagrange::summarize(r.second).within(3.0));
        const auto el = lagrange::el_residual(s.e, kHarmonic, s.nf, mu, steps);
        ASSERT_EQ(el.raw().size(), r.second.raw().size());
        for (std::size_t k = 0; k < el.raw().size(); ++k) EXPECT_LE(std::abs(el.raw()[k] - r.second.raw()[k]), 1e-15);
    }
}

TEST(HamiltonResidualsTest, NonIdentityMassMatchesElResidual) {
    auto m = make_model(2, "[-x1, -2*x2]", "1", GaussianLaw{{0, 0}, {0.5, 0, 0, 0.25}});
    auto e = simulate_ensemble(m, TimeGrid(0.0, 1.0, 20), 500, 5);
    auto nf = analytic_nelson(m, exact_density(expr("exp(-x1^2 - 2*x2^2)*sqrt(2)/pi", 2), Region{{-6, -6}, {6, 6}, 41}));
    const LagrangianSpec L(2, expr("0.5*x1^2 + x2^4", 2), {2, 0.5, 0.5, 1});
    const auto steps = step_range(0, 20, 5);
    const auto r = hamilton_residuals(e, HamiltonianSpec(L), nf, 1, steps);
    const auto el = lagrange::el_residual(e, L, nf, 1, steps);
    for (std::size_t k = 0; k < el.raw().size(); ++k) EXPECT_LE(std::abs(el.raw()[k] - r.second.raw()[k]), 1e-12 * (1 + std::abs(el.raw()[k])));
    for (const auto& v : r.first.raw()) EXPECT_LE(std::abs(v), 1e-15);
}

TEST(HamiltonResidualsTest, ClassicalOscillatorIsFirstOrder) {
    for (int n : {100, 200}) {
        auto m = make_model(1, "-sin(t)", "0", PointMass{{1.0}});
        auto e = simulate_ensemble(m, TimeGrid(0.0, 1.0, n), 2, 1);
        const auto r = hamilton_residuals(e, HamiltonianSpec(kHarmonic), analytic_nelson(m, std::nullopt), 1, step_range(0, n));
        double w1 = 0, w2 = 0;
        for (const auto& v : r.first.raw()) w1 = std::max(w1, std::abs(v));
        for (const auto& v : r.second.raw()) w2 = std::max(w2, std::abs(v));
        EXPECT_LE(w1, 1.0 / n);
        EXPECT_LE(w2, 1.0 / n);
        EXPECT_GT(w2, 0.1 / n);
    }
}

TEST(HamiltonResidualsTest, WrongDriftIsDetected) {
    // omega = 2 ground state tested against U = x^2 / 2: D P + X = -3 X per path.
    auto s = harmonic_state(2.0, 20000, 6);
    const auto steps = step_range(0, 100, 20);
    const auto r = hamilton_residuals(s.e, HamiltonianSpec(kHarmonic), s.nf, 1, steps);
    for (std::size_t q = 0; q < steps.size(); ++q) {
        stats::RegressionAccumulator acc;
        for (std::size_t p = 0; p < s.e.n_paths(); ++p) acc.add(s.e.at(steps[q], p, 0), r.second.at(q, p, 0).real());
        EXPECT_NEAR(acc.slope(), -3.0, 1e-9);
    }
}

TEST(Energy, GroundStateExpectationIsConstant) {
    auto s = harmonic_state(1.0, 20000, 7);
    const auto steps = step_range(0, 100, 10);
    const HamiltonianSpec H(kHarmonic);
    const auto P = momentum_process(s.e, kHarmonic, s.nf, 1, steps);
    // P = -i X, so H = -X^2/2 + X^2/2 = 0 on every path.
    const auto series = energy_series(s.e, H, P);
    EXPECT_TRUE(series.within(3.0));
    // mu = 0 (real embedding): P = 0 and E[H] = E[U] = 1/4.
    const auto P0 = momentum_process(s.e, kHarmonic, s.nf, 0, steps);
    const auto s0 = energy_series(s.e, H, P0);
    for (std::size_t q = 0; q < s0.mean.size(); ++q) EXPECT_NEAR(s0.mean[q].real(), 0.25, 4 * s0.se[q].real() + 0.003);
}
