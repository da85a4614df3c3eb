#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stochemb/fieldexpr/field.hpp"
#include "stochemb/fieldexpr/field_expr.hpp"
#include "stochemb/fieldexpr/tabulated.hpp"

using namespace stochemb;
using namespace stochemb::fieldexpr;

namespace {

double at(const FieldExpr& f, double t, std::vector<double> x) { return f.value(t, x); }

}  // namespace

TEST(FieldParse, HalfSquare) {
    auto f = parse_field("0.5*(x1^2)", 1);
    EXPECT_DOUBLE_EQ(at(f, 0.0, {1.0}), 0.5);
    EXPECT_DOUBLE_EQ(at(f, 0.0, {3.0}), 4.5);
}

TEST(FieldParse, ZeroField) {
    auto f = parse_field("0", 2);
    EXPECT_EQ(at(f, 0.3, {1.0, -7.0}), 0.0);
    EXPECT_EQ(at(f, -2.0, {0.0, 0.0}), 0.0);
}

TEST(FieldParse, UnclosedParenthesisReportsPosition) {
    try {
        parse_field("0.5*(x1^2 + x2^2", 2);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.position(), 4u);
        EXPECT_NE(std::string(e.what()).find("unclosed parenthesis"), std::string::npos);
    }
}

TEST(FieldParse, Errors) {
    EXPECT_THROW(parse_field("x3", 2), ParseError);
    EXPECT_THROW(parse_field("foo + 1", 1), ParseError);
    EXPECT_THROW(parse_field("sin(x1, x1)", 1), ParseError);
    EXPECT_THROW(parse_field("x1^0.5", 1), ParseError);
    EXPECT_THROW(parse_field("x1 +", 1), ParseError);
    EXPECT_THROW(parse_field("[x1, x2", 2), ParseError);
    EXPECT_THROW(parse_field("[x1]", 2, 2, {}), ParseError);
    EXPECT_THROW(parse_field("2 $ 3", 1), ParseError);
}

TEST(FieldParse, ConstantsAndVectors) {
    auto f = parse_field("[-alpha*x1, omega^2*x2]", 2, {{"alpha", 2.0}, {"omega", 3.0}});
    EXPECT_TRUE(f.is_vector());
    std::vector<double> x{1.0, 2.0};
    auto v = eval_field(f, 0.0, x);
    EXPECT_DOUBLE_EQ(v[0], -2.0);
    EXPECT_DOUBLE_EQ(v[1], 18.0);
    EXPECT_NEAR(at(parse_field("cos(pi)", 1), 0, {0}), -1.0, 1e-15);
    EXPECT_DOUBLE_EQ(at(parse_field("x", 1), 0, {4.0}), 4.0);
}

TEST(FieldEval, Examples) {
    EXPECT_DOUBLE_EQ(at(parse_field("x1^2/2", 1), 0.0, {2.0}), 2.0);
    EXPECT_DOUBLE_EQ(at(parse_field("exp(-t)*x1", 1), 0.0, {3.0}), 3.0);
    EXPECT_THROW(at(parse_field("1/x1", 1), 0.0, {0.0}), DomainError);
    EXPECT_THROW(at(parse_field("log(x1)", 1), 0.0, {0.0}), DomainError);
    EXPECT_THROW(at(parse_field("log(x1)", 1), 0.0, {-1.0}), DomainError);
    EXPECT_THROW(at(parse_field("sqrt(x1)", 1), 0.0, {-1.0}), DomainError);
    EXPECT_THROW(at(parse_field("x1^-1", 1), 0.0, {0.0}), DomainError);
    EXPECT_THROW(at(parse_field("exp(x1)", 1), 0.0, {1000.0}), DomainError);
    EXPECT_DOUBLE_EQ(at(parse_field("x1^-2", 1), 0.0, {2.0}), 0.25);
    EXPECT_DOUBLE_EQ(at(parse_field("-2^2", 1), 0.0, {0.0}), -4.0);
    EXPECT_DOUBLE_EQ(at(parse_field("2*-3", 1), 0.0, {0.0}), -6.0);
    EXPECT_DOUBLE_EQ(at(parse_field("8/2/2", 1), 0.0, {0.0}), 2.0);
    EXPECT_DOUBLE_EQ(at(parse_field("1-2-3", 1), 0.0, {0.0}), -4.0);
    EXPECT_DOUBLE_EQ(at(parse_field("abs(x1)", 1), 0.0, {-1.5}), 1.5);
}

TEST(FieldDiff, Examples) {
    auto g = grad_field(parse_field("0.5*x1^2", 1));
    EXPECT_DOUBLE_EQ(at(g, 0.0, {1.7}), 1.7);
    auto l = laplacian_field(parse_field("x1^2 + x2^2", 2));
    EXPECT_EQ(l.component(0)->op, Op::Const);
    EXPECT_DOUBLE_EQ(at(l, 0.0, {0.3, -0.2}), 4.0);
    auto h = hessian_apply(parse_field("x1^2", 1), parse_field("1", 1));
    EXPECT_DOUBLE_EQ(at(h, 0.0, {5.0}), 2.0);
    auto hm = hessian_apply(parse_field("x1*x2", 2), parse_field("[1, 0.5, 0.5, 1]", 2));
    EXPECT_DOUBLE_EQ(at(hm, 0.0, {5.0, 1.0}), 1.0);
    auto dt = dt_field(parse_field("exp(-2*t)*x1", 1));
    EXPECT_DOUBLE_EQ(at(dt, 0.0, {3.0}), -6.0);
}

namespace {

// Random smooth expressions on [-1, 1]^2 x [0, 1]. Functions with restricted
// domains only receive arguments that are positive by construction.
class RandomExpr {
public:
    explicit RandomExpr(std::uint64_t seed) : rng_(seed) {}

    NodePtr make(int depth) {
        std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 11);
        switch (pick(rng_)) {
            case 0: return raw::var(std::uniform_int_distribution<int>(0, 2)(rng_));
            case 1: return raw::constant(std::round(std::uniform_real_distribution<double>(-3, 3)(rng_) * 4) / 4);
            case 2: return raw::binary(Op::Add, make(depth - 1), make(depth - 1));
            case 3: return raw::binary(Op::Sub, make(depth - 1), make(depth - 1));
            case 4: return raw::binary(Op::Mul, make(depth - 1), make(depth - 1));
            case 5: return raw::binary(Op::Div, make(depth - 1), positive(depth - 1));
            case 6: {
                // The parser reads a negated literal as a negative constant.
                NodePtr a = make(depth - 1);
                return a->op == Op::Const ? raw::constant(-a->value) : raw::neg(a);
            }
            case 7: return raw::pow(make(depth - 1), std::uniform_int_distribution<int>(2, 3)(rng_));
            case 8: return raw::call(Func::Exp, raw::call(Func::Sin, make(depth - 1)));
            case 9: return raw::call(Func::Log, positive(depth - 1));
            case 10: return raw::call(Func::Sqrt, positive(depth - 1));
            default: return raw::call(std::uniform_int_distribution<int>(0, 1)(rng_) ? Func::Sin : Func::Cos, make(depth - 1));
        }
    }

private:
    std::mt19937_64 rng_;
    NodePtr positive(int depth) {
        return raw::binary(Op::Add, raw::constant(1.5), raw::pow(make(depth), 2));
    }
};

}  // namespace

TEST(FieldDiff, GradientMatchesCentralDifferences) {
    RandomExpr gen(20240601);
    std::mt19937_64 pts(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked = 0;
    while (checked < 100) {
        FieldExpr f = FieldExpr::scalar(2, gen.make(4));
        FieldExpr g = grad_field(f);
        FieldExpr gt = dt_field(f);
        double t = 0.5 * (u(pts) + 1.0);
        std::vector<double> x{u(pts), u(pts)};
        if (std::abs(f.value(t, x)) > 1e3) continue;
        const double h = 1e-5;
        for (int i = 0; i < 2; ++i) {
            auto xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (f.value(t, xp) - f.value(t, xm)) / (2 * h);
            const double sym = g.value(static_cast<std::size_t>(i), t, x);
            EXPECT_LE(std::abs(sym - fd), 1e-6 * std::max(1.0, std::abs(sym))) << f.to_string();
        }
        const double fdt = (f.value(t + h, x) - f.value(t - h, x)) / (2 * h);
        EXPECT_LE(std::abs(gt.value(t, x) - fdt), 1e-6 * std::max(1.0, std::abs(fdt))) << f.to_string();
        ++checked;
    }
}

TEST(FieldDiff, SecondDerivativesMatchFiniteDifferencesToSecondOrder) {
    RandomExpr gen(99);
    std::mt19937_64 pts(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n = 0; n < 40; ++n) {
        FieldExpr f = FieldExpr::scalar(2, gen.make(3));
        FieldExpr lap = laplacian_field(f);
        std::vector<double> x{u(pts), u(pts)};
        if (std::abs(f.value(0.3, x)) > 1e2) continue;
        auto fd = [&](double h) {
            double s = 0;
            for (int i = 0; i < 2; ++i) {
                auto xp = x, xm = x;
                xp[i] += h;
                xm[i] -= h;
                s += (f.value(0.3, xp) - 2 * f.value(0.3, x) + f.value(0.3, xm)) / (h * h);
            }
            return s;
        };
        const double exact = lap.value(0.3, x);
        const double e1 = std::abs(fd(1e-2) - exact), e2 = std::abs(fd(5e-3) - exact);
        if (e1 > 1e-9) {
            EXPECT_LT(e2, 0.3 * e1 + 1e-9) << f.to_string();
        }
    }
}

TEST(FieldDiff, GradientIsAdditive) {
    RandomExpr gen(5);
    std::mt19937_64 pts(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n = 0; n < 50; ++n) {
        NodePtr a = gen.make(3), b = gen.make(3);
        FieldExpr fa = FieldExpr::scalar(2, a), fb = FieldExpr::scalar(2, b);
        FieldExpr fs = FieldExpr::scalar(2, raw::binary(Op::Add, a, b));
        std::vector<double> x{u(pts), u(pts)};
        auto gs = grad_field(fs).values(0.2, x);
        auto ga = grad_field(fa).values(0.2, x);
        auto gb = grad_field(fb).values(0.2, x);
        for (int i = 0; i < 2; ++i)
            EXPECT_NEAR(gs[i], ga[i] + gb[i], 4e-16 * (std::abs(ga[i]) + std::abs(gb[i]) + 1.0));
    }
}

TEST(FieldPrint, RoundTripIsStructurallyEqual) {
    RandomExpr gen(42);
    for (int n = 0; n < 300; ++n) {
        FieldExpr f = FieldExpr::scalar(2, gen.make(5));
        FieldExpr g = parse_field(f.to_string(), 2);
        EXPECT_TRUE(structurally_equal(f, g)) << f.to_string() << " vs " << g.to_string();
    }
    for (const char* s : {"-x1^2", "(-2)^3", "x1 - (x2 - t)", "x1/(x2*t)", "-(-x1)", "2*-x1", "x1^-3",
                          "[x1, -0.25*x2]", "1e-05*x1", "exp(-t)*x1"}) {
        FieldExpr f = parse_field(s, 2);
        EXPECT_TRUE(structurally_equal(f, parse_field(f.to_string(), 2))) << s << " -> " << f.to_string();
    }
}

TEST(FieldJet, MatchesSymbolicDerivatives) {
    FieldExpr f = parse_field("sin(x1*x2) + exp(-t)*x1^3/(1 + x2^2)", 2);
    std::vector<double> x{0.4, -0.7};
    auto field = make_field(f);
    Jet j = field->jets_at(0.3, x)[0];
    EXPECT_NEAR(j.v, f.value(0.3, x), 1e-15);
    auto g = grad_field(f);
    EXPECT_NEAR(j.grad(1), g.value(0, 0.3, x), 1e-13);
    EXPECT_NEAR(j.grad(2), g.value(1, 0.3, x), 1e-13);
    EXPECT_NEAR(j.grad(0), dt_field(f).value(0.3, x), 1e-13);
    EXPECT_NEAR(j.hess(1, 1) + j.hess(2, 2), laplacian_field(f).value(0.3, x), 1e-12);
    EXPECT_NEAR(j.hess(1, 2), partial_field(g.at(0), 2).value(0.3, x), 1e-12);
}

TEST(FieldJet, TabulatedHermiteReproducesCubics) {
    // f(x) = x^3 - x tabulated with exact slopes is reproduced exactly by cubic Hermite.
    const double x0 = -2, dx = 0.1;
    TabulatedField1D::Snapshot s;
    for (int k = 0; k <= 40; ++k) {
        double x = x0 + dx * k;
        s.value.push_back(x * x * x - x);
        s.slope.push_back(3 * x * x - 1);
    }
    TabulatedField1D f(x0, dx, {s});
    for (double x : {-1.93, -0.5, 0.0, 0.731, 1.99}) {
        Jet jx = Jet::variable(x, 1);
        Jet out;
        f.eval_jet(Jet::variable(0.0, 0), std::span<const Jet>(&jx, 1), std::span<Jet>(&out, 1));
        EXPECT_NEAR(out.v, x * x * x - x, 1e-12);
        EXPECT_NEAR(out.grad(1), 3 * x * x - 1, 1e-11);
        EXPECT_NEAR(out.hess(1, 1), 6 * x, 1e-9);
    }
    // Constant extension outside the grid.
    std::vector<double> far{5.0};
    EXPECT_NEAR(f.values(0.0, far)[0], 8.0 - 2.0, 1e-12);
}

TEST(FieldJet, TabulatedReproducesQuadraticsInTime) {
    // f = t^2 x on uneven snapshots, including the end intervals and end points.
    std::vector<TabulatedField1D::Snapshot> snaps;
    for (double t : {0.0, 0.1, 0.3, 0.4, 0.7}) snaps.push_back({t, {0.0, t * t, 2 * t * t}, {t * t, t * t, t * t}});
    TabulatedField1D f(0.0, 1.0, snaps);
    for (double t : {0.0, 0.05, 0.2, 0.4, 0.55, 0.7}) {
        Jet jx = Jet::variable(1.5, 1);
        Jet out;
        f.eval_jet(Jet::variable(t, 0), std::span<const Jet>(&jx, 1), std::span<Jet>(&out, 1));
        EXPECT_NEAR(out.v, 1.5 * t * t, 1e-13) << t;
        EXPECT_NEAR(out.grad(0), 3 * t, 1e-12) << t;
        EXPECT_NEAR(out.hess(0, 0), 3.0, 1e-9) << t;
        EXPECT_NEAR(out.hess(0, 1), 2 * t, 1e-12) << t;
    }
}

TEST(FieldJet, TabulatedLinearInTime) {
    TabulatedField1D::Snapshot a{0.0, {0.0, 0.0}, {1.0, 1.0}}, b{1.0, {2.0, 3.0}, {1.0, 1.0}};
    TabulatedField1D f(0.0, 1.0, {a, b});
    Jet jx = Jet::variable(1.0, 1);
    Jet out;
    f.eval_jet(Jet::variable(0.25, 0), std::span<const Jet>(&jx, 1), std::span<Jet>(&out, 1));
    EXPECT_NEAR(out.v, 0.75, 1e-14);
    EXPECT_NEAR(out.grad(0), 3.0, 1e-14);
}
