// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stochemb/cli/runner.hpp"
#include "stochemb/core/rng.hpp"
#include "stochemb/core/stats.hpp"
#include "stochemb/hamilton/hamilton.hpp"
#include "stochemb/lagrange/lagrangian.hpp"
#include "stochemb/lagrange/noether.hpp"
#include "stochemb/lagrange/stationarity.hpp"
#include "stochemb/nelson/checks.hpp"
#include "stochemb/nelson/composition.hpp"
#include "stochemb/nelson/density.hpp"
#include "stochemb/nelson/estimators.hpp"
#include "stochemb/nelson/fields.hpp"
#include "stochemb/opalgebra/embedded.hpp"
#include "stochemb/schrodinger/bridge.hpp"
#include "stochemb/schrodinger/residual.hpp"
#include "stochemb/schrodinger/wave.hpp"
#include "stochemb/sde/simulate.hpp"

using namespace stochemb;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

FieldExpr expr(const std::string& s, int dim = 1, const fieldexpr::Constants& c = {}) { return fieldexpr::parse_field(s, dim, c); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Collects the result lines of every check in a criterion.
struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;
    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back((ok ? "" : "!") + what);
    }
    // Reported, not gated.
    void note(const std::string& what) { notes.push_back("(" + what + ")"); }
};

double pooled_slope(const PathEnsemble& e, const std::vector<int>& steps, const std::function<double(std::size_t, std::size_t)>& y) {
    stats::RegressionAccumulator acc;
    for (std::size_t s = 0; s < steps.size(); ++s)
        for (std::size_t p = 0; p < e.n_paths(); ++p) acc.add(e.at(steps[s], p, 0), y(s, p));
    return acc.slope();
}

// ---------------------------------------------------------------------------
// Shared OU ensemble (criteria 1-3): alpha = sigma = 1, stationary start, dt = 1e-3 on [0, 1].

DiffusionModel ou_model() {
    return make_model(1, "-alpha*x1", "sigma", GaussianLaw{{0.0}, {0.5}}, {{"alpha", 1.0}, {"sigma", 1.0}}, "ou");
}

std::optional<PathEnsemble> g_ou;
std::vector<int> g_ou_steps;

Outcome criterion_1() {
    Outcome o;
    const auto t0 = Clock::now();
    g_ou.emplace(simulate_ensemble(ou_model(), TimeGrid(0.0, 1.0, 1000), 100000, 20240501));
    const auto& e = *g_ou;
    g_ou_steps = step_range(10, 990, 10);
    const auto& steps = g_ou_steps;
    const EstimatorConfig ec;  // k = ceil(sqrt(N)), h = dt
    const auto f = forward_derivative(e, steps, ec);
    const auto b = backward_derivative(e, steps, ec);
    const auto d = stochastic_derivative(f, b, 1);
    const double fs_ = pooled_slope(e, steps, [&](std::size_t s, std::size_t p) { return f.at(s, p, 0).real(); });
    const double bs = pooled_slope(e, steps, [&](std::size_t s, std::size_t p) { return b.at(s, p, 0).real(); });
    const double is = pooled_slope(e, steps, [&](std::size_t s, std::size_t p) { return d.at(s, p, 0).imag(); });
    o.check(std::abs(fs_ + 1.0) <= 0.05, fmt("D slope %.4f", fs_));
    o.check(std::abs(bs - 1.0) <= 0.05, fmt("D_* slope %.4f", bs));
    o.check(std::abs(is + 1.0) <= 0.05, fmt("Im D_+1 slope %.4f", is));

    // Mean |Re D_+1 V|: local-linear k-NN with k = N/4 and h = 50 steps.
    EstimatorConfig rc;
    rc.method = RegressionMethod::LocalLinear;
    rc.k = 25000;
    rc.h_steps = 50;
    const auto rsteps = step_range(50, 950, 10);
    const auto rd = stochastic_derivative(forward_derivative(e, rsteps, rc), backward_derivative(e, rsteps, rc), 1);
    double re_abs = 0;
    for (const auto& v : rd.raw()) re_abs += std::abs(v.real());
    re_abs /= static_cast<double>(rd.raw().size());
    o.check(re_abs < 0.02, fmt("mean|Re D_+1 V| %.4f", re_abs));
    const double secs = seconds_since(t0);
    o.check(secs < 120.0, fmt("%.1f s", secs));
    return o;
}

Outcome criterion_2() {
    Outcome o;
    const auto& e = *g_ou;
    const auto& steps = g_ou_steps;
    const auto model = ou_model();
    // Exact stationary density.
    const auto exact = analytic_nelson(model, exact_density(expr("exp(-x1^2)/sqrt(pi)"), Region{{-8.0}, {8.0}}));
    const auto a1 = second_derivative(e, exact, 1, steps);
    const double s1 = pooled_slope(e, steps, [&](std::size_t s, std::size_t p) { return a1.at(s, p, 0).real(); });
    o.check(std::abs(s1 + 1.0) <= 0.07, fmt("exact-density fields %.4f", s1));
    // Second route: tabulated fields from a KDE of the ensemble at t = 1/2 (stationary). The
    // composition needs third derivatives of the KDE, so the bandwidth is wide (0.3) and the
    // oracle is the exact slope for the smoothed density N(0, 1/2 + h^2): 1 - 1 / (1/2 + h^2).
    KdeOptions ko;
    ko.bandwidth = 0.3;
    const auto d = estimate_density(e, 500, ko);
    const auto kde = analytic_nelson(model, density_from_estimate(d));
    const auto a2 = second_derivative(e, kde, 1, steps);
    const double s2 = pooled_slope(e, steps, [&](std::size_t s, std::size_t p) { return a2.at(s, p, 0).real(); });
    const double oracle = 1.0 - 1.0 / (0.5 + ko.bandwidth * ko.bandwidth);
    o.check(std::abs(s2 - oracle) <= 0.07, fmt("KDE-density fields %.4f vs smoothed oracle %.4f", s2, oracle));
    return o;
}

Outcome criterion_3() {
    Outcome o;
    const auto& e = *g_ou;
    const auto steps = step_range(1, e.grid().n_steps - 1);
    const auto r = product_rule_residual(e, 0, e, 0, EstimatorConfig{}, steps);
    std::size_t over = 0;
    for (std::size_t q = 0; q < r.value.size(); ++q)
        if (std::abs(r.value[q]) > 3.0 * r.se[q]) ++over;
    o.check(r.within(3.0), fmt("max |z| %.3f over %zu interior times", r.max_abs_z(), r.value.size()));
    o.note(fmt("%zu beyond 3 s.e., %.1f expected for independent normal z", over, 0.0027 * static_cast<double>(r.value.size())));
    return o;
}

// ---------------------------------------------------------------------------
// Harmonic bridges, U = x^2/2, sigma = 1, K = sigma^2.

const FieldExpr kHarmonicU = expr("0.5*x1^2");
const lagrange::LagrangianSpec kHarmonicL = lagrange::LagrangianSpec::natural(kHarmonicU);

struct Bridge {
    schrodinger::WaveTrajectory tr;
    DiffusionModel model;
    PathEnsemble e;
    NelsonFields nf;
};

Bridge make_bridge(double x0, double t1, int steps, std::size_t n, std::uint64_t seed) {
    using namespace schrodinger;
    const auto g = WaveGrid::make(-10.0, 10.0, 0.02);
    auto tr = solve_linear(kHarmonicU, 1.0, gaussian_state(g, 1.0, 1.0, x0), t1, 1e-3, {10});
    auto model = bridge_model(tr, GaussianLaw{{x0}, {0.5}});
    auto e = simulate_ensemble(model, TimeGrid(0.0, t1, steps), n, seed);
    auto nf = wave_to_fields(tr);
    return {std::move(tr), std::move(model), std::move(e), std::move(nf)};
}

std::optional<Bridge> g_ground;

Outcome criterion_4() {
    Outcome o;
    const auto t0 = Clock::now();
    g_ground.emplace(make_bridge(0.0, 1.0, 200, 100000, 7));
    const auto& b = *g_ground;
    const auto m = schrodinger::density_match(b.e, b.tr, 1.0);
    o.check(m.l1 < 0.05 && !m.degenerate, fmt("L1 at t=1 %.4f", m.l1));
    const auto& psi0 = b.tr.snapshots.front();
    double worst = 0;
    for (const auto& w : b.tr.snapshots)
        for (std::size_t k = 0; k < w.values.size(); ++k) worst = std::max(worst, std::abs(std::abs(w.values[k]) - std::abs(psi0.values[k])));
    o.check(worst < 1e-6, fmt("modulus drift %.2e", worst));
    o.check(b.tr.max_norm_drift() < 1e-10, fmt("norm drift/step %.2e", b.tr.max_norm_drift()));
    const double secs = seconds_since(t0);
    o.check(secs < 180.0, fmt("%.1f s", secs));
    return o;
}

Outcome criterion_5() {
    using namespace schrodinger;
    Outcome o;
    bool zero = true;
    for (double s : {0.25, 0.5, 1.0, 1.5, 3.0}) zero = zero && nonlinear_coefficient(s * s, s) == 0.0;
    const auto g0 = WaveGrid::make(-8.0, 8.0, 0.05);
    const auto r0 = nonlinear_residual(solve_linear(kHarmonicU, 1.0, gaussian_state(g0, 1.0, 1.0, 0.5), 0.2, 0.01), 1.0, 1.0, kHarmonicU);
    zero = zero && r0.coefficient == 0.0;
    o.check(zero, "coefficient K(K - sigma^2)/2 == 0");
    for (double x0 : {0.0, 1.0}) {
        std::vector<double> res;
        for (double dx : {0.1, 0.05, 0.025}) {
            const auto g = WaveGrid::make(-8.0, 8.0, dx);
            const auto tr = solve_linear(kHarmonicU, 1.0, gaussian_state(g, 1.0, 1.0, x0), 1.0, dx);
            res.push_back(nonlinear_residual(tr, 1.0, 1.0, kHarmonicU).max_abs());
        }
        for (std::size_t i = 1; i < res.size(); ++i) {
            const double ratio = res[i - 1] / res[i];
            o.check(ratio >= 3.5 && ratio <= 4.5, fmt("x0=%g ratio %.3f", x0, ratio));
        }
    }
    return o;
}

Outcome criterion_6() {
    Outcome o;
    const auto& gs = *g_ground;
    const auto steps = step_range(0, gs.e.grid().n_steps, 10);
    const auto el = lagrange::summarize(lagrange::el_residual(gs.e, kHarmonicL, gs.nf, 1, steps));
    o.check(el.within(3.0), fmt("ground EL max|z| %.3f", el.max_abs_z()));
    const FieldExpr z = expr("sin(pi*t)");
    const std::vector<double> eps{0.01, 0.05, 0.1, 0.2};
    const auto all = step_range(0, gs.e.grid().n_steps);
    const auto rg = lagrange::stationarity_check(gs.e, kHarmonicL, stochastic_derivative_from_fields(gs.e, gs.nf, 1, all), z, eps);
    o.check(rg.stationary(3.0), fmt("ground c1 z %.3f", rg.z()));

    // Displaced coherent bridge, mean 1.5 cos t.
    const auto co = make_bridge(1.5, 1.0, 100, 50000, 8);
    // Here the residual mean is the PDE discretization error (~1e-6) against a Monte Carlo
    // s.e. of ~1e-7, so it is reported rather than gated.
    const auto elc = lagrange::summarize(lagrange::el_residual(co.e, kHarmonicL, co.nf, 1, step_range(0, 100, 10)));
    double elc_max = 0;
    for (const auto& m : elc.mean) elc_max = std::max(elc_max, std::abs(m));
    o.note(fmt("coherent EL max|mean| %.1e", elc_max));
    const auto rc = lagrange::stationarity_check(co.e, kHarmonicL, stochastic_derivative_from_fields(co.e, co.nf, 1, step_range(0, 100)), z, eps);
    o.check(rc.stationary(3.0), fmt("coherent c1 z %.3f", rc.z()));

    // Negative control: halve the bridge drift; D X from k-NN estimators.
    DiffusionModel half = co.model;
    half.drift = combine({0.5}, {co.model.drift});
    const auto eh = simulate_ensemble(half, TimeGrid(0.0, 1.0, 100), 50000, 9);
    EstimatorConfig cfg;
    cfg.k = 400;
    const auto st = step_range(1, 99);
    const auto dX = stochastic_derivative(forward_derivative(eh, st, cfg), backward_derivative(eh, st, cfg), 1);
    const auto rh = lagrange::stationarity_check(eh, kHarmonicL, dX, z, eps);
    o.check(rh.z() > 5.0, fmt("halved-drift c1 z %.2f", rh.z()));
    return o;
}

Outcome criterion_7() {
    using lagrange::SymmetryGroupSpec;
    Outcome o;
    // 3D: free x1 with constant drift, ground states in x2, x3; U(x2, x3) is invariant under x1 shifts.
    {
        const fieldexpr::Constants k{{"c", 0.5}};
        DiffusionModel m;
        m.dim = 3;
        m.drift = make_field(expr("[c, -x2, -x3]", 3, k));
        m.diffusion = make_field(expr("1", 3));
        m.initial = GaussianLaw{{0, 0, 0}, {1, 0, 0, 0, 0.5, 0, 0, 0, 0.5}};
        const auto e = simulate_ensemble(m, TimeGrid(0.0, 1.0, 50), 20000, 21);
        const auto p = expr("exp(-(x1 - c*t)^2/(2*(1+t)))/sqrt(2*pi*(1+t)) * exp(-x2^2 - x3^2)/pi", 3, k);
        const auto nf = analytic_nelson(m, exact_density(p, Region{{-6, -4, -4}, {6, 4, 4}, 21, {0.0}}));
        const auto dX = stochastic_derivative_from_fields(e, nf, 1, step_range(0, 50, 5));
        const auto rep = lagrange::noether_integral(e, lagrange::LagrangianSpec::natural(expr("0.5*(x2^2 + x3^2)", 3)),
                                                    SymmetryGroupSpec::translation({1, 0, 0}), dX);
        const bool in = rep.slope_lo.real() <= 0 && rep.slope_hi.real() >= 0 && rep.slope_lo.imag() <= 0 && rep.slope_hi.imag() >= 0;
        o.check(in && rep.conserved, fmt("translation CI [%.4f, %.4f]", rep.slope_lo.real(), rep.slope_hi.real()));
    }
    // 2D isotropic harmonic coherent state on a circle: mean r (cos t, sin t), E[X ^ D X] = r^2.
    {
        const fieldexpr::Constants k{{"r", 1.2}};
        auto m = make_model(2, "[-(x1 - r*cos(t)) - r*sin(t), -(x2 - r*sin(t)) + r*cos(t)]", "1", GaussianLaw{{1.2, 0}, {0.5, 0, 0, 0.5}}, k);
        const auto e = simulate_ensemble(m, TimeGrid(0.0, 1.0, 50), 20000, 23);
        const auto p = expr("exp(-(x1 - r*cos(t))^2 - (x2 - r*sin(t))^2)/pi", 2, k);
        const auto nf = analytic_nelson(m, exact_density(p, Region{{-6, -6}, {6, 6}, 0, {0.0, 0.5, 1.0}}));
        const auto dX = stochastic_derivative_from_fields(e, nf, 1, step_range(0, 50, 5));
        const auto rep = lagrange::noether_integral(e, lagrange::LagrangianSpec::natural(expr("0.5*(x1^2 + x2^2)", 2)),
                                                    SymmetryGroupSpec::rotation(), dX);
        const bool in = rep.slope_lo.real() <= 0 && rep.slope_hi.real() >= 0 && rep.slope_lo.imag() <= 0 && rep.slope_hi.imag() >= 0;
        o.check(in && rep.conserved, fmt("rotation CI [%.4f, %.4f], I(0) %.3f", rep.slope_lo.real(), rep.slope_hi.real(), rep.integral[0].real()));
    }
    // Broken: anisotropic harmonic U with a displaced x1; E[D X1] = -sin t.
    {
        const fieldexpr::Constants k{{"q0", 1.0}};
        auto m = make_model(3, "[-(x1 - q0*cos(t)) - q0*sin(t), -x2, -2*x3]", "1",
                            GaussianLaw{{1.0, 0, 0}, {0.5, 0, 0, 0, 0.5, 0, 0, 0, 0.25}}, k);
        const auto e = simulate_ensemble(m, TimeGrid(0.0, 1.0, 50), 20000, 22);
        const auto p = expr("sqrt(2)*exp(-(x1 - q0*cos(t))^2 - x2^2 - 2*x3^2)/(pi*sqrt(pi))", 3, k);
        const auto nf = analytic_nelson(m, exact_density(p, Region{{-5, -5, -5}, {6, 5, 5}, 21, {0.0, 0.5, 1.0}}));
        const auto dX = stochastic_derivative_from_fields(e, nf, 1, step_range(0, 50, 5));
        const auto rep = lagrange::noether_integral(e, lagrange::LagrangianSpec::natural(expr("0.5*(x1^2 + x2^2) + 2*x3^2", 3)),
                                                    SymmetryGroupSpec::translation({1, 0, 0}), dX);
        o.check(!rep.conserved, fmt("broken symmetry slope %.4f rejected", rep.slope.real()));
    }
    return o;
}

Outcome criterion_8() {
    using namespace opalgebra;
    Outcome o;
    const auto t0 = Clock::now();
    Engine rng = make_stream(2718, 0);
    std::uniform_int_distribution<int> nterms(1, 6), len(0, 5), letter(0, 1), num(-5, 5), den(1, 4);
    bool inv = true;
    for (int k = 0; k < 50; ++k) {
        OperatorWordPoly p;
        const int n = nterms(rng);
        for (int j = 0; j < n; ++j) {
            Word w(static_cast<std::size_t>(len(rng)));
            for (auto& l : w) l = letter(rng) ? Letter::Dstar : Letter::D;
            p.add_term(w, QComplex(Rational(num(rng), den(rng)), Rational(num(rng), den(rng))));
        }
        inv = inv && reversibility_transform(reversibility_transform(p)) == p;
    }
    o.check(inv, "R o R = id on 50 random polynomials");
    o.check(reversibility_transform(build_Dmu(0)) == -build_Dmu(0), "R(D_0) = -D_0");
    o.check(reversibility_transform(build_Dmu(1)) == -build_Dmu(-1), "R(D_+1) = -D_-1");
    const auto D = OperatorWordPoly::D(), S = OperatorWordPoly::Dstar();
    const QComplex half(Rational(1, 2));
    o.check(power(build_Dmu(1), 2) == half * (D * S + S * D) + (half * QComplex::i()) * (D * D - S * S), "D_+1^2 expansion");
    const EmbeddedOperatorSpec newton{2, {expr("0"), expr("0"), expr("1")}, 1, OperatorForm::Standard, expr("x1")};
    const EmbeddedOperatorSpec first{1, {expr("0"), expr("1")}, 1, OperatorForm::Standard, expr("x1")};
    o.check(is_reversible(newton).reversible, "Newton reversible");
    o.check(!is_reversible(first).reversible, "first order not reversible");
    const double secs = seconds_since(t0);
    o.check(secs < 1.0, fmt("%.3f s", secs));
    return o;
}

Outcome criterion_9() {
    Outcome o;
    const auto& gs = *g_ground;
    const auto steps = step_range(0, gs.e.grid().n_steps, 10);
    const hamilton::HamiltonianSpec H(kHarmonicL);
    double worst = 0;
    for (int mu : {1, -1}) {
        const auto r = hamilton::hamilton_residuals(gs.e, H, gs.nf, mu, steps);
        const auto el = lagrange::el_residual(gs.e, kHarmonicL, gs.nf, mu, steps);
        if (el.raw().size() != r.second.raw().size()) {
            o.check(false, "sample sizes differ");
            return o;
        }
        for (std::size_t k = 0; k < el.raw().size(); ++k)
            worst = std::max(worst, std::abs(el.raw()[k] - r.second.raw()[k]) / (1.0 + std::abs(el.raw()[k])));
    }
    o.check(worst <= 4 * std::numeric_limits<double>::epsilon(), fmt("max rel. difference %.2e", worst));
    const double dev = hamilton::legendre_check(gs.e, kHarmonicL, gs.nf, 1, steps).max_deviation;
    o.check(dev == 0.0, fmt("Legendre deviation %.1e", dev));
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome criterion_10() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "stochemb_acceptance";
    fs::remove_all(root);
    std::vector<fs::path> configs;
    for (const auto& entry : fs::directory_iterator(fs::path(STOCHEMB_SOURCE_DIR) / "configs"))
        if (entry.path().extension() == ".cfg") configs.push_back(entry.path());
    std::sort(configs.begin(), configs.end());
    for (const auto& cfg : configs) {
        const std::string name = cfg.stem().string();
        std::vector<std::string> bytes;
        std::vector<int> codes;
        for (int workers : {1, 4}) {
            cli::RunOptions opts;
            opts.workers = workers;
            opts.format = "binary";
            opts.output_dir = (root / ("w" + std::to_string(workers)) / name).string();
            const auto r = cli::run_file(cfg.string(), opts);
            codes.push_back(r.exit_code);
            std::string b = slurp(fs::path(*opts.output_dir) / "report.cbor");
            if (fs::exists(fs::path(*opts.output_dir) / "ensemble.bin")) b += slurp(fs::path(*opts.output_dir) / "ensemble.bin");
            bytes.push_back(std::move(b));
        }
        o.check(!bytes[0].empty() && bytes[0] == bytes[1] && codes[0] == codes[1],
                fmt("%s %zu bytes, exit %d", name.c_str(), bytes[0].size(), codes[0]));
    }
    fs::remove_all(root);
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"OU Nelson derivatives", criterion_1},        {"mean acceleration by field composition", criterion_2},
        {"product rule", criterion_3},                 {"ground-state Schrodinger bridge", criterion_4},
        {"nonlinear residual", criterion_5},           {"Euler-Lagrange and stationarity on bridges", criterion_6},
        {"Noether first integrals", criterion_7},      {"operator algebra", criterion_8},
        {"Hamiltonian coherence", criterion_9},        {"determinism across worker counts", criterion_10},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& ex) {
            o.check(false, std::string("exception: ") + ex.what());
        }
        std::string notes;
        for (const auto& n : o.notes) notes += (notes.empty() ? "" : "; ") + n;
        std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, notes.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
