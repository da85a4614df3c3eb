#pragma once

// Experiment configuration: a YAML document with sections model, grid, ensemble,
// task and output. Every key is checked against the schema before any
// computation; unknown keys and type errors are reported with line and key.

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/fieldexpr/field_expr.hpp"
#include "stochemb/lagrange/lagrangian.hpp"
#include "stochemb/sde/model.hpp"

namespace stochemb::cli {

struct Diagnostic {
    int line = 0;  // 1-based; 0 when unknown
    int column = 0;
    std::string key;
    std::string message;

    std::string str() const {
        std::string s = line > 0 ? "line " + std::to_string(line) + ":" + std::to_string(column) + ": " : "";
        if (!key.empty()) s += key + ": ";
        return s + message;
    }
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<Diagnostic> d) : Error(join(d)), diagnostics(std::move(d)) {}
    std::vector<Diagnostic> diagnostics;

private:
    static std::string join(const std::vector<Diagnostic>& d) {
        std::string s = "invalid configuration";
        for (const auto& x : d) s += "\n  " + x.str();
        return s;
    }
};

// ---------------------------------------------------------------------------
// Task settings. Defaults here are the documented defaults.

struct SlopeCheck {
    double target = 0.0;
    double tol = 0.05;
};

struct StepSelection {
    int first = -1;  // -1: smallest admissible step
    int last = -1;   // -1: largest admissible step
    int stride = 1;
};

struct SimulateTask {};

struct NelsonTask {
    int component = 0;
    int h_steps = 1;
    std::size_t k_neighbors = 0;
    int mu = 1;
    StepSelection steps{-1, -1, 100};
    std::optional<SlopeCheck> forward_slope, backward_slope, imag_slope, second_slope;
    std::string method = "local_mean";  // or local_linear
    // mean |Re D_mu X| over paths, with its own estimator settings
    std::optional<double> real_mean_abs_max;
    int real_h_steps = 1;
    std::size_t real_k_neighbors = 0;
    std::string real_method = "local_mean";
    std::optional<double> product_rule_n_se;
    int product_rule_stride = 1;
};

struct EmbedTask {
    int degree = 0;
    std::vector<std::string> coefficients;
    int mu = 1;
    bool composed = false;
    std::optional<std::string> forcing;
    std::optional<bool> expect_reversible;
    std::optional<bool> expect_zero_residual;
    double n_se = 3.0;
    StepSelection steps{-1, -1, 100};
};

struct MechanicsSettings {
    std::string potential;
    std::vector<double> mass;  // empty: identity
    int mu = 1;
    StepSelection steps{-1, -1, 10};
};

struct StationaritySettings {
    std::string variation;
    std::vector<double> epsilons{-0.1, -0.05, 0.05, 0.1};
    double n_se = 3.0;
    bool expect_stationary = true;
};

struct LagrangianTask {
    MechanicsSettings mech;
    std::optional<double> el_n_se;  // verdict: el_residual within n_se s.e. of 0
    std::optional<StationaritySettings> stationarity;
};

struct NoetherTask {
    MechanicsSettings mech;
    std::string symmetry = "translation";
    std::vector<double> direction;
    int axis = 2;
    bool estimator_route = false;
    int h_steps = 1;
    std::size_t k_neighbors = 0;
    double level = 0.95;
    int replicates = 500;
    double n_se = 4.0;
    double abs_tol = 1e-12;
    std::optional<std::uint64_t> bootstrap_seed;  // default: ensemble seed
    bool expect_conserved = true;
};

struct BridgeTask {
    std::string potential = "0.5*x1^2";
    double sigma = 1.0;
    std::optional<double> K;  // default sigma^2
    double lo = -8, hi = 8, dx = 0.02;
    bool periodic = true;
    std::string initial_wave = "ground_state";  // or gaussian
    double omega = 1.0, x0 = 0.0;
    double dt_pde = 1e-3;
    int snapshot_every = 10;
    double drift_scale = 1.0;
    std::vector<double> match_times;  // default: grid end
    double l1_max = 0.05;
    std::optional<double> ks_max;
    std::optional<double> modulus_tol;
    double norm_drift_max = 1e-10;
    std::optional<double> residual_max;
};

struct HamiltonTask {
    MechanicsSettings mech;
    double n_se = 3.0;
    double coherence_tol = 1e-12;
    double legendre_tol = 0.0;
};

using TaskConfig = std::variant<std::monostate, SimulateTask, NelsonTask, EmbedTask, LagrangianTask, NoetherTask, BridgeTask, HamiltonTask>;

inline const char* task_name(const TaskConfig& t) {
    static const char* names[] = {"none", "simulate", "nelson", "embed", "lagrangian", "noether", "schrodinger-bridge", "hamilton"};
    return names[t.index()];
}

struct ModelConfig {
    int dim = 1;
    std::string drift, diffusion;
    fieldexpr::Constants constants;
    InitialLaw initial = PointMass{{0.0}};
    std::optional<std::string> density;
    std::vector<double> region_lo, region_hi;  // default +-8 per coordinate
};

struct OutputConfig {
    std::string directory = "out";
    std::vector<std::string> formats{"json", "csv"};
    bool ensemble = false;
};

struct ExperimentConfig {
    std::optional<ModelConfig> model;
    TimeGrid grid{0.0, 1.0, 1000};
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    TaskConfig task;
    OutputConfig output;
    std::string source;  // canonical YAML echo after overrides

    bool has_task() const { return task.index() != 0; }
};

namespace detail {

// Keyed access into one mapping node that records diagnostics instead of throwing.
class Section {
public:
    Section(YAML::Node node, std::string path, std::vector<Diagnostic>& diags) : node_(std::move(node)), path_(std::move(path)), diags_(&diags) {}

    bool present() const { return node_.IsDefined() && !node_.IsNull(); }
    bool has(const std::string& key) const { return node_.IsMap() && node_[key].IsDefined(); }
    const YAML::Node& node() const { return node_; }
    std::string key_path(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    void error(const YAML::Node& at, const std::string& key, const std::string& msg) const {
        Diagnostic d;
        d.key = key;
        d.message = msg;
        const auto m = at.IsDefined() ? at.Mark() : node_.Mark();
        if (m.line >= 0) {
            d.line = m.line + 1;
            d.column = m.column + 1;
        }
        diags_->push_back(std::move(d));
    }

    /// Checks the node is a mapping whose keys are all in `allowed`.
    bool expect_keys(std::initializer_list<const char*> allowed) const {
        if (!present()) return false;
        if (!node_.IsMap()) {
            error(node_, path_, "expected a mapping");
            return false;
        }
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            const std::string k = it->first.as<std::string>();
            bool ok = false;
            for (const char* a : allowed) ok = ok || k == a;
            if (!ok) {
                std::string list;
                for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
                error(it->first, key_path(k), "unknown key (allowed: " + list + ")");
            }
        }
        return true;
    }

    Section child(const std::string& key) const { return Section(has(key) ? node_[key] : YAML::Node(), key_path(key), *diags_); }

    template <class T>
    std::optional<T> opt(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        const YAML::Node v = node_[key];
        try {
            return convert<T>(v);
        } catch (const std::exception&) {
            error(v, key_path(key), std::string("expected ") + type_label<T>());
            return std::nullopt;
        }
    }

    template <class T>
    T get(const std::string& key, T fallback) const {
        auto v = opt<T>(key);
        return v ? *v : fallback;
    }

    template <class T>
    T required(const std::string& key) const {
        if (!has(key)) {
            error(node_, key_path(key), "required key is missing");
            return T{};
        }
        return get<T>(key, T{});
    }

    /// Adds a diagnostic at `key` unless cond holds.
    void require(bool cond, const std::string& key, const std::string& msg) const {
        if (!cond) error(has(key) ? node_[key] : node_, key_path(key), msg);
    }

private:
    template <class T>
    static T convert(const YAML::Node& v) {
        if constexpr (std::is_same_v<T, std::vector<double>> || std::is_same_v<T, std::vector<std::string>>) {
            if (v.IsScalar()) return T{v.as<typename T::value_type>()};
            if (!v.IsSequence()) throw std::runtime_error("not a sequence");
            T out;
            for (const auto& e : v) out.push_back(e.as<typename T::value_type>());
            return out;
        } else {
            if (!v.IsScalar()) throw std::runtime_error("not a scalar");
            if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                // reject 1.5 for integer keys; accept integral floats written as 1e5
                const double d = v.as<double>();
                if (d != std::floor(d)) throw std::runtime_error("not an integer");
                if constexpr (!std::is_same_v<T, int>)
                    if (d < 0) throw std::runtime_error("negative");
                return static_cast<T>(d);
            } else {
                return v.as<T>();
            }
        }
    }

    template <class T>
    static const char* type_label() {
        if constexpr (std::is_same_v<T, double>) return "a number";
        else if constexpr (std::is_same_v<T, int>) return "an integer";
        else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) return "a non-negative integer";
        else if constexpr (std::is_same_v<T, bool>) return "true or false";
        else if constexpr (std::is_same_v<T, std::string>) return "a string";
        else if constexpr (std::is_same_v<T, std::vector<double>>) return "a list of numbers";
        else return "a list of strings";
    }

    YAML::Node node_;
    std::string path_;
    std::vector<Diagnostic>* diags_;
};

inline void check_expr(const Section& s, const std::string& key, const std::string& text, int dim, std::optional<std::size_t> arity,
                       const fieldexpr::Constants& c) {
    try {
        if (arity)
            fieldexpr::parse_field(text, dim, *arity, c);
        else
            fieldexpr::parse_field(text, dim, c);
    } catch (const Error& e) {
        s.error(s.has(key) ? s.node()[key] : s.node(), s.key_path(key), std::string("bad expression: ") + e.what());
    }
}

inline StepSelection parse_steps(const Section& s, StepSelection d) {
    if (!s.expect_keys({"first", "last", "stride"})) return d;
    d.first = s.get("first", d.first);
    d.last = s.get("last", d.last);
    d.stride = s.get("stride", d.stride);
    s.require(d.stride >= 1, "stride", "must be >= 1");
    return d;
}

inline std::optional<SlopeCheck> parse_slope(const Section& s, double default_tol) {
    if (!s.expect_keys({"target", "tol"})) return std::nullopt;
    SlopeCheck c;
    c.target = s.required<double>("target");
    c.tol = s.get("tol", default_tol);
    s.require(c.tol >= 0, "tol", "must be >= 0");
    return c;
}

inline void check_mu(const Section& s, int mu) { s.require(mu >= -1 && mu <= 1, "mu", "must be -1, 0 or 1"); }

inline MechanicsSettings parse_mechanics(const Section& t, int dim, const fieldexpr::Constants& c, int default_stride) {
    MechanicsSettings m;
    m.potential = t.required<std::string>("potential");
    if (t.has("potential")) check_expr(t, "potential", m.potential, dim, 1, c);
    m.mass = t.get("mass", std::vector<double>{});
    if (!m.mass.empty()) {
        if (m.mass.size() == static_cast<std::size_t>(dim) && dim > 1) {
            std::vector<double> full(static_cast<std::size_t>(dim * dim), 0.0);
            for (int i = 0; i < dim; ++i) full[static_cast<std::size_t>(i * dim + i)] = m.mass[static_cast<std::size_t>(i)];
            m.mass = std::move(full);
        }
        try {
            lagrange::LagrangianSpec(dim, fieldexpr::parse_field("0", dim), m.mass);
        } catch (const Error& e) {
            t.error(t.node()["mass"], t.key_path("mass"), e.what());
        }
    }
    m.mu = t.get("mu", 1);
    check_mu(t, m.mu);
    m.steps = parse_steps(t.child("steps"), {-1, -1, default_stride});
    return m;
}

inline InitialLaw parse_initial(const Section& s, int dim) {
    if (!s.present()) {
        s.error(s.node(), s.key_path(""), "model.initial is required");
        return PointMass{std::vector<double>(static_cast<std::size_t>(dim), 0.0)};
    }
    s.expect_keys({"law", "x", "mean", "cov", "file"});
    const std::string law = s.required<std::string>("law");
    const std::size_t d = static_cast<std::size_t>(dim);
    if (law == "point") {
        auto x = s.required<std::vector<double>>("x");
        s.require(x.size() == d, "x", "needs " + std::to_string(d) + " entries");
        return PointMass{x};
    }
    if (law == "gaussian") {
        auto m = s.get("mean", std::vector<double>(d, 0.0));
        auto c = s.required<std::vector<double>>("cov");
        s.require(m.size() == d, "mean", "needs " + std::to_string(d) + " entries");
        if (c.size() == d && d > 1) {
            std::vector<double> full(d * d, 0.0);
            for (std::size_t i = 0; i < d; ++i) full[i * d + i] = c[i];
            c = std::move(full);
        }
        s.require(c.size() == d * d, "cov", "needs d or d*d entries");
        return GaussianLaw{m, c};
    }
    if (law == "samples") {
        const auto f = s.required<std::string>("file");
        try {
            return read_sample_file(f, dim);
        } catch (const Error& e) {
            s.error(s.node()["file"], s.key_path("file"), e.what());
            return PointMass{std::vector<double>(d, 0.0)};
        }
    }
    s.require(false, "law", "must be point, gaussian or samples");
    return PointMass{std::vector<double>(d, 0.0)};
}

}  // namespace detail

/// Throws ConfigError listing every problem found.
inline ExperimentConfig parse_config(const YAML::Node& root) {
    std::vector<Diagnostic> diags;
    ExperimentConfig cfg;
    detail::Section top(root, "", diags);
    if (!root.IsDefined() || root.IsNull()) {
        cfg.source = "";
        return cfg;
    }
    if (!top.expect_keys({"model", "grid", "ensemble", "task", "output"})) throw ConfigError(diags);

    const std::string kind = top.child("task").present() ? top.child("task").get<std::string>("kind", "") : "";
    const bool bridge = kind == "schrodinger-bridge";
    const bool needs_model = !kind.empty() && kind != "none" && kind != "embed" && !bridge;

    // model
    auto ms = top.child("model");
    fieldexpr::Constants constants;
    int dim = 1;
    if (ms.present()) {
        ms.expect_keys({"dim", "drift", "diffusion", "constants", "initial", "density", "density_region"});
        ModelConfig m;
        m.dim = ms.get("dim", 1);
        ms.require(m.dim >= 1 && m.dim <= 3, "dim", "must be 1, 2 or 3");
        m.dim = std::clamp(m.dim, 1, 3);
        dim = m.dim;
        auto cs = ms.child("constants");
        if (cs.present()) {
            if (!cs.node().IsMap())
                cs.error(cs.node(), "model.constants", "expected a mapping of name: value");
            else
                for (auto it = cs.node().begin(); it != cs.node().end(); ++it) {
                    const auto name = it->first.as<std::string>();
                    if (auto v = cs.opt<double>(name)) m.constants[name] = *v;
                }
        }
        constants = m.constants;
        m.drift = ms.required<std::string>("drift");
        m.diffusion = ms.required<std::string>("diffusion");
        if (ms.has("drift")) detail::check_expr(ms, "drift", m.drift, dim, static_cast<std::size_t>(dim), constants);
        if (ms.has("diffusion")) {
            detail::check_expr(ms, "diffusion", m.diffusion, dim, std::nullopt, constants);
            try {
                const auto a = fieldexpr::parse_field(m.diffusion, dim, constants).arity();
                ms.require(a == 1 || a == static_cast<std::size_t>(dim * dim), "diffusion", "needs 1 or d*d components");
            } catch (const Error&) {
            }
        }
        m.initial = detail::parse_initial(ms.child("initial"), dim);
        m.density = ms.opt<std::string>("density");
        if (m.density) detail::check_expr(ms, "density", *m.density, dim, 1, constants);
        auto rs = ms.child("density_region");
        m.region_lo.assign(static_cast<std::size_t>(dim), -8.0);
        m.region_hi.assign(static_cast<std::size_t>(dim), 8.0);
        if (rs.expect_keys({"lo", "hi"})) {
            m.region_lo = rs.get("lo", m.region_lo);
            m.region_hi = rs.get("hi", m.region_hi);
            rs.require(m.region_lo.size() == static_cast<std::size_t>(dim), "lo", "needs d entries");
            rs.require(m.region_hi.size() == static_cast<std::size_t>(dim), "hi", "needs d entries");
        }
        cfg.model = std::move(m);
        if (bridge) ms.error(ms.node(), "model", "not used by the schrodinger-bridge task (the drift comes from the wave function)");
    } else if (needs_model) {
        top.error(root, "model", "required for task '" + kind + "'");
    }

    // grid
    auto gs = top.child("grid");
    if (gs.expect_keys({"t0", "t1", "n_steps"})) {
        cfg.grid.t0 = gs.get("t0", 0.0);
        cfg.grid.t1 = gs.get("t1", 1.0);
        cfg.grid.n_steps = gs.get("n_steps", 1000);
        gs.require(cfg.grid.t1 > cfg.grid.t0, "t1", "must exceed t0");
        gs.require(cfg.grid.n_steps >= 2, "n_steps", "must be >= 2");
    }

    // ensemble
    auto es = top.child("ensemble");
    if (es.expect_keys({"n_paths", "seed"})) {
        cfg.n_paths = es.get<std::size_t>("n_paths", 1000);
        cfg.seed = es.get<std::uint64_t>("seed", 1);
        es.require(cfg.n_paths >= 2, "n_paths", "must be >= 2");
    }

    // task
    auto ts = top.child("task");
    if (ts.present()) {
        if (kind.empty()) ts.error(ts.node(), "task.kind", "required key is missing");
        if (kind == "none") {
            ts.expect_keys({"kind"});
        } else if (kind == "simulate") {
            ts.expect_keys({"kind"});
            cfg.task = SimulateTask{};
        } else if (kind == "nelson") {
            ts.expect_keys({"kind", "component", "h_steps", "k_neighbors", "mu", "steps", "forward_slope", "backward_slope",
                            "imag_slope", "second_slope", "real_mean_abs", "product_rule", "method"});
            NelsonTask t;
            t.component = ts.get("component", 0);
            ts.require(t.component >= 0 && t.component < dim, "component", "out of range");
            t.h_steps = ts.get("h_steps", 1);
            ts.require(t.h_steps >= 1, "h_steps", "must be >= 1");
            t.k_neighbors = ts.get<std::size_t>("k_neighbors", 0);
            t.mu = ts.get("mu", 1);
            detail::check_mu(ts, t.mu);
            t.steps = detail::parse_steps(ts.child("steps"), t.steps);
            t.forward_slope = detail::parse_slope(ts.child("forward_slope"), 0.05);
            t.backward_slope = detail::parse_slope(ts.child("backward_slope"), 0.05);
            t.imag_slope = detail::parse_slope(ts.child("imag_slope"), 0.05);
            t.second_slope = detail::parse_slope(ts.child("second_slope"), 0.07);
            t.method = ts.get<std::string>("method", t.method);
            ts.require(t.method == "local_mean" || t.method == "local_linear", "method", "must be local_mean or local_linear");
            auto ra = ts.child("real_mean_abs");
            if (ra.expect_keys({"max", "h_steps", "k_neighbors", "method"})) {
                t.real_mean_abs_max = ra.required<double>("max");
                t.real_h_steps = ra.get("h_steps", t.h_steps);
                ra.require(t.real_h_steps >= 1, "h_steps", "must be >= 1");
                t.real_k_neighbors = ra.get<std::size_t>("k_neighbors", t.k_neighbors);
                t.real_method = ra.get<std::string>("method", t.method);
                ra.require(t.real_method == "local_mean" || t.real_method == "local_linear", "method", "must be local_mean or local_linear");
            }
            auto pr = ts.child("product_rule");
            if (pr.expect_keys({"n_se", "stride"})) {
                t.product_rule_n_se = pr.get("n_se", 3.0);
                t.product_rule_stride = pr.get("stride", 1);
                pr.require(t.product_rule_stride >= 1, "stride", "must be >= 1");
            }
            if (t.second_slope && cfg.model && !cfg.model->density)
                ts.error(ts.node()["second_slope"], "task.second_slope", "needs model.density for the field-composition route");
            cfg.task = t;
        } else if (kind == "embed") {
            ts.expect_keys({"kind", "degree", "coefficients", "mode", "form", "forcing", "expect_reversible", "expect_zero_residual",
                            "n_se", "steps"});
            EmbedTask t;
            t.degree = ts.required<int>("degree");
            ts.require(t.degree >= 0 && t.degree <= 2, "degree", "must be 0, 1 or 2");
            t.coefficients = ts.required<std::vector<std::string>>("coefficients");
            ts.require(t.coefficients.size() == static_cast<std::size_t>(t.degree) + 1, "coefficients", "needs degree + 1 entries");
            for (const auto& c : t.coefficients) detail::check_expr(ts, "coefficients", c, dim, std::nullopt, constants);
            const std::string mode = ts.get<std::string>("mode", "1");
            if (mode == "reversible" || mode == "0")
                t.mu = 0;
            else if (mode == "1" || mode == "+1")
                t.mu = 1;
            else if (mode == "-1")
                t.mu = -1;
            else
                ts.require(false, "mode", "must be -1, 0, 1 or reversible");
            const std::string form = ts.get<std::string>("form", "standard");
            ts.require(form == "standard" || form == "composed", "form", "must be standard or composed");
            t.composed = form == "composed";
            ts.require(!t.composed || t.degree == 1, "form", "composed form has degree 1");
            t.forcing = ts.opt<std::string>("forcing");
            if (t.forcing) detail::check_expr(ts, "forcing", *t.forcing, dim, std::nullopt, constants);
            t.expect_reversible = ts.opt<bool>("expect_reversible");
            t.expect_zero_residual = ts.opt<bool>("expect_zero_residual");
            t.n_se = ts.get("n_se", 3.0);
            t.steps = detail::parse_steps(ts.child("steps"), t.steps);
            if (t.expect_zero_residual && cfg.model && !cfg.model->density && cfg.model->diffusion != "0")
                ts.error(ts.node()["expect_zero_residual"], "task.expect_zero_residual", "needs model.density");
            cfg.task = t;
        } else if (kind == "lagrangian") {
            ts.expect_keys({"kind", "potential", "mass", "mu", "steps", "el_residual", "stationarity"});
            LagrangianTask t;
            t.mech = detail::parse_mechanics(ts, dim, constants, 10);
            auto el = ts.child("el_residual");
            if (el.expect_keys({"n_se"})) t.el_n_se = el.get("n_se", 3.0);
            auto st = ts.child("stationarity");
            if (st.expect_keys({"variation", "epsilons", "n_se", "expect_stationary"})) {
                StationaritySettings s;
                s.variation = st.required<std::string>("variation");
                if (st.has("variation")) detail::check_expr(st, "variation", s.variation, dim, static_cast<std::size_t>(dim), constants);
                s.epsilons = st.get("epsilons", s.epsilons);
                st.require(s.epsilons.size() >= 2, "epsilons", "needs at least two values");
                s.n_se = st.get("n_se", 3.0);
                s.expect_stationary = st.get("expect_stationary", true);
                t.stationarity = s;
            }
            cfg.task = t;
        } else if (kind == "noether") {
            ts.expect_keys({"kind", "potential", "mass", "mu", "steps", "symmetry", "route", "h_steps", "k_neighbors", "level",
                            "replicates", "n_se", "abs_tol", "bootstrap_seed", "expect_conserved"});
            NoetherTask t;
            t.mech = detail::parse_mechanics(ts, dim, constants, 10);
            auto sy = ts.child("symmetry");
            if (!sy.present()) ts.error(ts.node(), "task.symmetry", "required key is missing");
            if (sy.expect_keys({"kind", "direction", "axis"})) {
                t.symmetry = sy.required<std::string>("kind");
                sy.require(t.symmetry == "translation" || t.symmetry == "rotation", "kind", "must be translation or rotation");
                if (t.symmetry == "translation") {
                    t.direction = sy.required<std::vector<double>>("direction");
                    sy.require(t.direction.size() == static_cast<std::size_t>(dim), "direction", "needs d entries");
                } else {
                    sy.require(dim == 2 || dim == 3, "kind", "rotations need dim 2 or 3");
                    t.axis = sy.get("axis", 2);
                    sy.require(t.axis >= 0 && t.axis <= 2, "axis", "must be 0, 1 or 2");
                }
            }
            const std::string route = ts.get<std::string>("route", "fields");
            ts.require(route == "fields" || route == "estimator", "route", "must be fields or estimator");
            t.estimator_route = route == "estimator";
            t.h_steps = ts.get("h_steps", 1);
            ts.require(t.h_steps >= 1, "h_steps", "must be >= 1");
            t.k_neighbors = ts.get<std::size_t>("k_neighbors", 0);
            t.level = ts.get("level", 0.95);
            ts.require(t.level > 0 && t.level < 1, "level", "must lie in (0, 1)");
            t.replicates = ts.get("replicates", 500);
            ts.require(t.replicates >= 2, "replicates", "must be >= 2");
            t.n_se = ts.get("n_se", 4.0);
            t.abs_tol = ts.get("abs_tol", 1e-12);
            t.bootstrap_seed = ts.opt<std::uint64_t>("bootstrap_seed");
            t.expect_conserved = ts.get("expect_conserved", true);
            cfg.task = t;
        } else if (kind == "schrodinger-bridge") {
            ts.expect_keys({"kind", "potential", "sigma", "K", "domain", "initial_wave", "dt_pde", "snapshot_every", "drift_scale",
                            "match_times", "l1_max", "ks_max", "modulus_tol", "norm_drift_max", "residual_max"});
            BridgeTask t;
            t.potential = ts.get("potential", t.potential);
            detail::check_expr(ts, "potential", t.potential, 1, 1, {});
            t.sigma = ts.get("sigma", 1.0);
            ts.require(t.sigma > 0, "sigma", "must be positive");
            t.K = ts.opt<double>("K");
            if (t.K) ts.require(*t.K > 0, "K", "must be positive");
            auto dm = ts.child("domain");
            if (dm.expect_keys({"lo", "hi", "dx", "boundary"})) {
                t.lo = dm.get("lo", t.lo);
                t.hi = dm.get("hi", t.hi);
                t.dx = dm.get("dx", t.dx);
                const auto bc = dm.get<std::string>("boundary", "periodic");
                dm.require(bc == "periodic" || bc == "dirichlet", "boundary", "must be periodic or dirichlet");
                t.periodic = bc == "periodic";
                dm.require(t.hi > t.lo && t.dx > 0, "dx", "needs hi > lo and dx > 0");
            }
            auto iw = ts.child("initial_wave");
            if (iw.expect_keys({"kind", "omega", "x0"})) {
                t.initial_wave = iw.get<std::string>("kind", "ground_state");
                iw.require(t.initial_wave == "ground_state" || t.initial_wave == "gaussian", "kind", "must be ground_state or gaussian");
                t.omega = iw.get("omega", 1.0);
                iw.require(t.omega > 0, "omega", "must be positive");
                t.x0 = iw.get("x0", 0.0);
            }
            t.dt_pde = ts.get("dt_pde", 1e-3);
            ts.require(t.dt_pde > 0, "dt_pde", "must be positive");
            t.snapshot_every = ts.get("snapshot_every", 10);
            ts.require(t.snapshot_every >= 1, "snapshot_every", "must be >= 1");
            t.drift_scale = ts.get("drift_scale", 1.0);
            t.match_times = ts.get("match_times", std::vector<double>{});
            t.l1_max = ts.get("l1_max", 0.05);
            t.ks_max = ts.opt<double>("ks_max");
            t.modulus_tol = ts.opt<double>("modulus_tol");
            t.norm_drift_max = ts.get("norm_drift_max", 1e-10);
            t.residual_max = ts.opt<double>("residual_max");
            cfg.task = t;
        } else if (kind == "hamilton") {
            ts.expect_keys({"kind", "potential", "mass", "mu", "steps", "n_se", "coherence_tol", "legendre_tol"});
            HamiltonTask t;
            t.mech = detail::parse_mechanics(ts, dim, constants, 10);
            t.n_se = ts.get("n_se", 3.0);
            t.coherence_tol = ts.get("coherence_tol", 1e-12);
            t.legendre_tol = ts.get("legendre_tol", 0.0);
            cfg.task = t;
        } else if (!kind.empty()) {
            ts.require(false, "kind", "must be one of simulate, nelson, embed, lagrangian, noether, schrodinger-bridge, hamilton, none");
        }
    }
    if (bridge && cfg.grid.t0 != 0.0) gs.require(false, "t0", "the schrodinger-bridge task starts at t0 = 0");

    // output
    auto os = top.child("output");
    if (os.expect_keys({"directory", "formats", "ensemble"})) {
        cfg.output.directory = os.get("directory", cfg.output.directory);
        cfg.output.formats = os.get("formats", cfg.output.formats);
        for (const auto& f : cfg.output.formats) os.require(f == "json" || f == "csv" || f == "binary", "formats", "unknown format '" + f + "'");
        cfg.output.ensemble = os.get("ensemble", false);
    }

    if (!diags.empty()) throw ConfigError(diags);
    YAML::Emitter out;
    out << root;
    cfg.source = out.c_str();
    return cfg;
}

inline YAML::Node load_yaml_text(const std::string& text) {
    try {
        return YAML::Load(text);
    } catch (const YAML::Exception& e) {
        Diagnostic d;
        d.line = e.mark.line >= 0 ? e.mark.line + 1 : 0;
        d.column = e.mark.column >= 0 ? e.mark.column + 1 : 0;
        d.message = e.msg;
        throw ConfigError({d});
    }
}

inline YAML::Node load_yaml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({Diagnostic{0, 0, path, "cannot read config file"}});
    std::stringstream ss;
    ss << in.rdbuf();
    return load_yaml_text(ss.str());
}

inline ExperimentConfig parse_config_text(const std::string& text) { return parse_config(load_yaml_text(text)); }

}  // namespace stochemb::cli
