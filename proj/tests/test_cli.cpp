#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stochemb/cli/runner.hpp"

using namespace stochemb;
using namespace stochemb::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("stochemb_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

const std::string kOu = R"cfg(
model:
  dim: 1
  drift: "-x1"
  diffusion: "1"
  initial: {law: gaussian, mean: [0.0], cov: [0.5]}
  density: "exp(-x1^2)/sqrt(pi)"
grid: {t0: 0.0, t1: 1.0, n_steps: 100}
ensemble: {n_paths: 4000, seed: 3}
)cfg";

Diagnostic first_diag(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        EXPECT_FALSE(e.diagnostics.empty());
        return e.diagnostics.front();
    }
    ADD_FAILURE() << "config accepted";
    return {};
}

}  // namespace

TEST(Config, UnknownKeyReportsLineAndKey) {
    const auto d = first_diag("grid:\n  t0: 0\n  tone: 1\n");
    EXPECT_EQ(d.key, "grid.tone");
    EXPECT_EQ(d.line, 3);
    EXPECT_NE(d.message.find("unknown key"), std::string::npos);
}

TEST(Config, TypeAndRequiredErrors) {
    auto d = first_diag("grid: {n_steps: 1.5}\n");
    EXPECT_EQ(d.key, "grid.n_steps");
    EXPECT_EQ(d.line, 1);
    d = first_diag("task: {kind: simulate}\n");
    EXPECT_EQ(d.key, "model");
    d = first_diag(kOu + "task: {kind: lagrangian}\n");
    EXPECT_EQ(d.key, "task.potential");
}

TEST(Config, BadExpressionIsAConfigError) {
    const auto d = first_diag(kOu + "task: {kind: lagrangian, potential: \"0.5*x1^\"}\n");
    EXPECT_EQ(d.key, "task.potential");
    EXPECT_EQ(d.line, 10);
    EXPECT_NE(d.message.find("bad expression"), std::string::npos);
}

TEST(Config, CollectsEveryDiagnostic) {
    try {
        parse_config(load_yaml_file(std::string(STOCHEMB_SOURCE_DIR) + "/tests/data/malformed.cfg"));
        FAIL();
    } catch (const ConfigError& e) {
        std::vector<std::string> keys;
        for (const auto& d : e.diagnostics) keys.push_back(d.key);
        EXPECT_NE(std::find(keys.begin(), keys.end(), "model.difusion"), keys.end());
        EXPECT_NE(std::find(keys.begin(), keys.end(), "model.diffusion"), keys.end());
        EXPECT_NE(std::find(keys.begin(), keys.end(), "grid.n_steps"), keys.end());
    }
}

TEST(Config, YamlSyntaxErrorHasLine) {
    try {
        load_yaml_text("grid:\n  t0: [0, 1\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_GT(e.diagnostics.at(0).line, 0);
    }
}

TEST(Config, TaskSpecificRules) {
    EXPECT_EQ(first_diag("model: {dim: 1, drift: \"-x1\", diffusion: \"1\", initial: {law: point, x: [0]}}\n"
                         "task: {kind: schrodinger-bridge}\n")
                  .key,
              "model");
    EXPECT_EQ(first_diag(kOu + "task: {kind: sample}\n").key, "task.kind");
    EXPECT_EQ(first_diag(kOu + "task: {kind: noether, potential: \"0\", symmetry: {kind: rotation}}\n").key, "task.symmetry.kind");
    EXPECT_EQ(first_diag(kOu + "task: {kind: hamilton, potential: \"0\", mass: [1, 2, 3, 4]}\n").key, "task.mass");
}

TEST(Config, BundledConfigsValidate) {
    int n = 0;
    for (const auto& f : fs::directory_iterator(std::string(STOCHEMB_SOURCE_DIR) + "/configs")) {
        if (f.path().extension() != ".cfg") continue;
        EXPECT_NO_THROW(parse_config(load_yaml_file(f.path().string()))) << f.path();
        ++n;
    }
    EXPECT_GE(n, 3);
}

TEST(Report, Fnv1aKnownValues) {
    EXPECT_EQ(fnv1a64(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a64("a"), "af63dc4c8601ec8c");
}

TEST(Run, EmptyConfigGivesEmptyReport) {
    RunOptions o;
    o.output_dir = scratch("empty").string();
    const auto r = run_text("", o);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_TRUE(r.report.verdicts.empty());
    EXPECT_TRUE(r.report.metrics.empty());
    EXPECT_EQ(r.report.task, "none");
    EXPECT_TRUE(fs::exists(r.directory / "report.json"));
}

TEST(Run, ConfigErrorExitsTwoWithoutOutput) {
    RunOptions o;
    o.output_dir = scratch("bad").string();
    const auto r = run_text("grid: {t1: -1}\n", o);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_FALSE(fs::exists(*o.output_dir));
    ASSERT_FALSE(r.diagnostics.empty());
    EXPECT_EQ(r.diagnostics[0].key, "grid.t1");
}

TEST(Run, NelsonVerdictsDriveExitCode) {
    RunOptions o;
    o.output_dir = scratch("nelson").string();
    const std::string task = "task: {kind: nelson, steps: {first: 10, last: 90, stride: 10}, forward_slope: {target: -1, tol: 0.3}, "
                             "second_slope: {target: -1}}\n";
    auto r = run_text(kOu + task, o);
    EXPECT_EQ(r.exit_code, 0) << render_text(r.report);
    EXPECT_NEAR(r.report.metrics["second_slope"].get<double>(), -1.0, 1e-12);
    ASSERT_EQ(r.report.verdicts.size(), 2u);
    // A wrong target fails the verdict but still writes the report.
    r = run_text(kOu + "task: {kind: nelson, steps: {first: 10, last: 90, stride: 10}, forward_slope: {target: 1, tol: 0.3}}\n", o);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_FALSE(r.report.passed());
    const auto j = Json::parse(slurp(r.directory / "report.json"));
    EXPECT_FALSE(j["passed"].get<bool>());
    EXPECT_EQ(j["verdicts"][0]["name"], "forward_slope");
    EXPECT_TRUE(fs::exists(r.directory / "nelson_slopes.csv"));
}

TEST(Run, MissingDensityIsASetupError) {
    RunOptions o;
    o.write = false;
    const std::string cfg = R"cfg(
model: {dim: 1, drift: "-x1", diffusion: "1", initial: {law: point, x: [0]}}
grid: {n_steps: 10}
ensemble: {n_paths: 10}
task: {kind: hamilton, potential: "0.5*x1^2"}
)cfg";
    EXPECT_EQ(run_text(cfg, o).exit_code, 2);
}

TEST(Run, BlowUpIsANumericalAbortWithPartialReport) {
    RunOptions o;
    o.output_dir = scratch("blowup").string();
    const std::string cfg = R"cfg(
model: {dim: 1, drift: "x1^3", diffusion: "0", initial: {law: point, x: [10]}}
grid: {n_steps: 100, t1: 1}
ensemble: {n_paths: 4}
task: {kind: simulate}
)cfg";
    const auto r = run_text(cfg, o);
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.report.error.find("numerical abort"), std::string::npos);
    const auto j = Json::parse(slurp(r.directory / "report.json"));
    EXPECT_TRUE(j.contains("error"));
}

TEST(Run, ConservationReportSchemaAndCsv) {
    RunOptions o;
    o.output_dir = scratch("noether").string();
    const std::string cfg = R"cfg(
model:
  dim: 2
  drift: "[-x1, -x2]"
  diffusion: "1"
  initial: {law: gaussian, mean: [0, 0], cov: [0.5, 0.5]}
  density: "exp(-x1^2 - x2^2)/pi"
grid: {n_steps: 50}
ensemble: {n_paths: 2000, seed: 2}
task: {kind: noether, potential: "0.5*(x1^2 + x2^2)", symmetry: {kind: rotation}, steps: {stride: 10}}
)cfg";
    const auto r = run_text(cfg, o);
    EXPECT_EQ(r.exit_code, 0) << render_text(r.report);
    const auto& c = r.report.metrics["conservation"];
    ASSERT_TRUE(c.contains("integral") && c.contains("slope") && c.contains("verdict"));
    EXPECT_EQ(c["integral"].size(), 6u);
    EXPECT_EQ(c["integral"][0].size(), 4u);  // t, re, im, se
    EXPECT_EQ(c["slope"]["ci"].size(), 2u);
    EXPECT_TRUE(c["verdict"].get<bool>());
    const auto csv = slurp(r.directory / "conservation.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,I_re,ci_lo,ci_hi,I_im,se_re,se_im");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Run, BridgeDensityCsvHasThreeColumns) {
    RunOptions o;
    o.output_dir = scratch("bridge").string();
    const std::string cfg = R"cfg(
grid: {t0: 0, t1: 0.2, n_steps: 20}
ensemble: {n_paths: 5000, seed: 4}
task: {kind: schrodinger-bridge, domain: {lo: -6, hi: 6, dx: 0.05}, snapshot_every: 5, l1_max: 0.1}
)cfg";
    const auto r = run_text(cfg, o);
    EXPECT_EQ(r.exit_code, 0) << render_text(r.report);
    const auto csv = slurp(r.directory / "density.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,kde,psi2");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 241);
}

TEST(Run, DeterministicAcrossWorkerCounts) {
    const std::string cfg = kOu + "task: {kind: simulate}\noutput: {formats: [binary]}\n";
    std::string bins[2], reports[2];
    for (int k = 0; k < 2; ++k) {
        RunOptions o;
        o.workers = k == 0 ? 1 : 3;
        o.output_dir = scratch("det" + std::to_string(k)).string();
        const auto r = run_text(cfg, o);
        ASSERT_EQ(r.exit_code, 0);
        bins[k] = slurp(r.directory / "ensemble.bin");
        reports[k] = slurp(r.directory / "report.cbor");
    }
    EXPECT_FALSE(bins[0].empty());
    EXPECT_EQ(bins[0], bins[1]);
    EXPECT_EQ(reports[0], reports[1]);
}

TEST(Run, SeedOverrideChangesHashAndResults) {
    RunOptions a, b;
    a.write = b.write = false;
    b.seed = 99;
    const std::string cfg = kOu + "task: {kind: simulate}\n";
    const auto ra = run_text(cfg, a), rb = run_text(cfg, b);
    EXPECT_EQ(rb.report.seed, 99u);
    EXPECT_NE(ra.report.config_hash, rb.report.config_hash);
    EXPECT_NE(ra.report.metrics["final_mean"].dump(), rb.report.metrics["final_mean"].dump());
    EXPECT_NE(rb.report.config_text.find("99"), std::string::npos);
}

TEST(Run, FormatOverride) {
    RunOptions o;
    o.output_dir = scratch("fmt").string();
    o.format = "csv";
    const auto r = run_text(kOu + "task: {kind: simulate}\n", o);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_TRUE(fs::exists(r.directory / "moments.csv"));
    EXPECT_TRUE(fs::exists(r.directory / "ensemble.csv"));
    EXPECT_FALSE(fs::exists(r.directory / "report.json"));
    o.format = "xml";
    EXPECT_EQ(run_text(kOu, o).exit_code, 2);
}

TEST(Binary, ExitCodes) {
    const std::string bin = STOCHEMB_BINARY;
    const std::string src = STOCHEMB_SOURCE_DIR;
    auto status = [](const std::string& cmd) {
        const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    EXPECT_EQ(status(bin + " run " + src + "/tests/data/malformed.cfg"), 2);
    EXPECT_EQ(status(bin + " run /nonexistent.cfg"), 2);
    EXPECT_EQ(status(bin + " frobnicate"), 2);
    const auto out = scratch("bin");
    std::ofstream(out.string() + ".cfg") << "task: {kind: none}\n";
    EXPECT_EQ(status(bin + " run " + out.string() + ".cfg -o " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / "report.json"));
}
