// stochemb run <config> [--workers n] [--output dir] [--format csv|json|binary] [--seed s]

#include <CLI11.hpp>

#include <iostream>

#include "stochemb/cli/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Config-driven stochastic embedding experiments"};
    app.require_subcommand(1);
    auto* run = app.add_subcommand("run", "validate and run one experiment config");
    std::string config;
    int workers = 0;
    std::string output, format;
    std::uint64_t seed = 0;
    bool quiet = false;
    run->add_option("config", config, "YAML experiment config")->required();
    run->add_option("--workers,-j", workers, "worker threads (default: $STOCHEMB_WORKERS or 1)")->check(CLI::PositiveNumber);
    auto* out_opt = run->add_option("--output,-o", output, "output directory (overrides output.directory)");
    auto* fmt_opt = run->add_option("--format,-f", format, "single output format")->check(CLI::IsMember({"csv", "json", "binary"}));
    auto* seed_opt = run->add_option("--seed", seed, "override ensemble.seed");
    run->add_flag("--quiet,-q", quiet, "print only diagnostics");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    stochemb::cli::RunOptions opts;
    opts.workers = workers;
    if (*out_opt) opts.output_dir = output;
    if (*fmt_opt) opts.format = format;
    if (*seed_opt) opts.seed = seed;
    const auto outcome = stochemb::cli::run_file(config, opts);
    if (outcome.exit_code == 2) {
        std::cerr << config << ": configuration error\n";
        for (const auto& d : outcome.diagnostics) std::cerr << "  " << d.str() << "\n";
        if (outcome.diagnostics.empty()) std::cerr << "  " << outcome.report.error << "\n";
    }
    if (!quiet && outcome.exit_code != 2) std::cout << stochemb::cli::render_text(outcome.report);
    if (outcome.exit_code == 3) std::cerr << outcome.report.error << "\n";
    return outcome.exit_code;
}
