// Command-line front end.
//
// Subcommands: verify-carleman, verify-quasi, audit, solve, stability,
// print-config.  Global flags (--config, --out, --seed, --mode, --jobs)
// may appear before or after the subcommand name.
//
// Exit codes: 0 success, 1 scientific failure (an asserted property did not
// hold or a solve failed), 2 usage or configuration error.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mfglab/config.hpp"
#include "mfglab/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for a coupled forward-backward parabolic system:\n"
                 "weighted-energy (Carleman) estimate verification, a fixed-point MFG\n"
                 "solver, and perturb-and-resolve stability experiments."};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string mode;
    unsigned jobs = 0;

    app.add_option("--config", config_path, "path to a JSON run configuration");
    app.add_option("--out", out_dir, "output directory (overrides the configuration)");
    app.add_option("--seed", seed, "random seed (overrides the configuration)");
    app.add_option("--mode", mode,
                   "initial-term accounting for the weighted estimates")
        ->check(CLI::IsMember({"corrected", "literal-paper"}));
    app.add_option("--jobs", jobs, "worker threads (overrides the configuration)")
        ->check(CLI::PositiveNumber);

    CLI::App* sub_carleman = app.add_subcommand(
        "verify-carleman", "check the backward-heat weighted estimate on a random corpus");
    CLI::App* sub_quasi = app.add_subcommand(
        "verify-quasi", "check the quasi estimate and measure its closing constant");
    CLI::App* sub_audit = app.add_subcommand(
        "audit", "check the scalar parameter inequalities across horizons");
    CLI::App* sub_solve = app.add_subcommand(
        "solve", "run the fixed-point solver and write the solution fields");
    CLI::App* sub_stability = app.add_subcommand(
        "stability", "perturb-and-resolve sweep measuring the Lipschitz response");
    CLI::App* sub_print = app.add_subcommand(
        "print-config", "print the effective configuration as JSON");
    for (CLI::App* s :
         {sub_carleman, sub_quasi, sub_audit, sub_solve, sub_stability, sub_print})
        s->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        mfglab::RunConfig cfg;
        if (!config_path.empty()) cfg = mfglab::RunConfig::from_file(config_path);
        if (app.count("--out") > 0) cfg.output_dir = out_dir;
        if (app.count("--seed") > 0) cfg.seed = seed;
        if (app.count("--jobs") > 0) cfg.jobs = jobs;
        if (app.count("--mode") > 0) cfg.carleman.mode = mode;

        if (sub_print->parsed()) return mfglab::cmd_print_config(cfg);
        if (sub_audit->parsed()) return mfglab::cmd_audit(cfg);
        if (sub_carleman->parsed()) return mfglab::cmd_verify_carleman(cfg);
        if (sub_quasi->parsed()) return mfglab::cmd_verify_quasi(cfg);
        if (sub_solve->parsed()) return mfglab::cmd_solve(cfg);
        if (sub_stability->parsed()) return mfglab::cmd_stability(cfg);
        std::cerr << "error: no subcommand selected\n";
        return 2;
    } catch (const mfglab::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
