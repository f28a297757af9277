#include "lrlab/app.hpp"
#include "lrlab/blas_env.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

namespace app = lrlab::app;

int main(int argc, char** argv) {
    lrlab::pin_blas_kernels(argc, argv);

    CLI::App cli{"Locality, transfer-operator and PEPS boundary audits on exact small systems"};
    std::string command, config_path, out_dir, fault;
    std::uint64_t seed = 0;
    bool dry_run = false;
    cli.add_option("command", command, "one of: certify-bounds, scan-strip, expansionals, transfer-spectrum, "
                                       "gibbs-decay, peps-factorize, audit-all")
        ->required();
    cli.add_option("--config", config_path, "JSON experiment config")->required();
    auto* seed_opt = cli.add_option("--seed", seed, "overrides config.seed");
    cli.add_option("--out", out_dir, "output directory (overrides config.output_dir and LRLAB_OUT_DIR)");
    auto* fault_opt = cli.add_option("--fault-inject", fault, "engineered failure: corrupt-etilde");
    cli.add_flag("--dry-run", dry_run, "print the resolved config and exit");
    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = cli.exit(e);
        return rc == 0 ? 0 : app::kExitConfig;
    }

    app::ExperimentConfig cfg;
    try {
        app::Overrides ov;
        ov.command = command;
        if (seed_opt->count()) ov.seed = seed;
        if (fault_opt->count()) ov.fault_inject = fault;
        cfg = app::validate_config(config_path, ov);
    } catch (const app::ConfigError& e) {
        std::cerr << "lrlab: config error: " << e.what() << "\n";
        return app::kExitConfig;
    } catch (const lrlab::Error& e) {
        std::cerr << "lrlab: config error: " << e.what() << "\n";
        return app::kExitConfig;
    }
    if (dry_run) {
        std::cout << cfg.resolved().dump(2) << "\n";
        return app::kExitPass;
    }

    try {
        const auto t0 = std::chrono::steady_clock::now();
        app::Table table = app::run_experiment(cfg);
        const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto dir = app::resolve_output_dir(cfg, out_dir);
        auto files = app::emit_report(table, cfg, dir, runtime);
        const int fails = table.count(app::Status::fail);
        std::printf("%s: %d pass, %d fail, %d reported; wrote %s\n", cfg.command.c_str(),
                    table.count(app::Status::pass), fails, table.count(app::Status::reported),
                    files.csv.string().c_str());
        return fails ? app::kExitViolation : app::kExitPass;
    } catch (const std::exception& e) {
        std::cerr << "lrlab: error: " << e.what() << "\n";
        return app::kExitRuntime;
    }
}
