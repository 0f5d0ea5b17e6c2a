#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <omp.h>

#include "fedmap/config.hpp"
#include "fedmap/errors.hpp"
#include "fedmap/runner.hpp"

namespace {

int apply_thread_cap() {
    const char* env = std::getenv("FEDMAP_THREADS");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (!end || *end != '\0' || n < 1) {
        std::fprintf(stderr, "FEDMAP_THREADS must be a positive integer, got '%s'\n", env);
        return 2;
    }
    omp_set_num_threads(static_cast<int>(n));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse federated learning simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string grid_path;
    long long seed_override = -1;

    CLI::App* cmd_run = app.add_subcommand("run", "Execute one experiment");
    cmd_run->add_option("--config", config_path, "Config file")->required();
    cmd_run->add_option("--out", out_dir, "Output directory")->required();
    cmd_run->add_option("--seed", seed_override, "Override the config seed");

    CLI::App* cmd_sweep = app.add_subcommand("sweep", "Run a config grid");
    cmd_sweep->add_option("--config", config_path, "Base config file")->required();
    cmd_sweep->add_option("--grid", grid_path, "Grid file: key=v1,v2,... lines")->required();
    cmd_sweep->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* cmd_schedule = app.add_subcommand("schedule", "Schedule utilities");
    cmd_schedule->require_subcommand(1);
    CLI::App* cmd_preview = cmd_schedule->add_subcommand("preview", "Print (round, allowance)");
    cmd_preview->add_option("--config", config_path, "Config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (const int rc = apply_thread_cap()) return rc;

    try {
        fedmap::config::ExperimentConfig cfg = fedmap::config::load_config(config_path);
        if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);

        if (*cmd_run) {
            const fedmap::runner::RunManifest m = fedmap::runner::run(cfg, out_dir);
            std::printf("wrote %s (final accuracy %.4f)\n",
                        (m.out_dir + "/manifest.json").c_str(), m.final_accuracy);
        } else if (*cmd_sweep) {
            std::ifstream g(grid_path);
            if (!g) throw fedmap::ConfigError("cannot open grid file: " + grid_path);
            std::stringstream ss;
            ss << g.rdbuf();
            const auto manifests = fedmap::runner::sweep(cfg, ss.str(), out_dir);
            std::size_t ok = 0;
            for (const auto& m : manifests)
                if (m.ok) ++ok;
            std::printf("%zu/%zu cells succeeded; summary at %s/summary.csv\n", ok,
                        manifests.size(), out_dir.c_str());
            if (ok != manifests.size()) return 3;
        } else {
            std::fputs(fedmap::runner::schedule_preview_csv(cfg).c_str(), stdout);
        }
    } catch (const fedmap::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
