#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedmap/config.hpp"

namespace fedmap::runner {

inline constexpr const char* kVersion = "0.1.0";

struct RunManifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
    std::string out_dir;
    std::map<std::string, std::string> outputs; // artifact name -> path
    std::string version = kVersion;
    bool ok = true;
    std::string error;

    // Summary fields for sweep aggregation.
    double final_accuracy = 0.0;
    bool reached_floor = false;
    std::uint64_t bytes_to_floor = 0;
};

// Execute the configured method and write metrics.csv, metrics.jsonl, the
// canonical config, the mask-chain log, the final checkpoint, and
// manifest.json into out_dir. Every file goes through write-then-rename.
RunManifest run(const config::ExperimentConfig& cfg, const std::string& out_dir);

// Grid text: flat key=value lines where the value is a comma-separated list
// of alternatives. Runs the cartesian product of overrides against the base
// config, one subdirectory per cell, plus summary.csv. A failing cell is
// recorded and the sweep continues.
std::vector<RunManifest> sweep(const config::ExperimentConfig& base, const std::string& grid_text,
                               const std::string& out_dir);

// (round, allowance) table for the configured schedule.
std::string schedule_preview_csv(const config::ExperimentConfig& cfg);

} // namespace fedmap::runner
