#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedmap/data.hpp"
#include "fedmap/schedule.hpp"

namespace fedmap::config {

enum class Method { FedMap, FedAvgDense, FederatedPruning };

// What changes when the configured prune-event ordinal is reached.
enum class FedDRSwitch {
    None,
    ToFedAvg,          // drop the reflection machinery, plain local SGD
    SwapParams,        // adopt post_alpha / post_eta
    SwapParamsWeighted // as SwapParams, aggregation weighted by sample count
};

struct FedDRConfig {
    bool enabled = false;
    double alpha = 0.95;
    double eta = 1000.0;
    FedDRSwitch switch_mode = FedDRSwitch::None;
    std::size_t switch_event = 1; // 1-based prune-event ordinal
    double post_alpha = 1.75;
    double post_eta = 10.0;
};

struct DataConfig {
    std::size_t classes = 4;
    std::size_t dim = 16;
    std::size_t examples = 4000;
    double spread = 1.0;
    bool export_csv = false;
};

struct ModelConfig {
    std::vector<std::size_t> hidden = {32};
    bool bias = true;
};

struct ExperimentConfig {
    Method method = Method::FedMap;
    std::size_t clients = 0; // key N
    std::size_t rounds = 0;  // key T
    std::size_t local_epochs = 2; // key L
    double lr = 0.01;
    double weight_decay = 5e-4;
    std::size_t batch_size = 128;
    std::uint64_t seed = 1;
    unsigned bits_per_param = 32;

    schedule::Kind schedule_kind = schedule::Kind::Stepwise;
    std::size_t schedule_s = 90;
    double schedule_p_g = 0.25;
    double schedule_floor = 0.05;

    FedDRConfig feddr;
    DataConfig data;
    data::PartitionMode partition_mode = data::PartitionMode::Iid;
    double partition_beta = 0.5;
    double partition_skew = 0.7;
    ModelConfig model;
};

// Flat key=value text, one pair per line, dotted section prefixes, '#'
// comments. Unknown keys are rejected. Throws ConfigError with the offending
// line or key named.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<string>");
ExperimentConfig load_config(const std::string& path);

// Canonical serialization: every key, sorted, doubles at full precision.
// parse_config(dump_config(c)) reproduces c, and dump is a fixed point.
std::string dump_config(const ExperimentConfig& cfg);

// FNV-1a over the canonical dump, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// Schedule spec induced by the config for a model with `d` prunable weights.
// fedavg_dense pins the allowance at d.
schedule::ScheduleSpec make_schedule(const ExperimentConfig& cfg, std::size_t d);

} // namespace fedmap::config
