#pragma once

#include <utility>
#include <vector>

#include "fedmap/config.hpp"
#include "fedmap/mask.hpp"
#include "fedmap/metrics.hpp"
#include "fedmap/tensor.hpp"

namespace fedmap::federation {

struct RunResult {
    std::vector<metrics::RoundMetrics> rounds;
    // Mask snapshots at every round where the kept set changed (or, for the
    // rerank baseline, was recomputed), in round order.
    std::vector<std::pair<std::size_t, PruneMask>> event_masks;
    Model final_global;
    std::size_t total_weights = 0;
};

// Sparse federated loop: clients reconstruct the global model from broadcast
// deltas, prune to the scheduled allowance, train, and upload compressed
// updates; the server averages and broadcasts. Masks are never transmitted.
RunResult run_fedmap(const config::ExperimentConfig& cfg);

// Same loop with the allowance pinned at the full weight count.
RunResult run_fedavg_dense(const config::ExperimentConfig& cfg);

// Server-side rerank baseline: a dense shadow model is masked afresh each
// interval (pruned positions keep their frozen values, so they can return),
// and the mask itself is broadcast every round on top of the parameters.
RunResult run_federated_pruning(const config::ExperimentConfig& cfg);

// Dispatch on cfg.method.
RunResult run(const config::ExperimentConfig& cfg);

} // namespace fedmap::federation
