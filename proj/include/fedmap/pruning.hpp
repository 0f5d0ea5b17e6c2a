#pragma once

#include <cstddef>

#include "fedmap/mask.hpp"
#include "fedmap/tensor.hpp"

namespace fedmap::pruning {

// Layer-adaptive magnitude scores. Within each layer the weights are ranked
// ascending by |w| (ties by flat index); each weight's score is its square
// divided by the sum of squares of every weight ranked at or after it. The
// largest-|w| weight in a layer scores exactly 1; an all-zero layer scores 0
// everywhere.
LayerValues lamp_scores(const Model& model);

struct PruneResult {
    Model model;    // survivors kept, everything else zeroed
    PruneMask mask; // the surviving positions
};

// Keep the K highest-scoring weight positions across the whole model and
// zero the rest. Score ties resolve to the lower layer index, then the lower
// flat index. Throws StructuralError if K exceeds the weight count.
PruneResult prune(const Model& model, std::size_t K);

// Zero every weight whose mask bit is clear. Biases are untouched.
Model apply_mask(const Model& model, const PruneMask& mask);

} // namespace fedmap::pruning
