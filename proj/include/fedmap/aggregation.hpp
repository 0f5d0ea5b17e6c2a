#pragma once

#include <cstdint>
#include <vector>

#include "fedmap/mask.hpp"
#include "fedmap/tensor.hpp"

namespace fedmap::aggregation {

// Weighted average of congruent models (weights and biases alike). The
// weights must be non-negative and sum to 1 within 1e-9.
Model fedavg_aggregate(const std::vector<Model>& models, const std::vector<double>& weights);

struct MaskedUpdate {
    std::uint32_t client_id = 0;
    const LayerValues* delta = nullptr; // dense, zero off the support
    const PruneMask* mask = nullptr;
    double weight = 1.0;
};

// Per-position weighted mean over the clients whose mask covers the position:
// sum(w_n * delta_n * bit_n) / sum(w_n * bit_n), and 0 where no client
// contributes. Updates are processed in ascending client id.
LayerValues masked_aggregate(std::vector<MaskedUpdate> updates);

// Elementwise weighted average of equal-length flat vectors. Null weights
// means uniform 1/N.
std::vector<double> average_values(const std::vector<std::vector<double>>& rows,
                                   const std::vector<double>* weights = nullptr);

} // namespace fedmap::aggregation
