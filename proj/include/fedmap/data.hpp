#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedmap/tensor.hpp"

namespace fedmap::data {

enum class PartitionMode { Iid, DirichletLabelSkew, SizeSkew };

struct PartitionSpec {
    PartitionMode mode = PartitionMode::Iid;
    double beta = 0.5;        // Dirichlet concentration for label skew
    double skew_factor = 0.7; // client k's share scales with skew_factor^k
    std::size_t clients = 1;
    std::uint64_t seed = 0;
};

struct DataSplit {
    Dataset train;
    Dataset test;
};

// Gaussian clusters, one per class, means on a randomly rotated simplex.
// Labels are assigned round robin, so counts balance within one. The last
// fifth of the examples becomes the test split.
DataSplit synth_blobs(std::size_t classes, std::size_t dim, std::size_t n, double spread,
                      std::uint64_t seed);

// Split a dataset into per-client shards that cover it disjointly. Throws
// StructuralError when any client would end up empty.
std::vector<Dataset> partition(const Dataset& dataset, const PartitionSpec& spec);

// One row per example: feature values then the label, comma separated.
void export_csv(const Dataset& dataset, const std::string& path);

} // namespace fedmap::data
