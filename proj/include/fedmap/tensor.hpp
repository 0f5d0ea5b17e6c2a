#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedmap/errors.hpp"

namespace fedmap {

// Flat row-major tensor of doubles.
struct WeightTensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    WeightTensor() = default;
    WeightTensor(std::vector<std::size_t> shape_, double fill = 0.0);

    std::size_t size() const { return values.size(); }
    bool same_shape(const WeightTensor& other) const { return shape == other.shape; }

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

enum class Activation { Rectifier, Identity, SoftmaxOutput };

// One fully connected layer: weight is [out x in] row-major, bias is [out]
// (empty when the layer has no bias).
struct Layer {
    WeightTensor weight;
    WeightTensor bias;
    Activation activation = Activation::Rectifier;

    bool has_bias() const { return !bias.values.empty(); }
    std::size_t out_dim() const { return weight.shape[0]; }
    std::size_t in_dim() const { return weight.shape[1]; }
};

// An MLP; also doubles as the container for gradients and for model-shaped
// value arrays (deltas), which share its layout.
struct Model {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }

    // Prunable parameter count: weight elements only, biases excluded.
    std::size_t weight_count() const;
    std::size_t bias_count() const;

    // Structural congruence (shapes and bias presence, activations ignored).
    bool congruent(const Model& other) const;

    void check_finite(const std::string& context) const;

    Model zeros_like() const;
};

using Gradients = Model;

// Per-layer flat value arrays with a model's weight layout.
using LayerValues = std::vector<std::vector<double>>;

LayerValues weight_values(const Model& m);
LayerValues zeros_like_weights(const Model& m);
void set_weight_values(Model& m, const LayerValues& v);

struct Dataset {
    std::size_t dim = 0;
    std::size_t num_classes = 0;
    std::vector<double> features; // rows x dim, row-major
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    const double* row(std::size_t i) const { return features.data() + i * dim; }
};

// A view of selected dataset rows (one minibatch).
struct Batch {
    const Dataset* data = nullptr;
    std::vector<std::size_t> rows;

    std::size_t size() const { return rows.size(); }
};

// Builds an MLP with the given widths: rectifier hidden layers, softmax
// cross-entropy head. Weights ~ N(0, 1/fan_in), biases zero.
Model make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
               std::size_t num_classes, std::uint64_t init_seed, bool with_bias = true);

// Checkpoint file ("FMAP1"): layer count, per-layer shapes as 32-bit
// little-endian unsigned (rows, cols, bias count), then all weights, then all
// biases, as 64-bit little-endian floats, row-major.
void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

} // namespace fedmap
