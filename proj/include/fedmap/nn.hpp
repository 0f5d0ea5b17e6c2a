#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedmap/mask.hpp"
#include "fedmap/tensor.hpp"

namespace fedmap::nn {

struct ForwardResult {
    double loss = 0.0;              // mean cross-entropy over the batch
    std::vector<int> predictions;   // per-row argmax
};

ForwardResult forward(const Model& model, const Batch& batch);

// Exact reverse-mode gradients of the mean batch loss. Where the mask bit is
// zero the returned weight gradient is exactly zero; biases are unmasked.
Gradients backward(const Model& model, const Batch& batch, const PruneMask* mask = nullptr);

// w <- w - lr * (g + decay * w); decay is not applied to biases.
Model sgd_step(const Model& model, const Gradients& grads, double lr, double weight_decay);

struct Hyper {
    double lr = 0.01;
    double weight_decay = 5e-4;
    std::size_t batch_size = 128;
    std::uint64_t shuffle_seed = 0; // experiment_seed ^ client_id ^ round
};

// Quadratic-penalty pull toward a center model, weight 1/(2*eta).
struct Proximal {
    const Model* center = nullptr;
    double eta = 1000.0;
};

// L full epochs of minibatch SGD with masked gradients. Pruned positions stay
// exactly zero. When prox is given, each batch gradient is augmented by
// (theta - center) / eta.
Model train_local(const Model& model, const PruneMask& mask, const Dataset& data,
                  std::size_t epochs, const Hyper& hyper,
                  const std::optional<Proximal>& prox = std::nullopt);

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
};

EvalResult evaluate(const Model& model, const Dataset& data);

} // namespace fedmap::nn
