#pragma once

#include "fedmap/mask.hpp"
#include "fedmap/tensor.hpp"

namespace fedmap::feddr {

struct Params {
    double alpha = 0.95; // relaxation step
    double eta = 1000.0; // proximal strength (larger = weaker pull)
};

// One client's carried state between rounds.
struct ClientState {
    Model theta_y;          // intermediate variable
    Model theta_x_prev;     // last reflected model
    Model theta_local_prev; // last local solution
    bool initialized = false;
};

// theta_y <- mask(theta_y_prev) + alpha * (theta_global - mask(theta_local_prev)).
// The mask zeroes pruned weights; biases pass through untouched.
Model update_intermediate(const Model& theta_y_prev, const Model& theta_local_prev,
                          const Model& theta_global, const PruneMask& mask, double alpha);

// theta_x <- 2 * theta_local - theta_y.
Model reflect(const Model& theta_local, const Model& theta_y);

// What the client sends: theta_x_new - mask(theta_x_prev).
Model delta(const Model& theta_x_new, const Model& theta_x_prev, const PruneMask& mask);

// (theta - center) / eta, the gradient of the proximal penalty.
Model proximal_gradient(const Model& theta, const Model& center, double eta);

} // namespace fedmap::feddr
