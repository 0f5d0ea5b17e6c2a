#pragma once

#include <cstddef>

namespace fedmap::kernels {

// Dense kernels behind the forward/backward passes. Every kernel exists twice:
// the OpenMP variant parallelizes over independent output elements while each
// element's inner sum keeps a fixed serial order, so serial and parallel
// results are bitwise identical. `ref` holds the serial reference used by the
// tests and the benchmark.

// y[b*out+o] = sum_i x[b*in+i] * w[o*in+i] + bias[o]   (bias may be null)
void linear_forward(const double* x, const double* w, const double* bias, double* y,
                    std::size_t batch, std::size_t in, std::size_t out);

// dw[o*in+i] = sum_b dy[b*out+o] * x[b*in+i]
void linear_grad_weights(const double* dy, const double* x, double* dw,
                         std::size_t batch, std::size_t in, std::size_t out);

// dx[b*in+i] = sum_o dy[b*out+o] * w[o*in+i]
void linear_grad_inputs(const double* dy, const double* w, double* dx,
                        std::size_t batch, std::size_t in, std::size_t out);

// db[o] = sum_b dy[b*out+o]
void linear_grad_bias(const double* dy, double* db, std::size_t batch, std::size_t out);

// w[i] -= lr * (g[i] + decay * w[i])
void sgd_axpy(double* w, const double* g, double lr, double decay, std::size_t n);

// When false, the public kernels above route to the serial reference.
void set_parallel(bool enabled);
bool parallel_enabled();

namespace ref {
void linear_forward(const double* x, const double* w, const double* bias, double* y,
                    std::size_t batch, std::size_t in, std::size_t out);
void linear_grad_weights(const double* dy, const double* x, double* dw,
                         std::size_t batch, std::size_t in, std::size_t out);
void linear_grad_inputs(const double* dy, const double* w, double* dx,
                        std::size_t batch, std::size_t in, std::size_t out);
void linear_grad_bias(const double* dy, double* db, std::size_t batch, std::size_t out);
void sgd_axpy(double* w, const double* g, double lr, double decay, std::size_t n);
} // namespace ref

} // namespace fedmap::kernels
