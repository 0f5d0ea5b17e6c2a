#include "fedmap/kernels.hpp"

#include <atomic>

namespace fedmap::kernels {

namespace {
std::atomic<bool> g_parallel{true};

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelThreshold = 16 * 1024;
} // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

namespace ref {

void linear_forward(const double* x, const double* w, const double* bias, double* y,
                    std::size_t batch, std::size_t in, std::size_t out) {
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) {
            double acc = bias ? bias[o] : 0.0;
            const double* xr = x + b * in;
            const double* wr = w + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
            y[b * out + o] = acc;
        }
    }
}

void linear_grad_weights(const double* dy, const double* x, double* dw,
                         std::size_t batch, std::size_t in, std::size_t out) {
    for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < in; ++i) {
            double acc = 0.0;
            for (std::size_t b = 0; b < batch; ++b) acc += dy[b * out + o] * x[b * in + i];
            dw[o * in + i] = acc;
        }
    }
}

void linear_grad_inputs(const double* dy, const double* w, double* dx,
                        std::size_t batch, std::size_t in, std::size_t out) {
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < in; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < out; ++o) acc += dy[b * out + o] * w[o * in + i];
            dx[b * in + i] = acc;
        }
    }
}

void linear_grad_bias(const double* dy, double* db, std::size_t batch, std::size_t out) {
    for (std::size_t o = 0; o < out; ++o) {
        double acc = 0.0;
        for (std::size_t b = 0; b < batch; ++b) acc += dy[b * out + o];
        db[o] = acc;
    }
}

void sgd_axpy(double* w, const double* g, double lr, double decay, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) w[i] -= lr * (g[i] + decay * w[i]);
}

} // namespace ref

void linear_forward(const double* x, const double* w, const double* bias, double* y,
                    std::size_t batch, std::size_t in, std::size_t out) {
    if (!parallel_enabled() || batch * in * out < kParallelThreshold) {
        ref::linear_forward(x, w, bias, y, batch, in, out);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) {
            double acc = bias ? bias[o] : 0.0;
            const double* xr = x + b * in;
            const double* wr = w + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
            y[b * out + o] = acc;
        }
    }
}

void linear_grad_weights(const double* dy, const double* x, double* dw,
                         std::size_t batch, std::size_t in, std::size_t out) {
    if (!parallel_enabled() || batch * in * out < kParallelThreshold) {
        ref::linear_grad_weights(dy, x, dw, batch, in, out);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < in; ++i) {
            double acc = 0.0;
            for (std::size_t b = 0; b < batch; ++b) acc += dy[b * out + o] * x[b * in + i];
            dw[o * in + i] = acc;
        }
    }
}

void linear_grad_inputs(const double* dy, const double* w, double* dx,
                        std::size_t batch, std::size_t in, std::size_t out) {
    if (!parallel_enabled() || batch * in * out < kParallelThreshold) {
        ref::linear_grad_inputs(dy, w, dx, batch, in, out);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < in; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < out; ++o) acc += dy[b * out + o] * w[o * in + i];
            dx[b * in + i] = acc;
        }
    }
}

void linear_grad_bias(const double* dy, double* db, std::size_t batch, std::size_t out) {
    if (!parallel_enabled() || batch * out < kParallelThreshold) {
        ref::linear_grad_bias(dy, db, batch, out);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::size_t o = 0; o < out; ++o) {
        double acc = 0.0;
        for (std::size_t b = 0; b < batch; ++b) acc += dy[b * out + o];
        db[o] = acc;
    }
}

void sgd_axpy(double* w, const double* g, double lr, double decay, std::size_t n) {
    if (!parallel_enabled() || n < kParallelThreshold) {
        ref::sgd_axpy(w, g, lr, decay, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) w[i] -= lr * (g[i] + decay * w[i]);
}

} // namespace fedmap::kernels
