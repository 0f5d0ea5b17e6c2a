#include "fedmap/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "fedmap/errors.hpp"
#include "fedmap/kernels.hpp"
#include "fedmap/rng.hpp"

namespace fedmap::nn {

namespace {

struct LayerCache {
    std::vector<double> input;   // batch x in
    std::vector<double> preact;  // batch x out
    std::vector<double> output;  // batch x out (post activation)
};

void apply_activation(Activation act, std::vector<double>& pre, std::vector<double>& out,
                      std::size_t batch, std::size_t dim) {
    out.resize(pre.size());
    switch (act) {
    case Activation::Rectifier:
        for (std::size_t i = 0; i < pre.size(); ++i) out[i] = pre[i] > 0.0 ? pre[i] : 0.0;
        break;
    case Activation::Identity:
        out = pre;
        break;
    case Activation::SoftmaxOutput:
        for (std::size_t b = 0; b < batch; ++b) {
            const double* row = pre.data() + b * dim;
            double* orow = out.data() + b * dim;
            double mx = row[0];
            for (std::size_t j = 1; j < dim; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                orow[j] = std::exp(row[j] - mx);
                sum += orow[j];
            }
            for (std::size_t j = 0; j < dim; ++j) orow[j] /= sum;
        }
        break;
    }
}

// Runs the full forward pass, keeping per-layer caches when wanted by backward.
double forward_pass(const Model& model, const Batch& batch, std::vector<LayerCache>* caches,
                    std::vector<int>* predictions) {
    if (batch.rows.empty()) throw StructuralError("forward: empty batch");
    const Dataset& ds = *batch.data;
    const std::size_t n = batch.rows.size();

    std::vector<double> cur(n * ds.dim);
    for (std::size_t b = 0; b < n; ++b) {
        const double* src = ds.row(batch.rows[b]);
        std::copy(src, src + ds.dim, cur.begin() + b * ds.dim);
    }

    if (caches) caches->resize(model.layers.size());

    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        const std::size_t in = layer.in_dim();
        const std::size_t out = layer.out_dim();
        if (cur.size() != n * in)
            throw StructuralError("forward: layer " + std::to_string(l) + " expects input dim " +
                                  std::to_string(in));
        std::vector<double> pre(n * out);
        kernels::linear_forward(cur.data(), layer.weight.values.data(),
                                layer.has_bias() ? layer.bias.values.data() : nullptr,
                                pre.data(), n, in, out);
        std::vector<double> post;
        apply_activation(layer.activation, pre, post, n, out);
        if (caches) {
            (*caches)[l].input = std::move(cur);
            (*caches)[l].preact = std::move(pre);
            (*caches)[l].output = post;
        }
        cur = std::move(post);
    }

    const std::size_t classes = model.layers.back().out_dim();
    if (ds.num_classes != classes)
        throw StructuralError("forward: model emits " + std::to_string(classes) +
                              " classes but dataset has " + std::to_string(ds.num_classes));

    double loss = 0.0;
    if (predictions) predictions->resize(n);
    for (std::size_t b = 0; b < n; ++b) {
        const double* row = cur.data() + b * classes;
        int label = ds.labels[batch.rows[b]];
        if (label < 0 || static_cast<std::size_t>(label) >= classes)
            throw StructuralError("forward: label " + std::to_string(label) + " out of range");
        double p = row[label];
        loss += -std::log(std::max(p, 1e-300));
        if (predictions) {
            int best = 0;
            for (std::size_t j = 1; j < classes; ++j)
                if (row[j] > row[best]) best = static_cast<int>(j);
            (*predictions)[b] = best;
        }
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss)) throw NumericError("forward: non-finite loss");
    return loss;
}

} // namespace

ForwardResult forward(const Model& model, const Batch& batch) {
    ForwardResult r;
    std::vector<LayerCache> caches;
    r.loss = forward_pass(model, batch, &caches, &r.predictions);
    return r;
}

Gradients backward(const Model& model, const Batch& batch, const PruneMask* mask) {
    if (mask && !mask->congruent(model)) throw StructuralError("backward: mask shape mismatch");

    std::vector<LayerCache> caches;
    forward_pass(model, batch, &caches, nullptr);

    const Dataset& ds = *batch.data;
    const std::size_t n = batch.rows.size();
    const std::size_t L = model.layers.size();
    Gradients grads = model.zeros_like();

    // dL/d(preact) of the output layer for mean softmax cross-entropy.
    const std::size_t classes = model.layers.back().out_dim();
    std::vector<double> delta = caches[L - 1].output;
    for (std::size_t b = 0; b < n; ++b) {
        delta[b * classes + static_cast<std::size_t>(ds.labels[batch.rows[b]])] -= 1.0;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& v : delta) v *= inv_n;

    for (std::size_t li = L; li-- > 0;) {
        const Layer& layer = model.layers[li];
        const std::size_t in = layer.in_dim();
        const std::size_t out = layer.out_dim();

        if (li != L - 1) {
            // Activation backprop for hidden layers.
            if (layer.activation == Activation::Rectifier) {
                for (std::size_t i = 0; i < delta.size(); ++i)
                    if (caches[li].preact[i] <= 0.0) delta[i] = 0.0;
            } else if (layer.activation == Activation::SoftmaxOutput) {
                throw StructuralError("backward: softmax on hidden layer " + std::to_string(li));
            }
        }

        Layer& g = grads.layers[li];
        kernels::linear_grad_weights(delta.data(), caches[li].input.data(),
                                     g.weight.values.data(), n, in, out);
        if (layer.has_bias())
            kernels::linear_grad_bias(delta.data(), g.bias.values.data(), n, out);

        if (li > 0) {
            std::vector<double> dx(n * in);
            kernels::linear_grad_inputs(delta.data(), layer.weight.values.data(), dx.data(), n, in,
                                        out);
            delta = std::move(dx);
        }

        for (double v : g.weight.values)
            if (!std::isfinite(v))
                throw NumericError("backward: non-finite gradient in layer " + std::to_string(li));

        if (mask) {
            const auto& bits = mask->layer_bits(li);
            for (std::size_t i = 0; i < bits.size(); ++i)
                if (!bits[i]) g.weight.values[i] = 0.0;
        }
    }
    return grads;
}

Model sgd_step(const Model& model, const Gradients& grads, double lr, double weight_decay) {
    if (!model.congruent(grads)) throw StructuralError("sgd_step: gradient shape mismatch");
    Model next = model;
    for (std::size_t l = 0; l < next.layers.size(); ++l) {
        Layer& layer = next.layers[l];
        const Layer& g = grads.layers[l];
        kernels::sgd_axpy(layer.weight.values.data(), g.weight.values.data(), lr, weight_decay,
                          layer.weight.values.size());
        if (layer.has_bias())
            kernels::sgd_axpy(layer.bias.values.data(), g.bias.values.data(), lr, 0.0,
                              layer.bias.values.size());
    }
    return next;
}

Model train_local(const Model& model, const PruneMask& mask, const Dataset& data,
                  std::size_t epochs, const Hyper& hyper,
                  const std::optional<Proximal>& prox) {
    if (data.features.empty()) throw StructuralError("train_local: empty dataset");
    if (!mask.congruent(model)) throw StructuralError("train_local: mask shape mismatch");
    if (hyper.batch_size == 0) throw StructuralError("train_local: batch_size must be positive");
    if (prox && prox->center && !model.congruent(*prox->center))
        throw StructuralError("train_local: prox center shape mismatch");

    Model local = model;
    const std::size_t n = data.labels.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    rng::Stream shuffler(hyper.shuffle_seed);
    for (std::size_t e = 0; e < epochs; ++e) {
        shuffler.shuffle(order);
        for (std::size_t start = 0; start < n; start += hyper.batch_size) {
            const std::size_t stop = std::min(start + hyper.batch_size, n);
            Batch batch;
            batch.data = &data;
            batch.rows.assign(order.begin() + start, order.begin() + stop);
            Gradients grads = backward(local, batch, &mask);
            if (prox && prox->center) {
                const double inv_eta = 1.0 / prox->eta;
                for (std::size_t l = 0; l < local.layers.size(); ++l) {
                    Layer& g = grads.layers[l];
                    const Layer& cur = local.layers[l];
                    const Layer& c = prox->center->layers[l];
                    const auto& bits = mask.layer_bits(l);
                    for (std::size_t i = 0; i < g.weight.values.size(); ++i)
                        if (bits[i])
                            g.weight.values[i] +=
                                (cur.weight.values[i] - c.weight.values[i]) * inv_eta;
                    for (std::size_t i = 0; i < g.bias.values.size(); ++i)
                        g.bias.values[i] += (cur.bias.values[i] - c.bias.values[i]) * inv_eta;
                }
            }
            local = sgd_step(local, grads, hyper.lr, hyper.weight_decay);
        }
    }

    // Pruned positions must leave exactly zero no matter what decay or prox did.
    for (std::size_t l = 0; l < local.layers.size(); ++l) {
        const auto& bits = mask.layer_bits(l);
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (!bits[i]) local.layers[l].weight.values[i] = 0.0;
    }
    local.check_finite("train_local");
    return local;
}

EvalResult evaluate(const Model& model, const Dataset& data) {
    if (data.labels.empty()) throw StructuralError("evaluate: empty dataset");
    Batch all;
    all.data = &data;
    all.rows.resize(data.labels.size());
    for (std::size_t i = 0; i < all.rows.size(); ++i) all.rows[i] = i;
    ForwardResult fr = forward(model, all);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < all.rows.size(); ++i)
        if (fr.predictions[i] == data.labels[i]) ++hits;
    EvalResult r;
    r.loss = fr.loss;
    r.accuracy = static_cast<double>(hits) / static_cast<double>(all.rows.size());
    return r;
}

} // namespace fedmap::nn
