#include "fedmap/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedmap/errors.hpp"

namespace fedmap::aggregation {

Model fedavg_aggregate(const std::vector<Model>& models, const std::vector<double>& weights) {
    if (models.empty()) throw StructuralError("fedavg_aggregate: no models");
    if (weights.size() != models.size())
        throw StructuralError("fedavg_aggregate: weight count mismatch");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw StructuralError("fedavg_aggregate: negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw StructuralError("fedavg_aggregate: weights sum to " + std::to_string(sum));
    for (const Model& m : models)
        if (!models.front().congruent(m))
            throw StructuralError("fedavg_aggregate: model shape mismatch");

    Model out = models.front().zeros_like();
    for (std::size_t n = 0; n < models.size(); ++n) {
        const double w = weights[n];
        for (std::size_t l = 0; l < out.layers.size(); ++l) {
            const Layer& src = models[n].layers[l];
            Layer& dst = out.layers[l];
            for (std::size_t i = 0; i < dst.weight.values.size(); ++i)
                dst.weight.values[i] += w * src.weight.values[i];
            for (std::size_t i = 0; i < dst.bias.values.size(); ++i)
                dst.bias.values[i] += w * src.bias.values[i];
        }
    }
    return out;
}

LayerValues masked_aggregate(std::vector<MaskedUpdate> updates) {
    if (updates.empty()) throw StructuralError("masked_aggregate: no updates");
    for (const MaskedUpdate& u : updates) {
        if (!u.delta || !u.mask) throw StructuralError("masked_aggregate: null update");
        if (u.weight < 0.0) throw StructuralError("masked_aggregate: negative weight");
    }
    std::sort(updates.begin(), updates.end(),
              [](const MaskedUpdate& a, const MaskedUpdate& b) { return a.client_id < b.client_id; });

    const MaskedUpdate& first = updates.front();
    const std::size_t layers = first.delta->size();
    for (const MaskedUpdate& u : updates) {
        if (u.delta->size() != layers || u.mask->layer_count() != layers)
            throw StructuralError("masked_aggregate: layer count mismatch");
        for (std::size_t l = 0; l < layers; ++l)
            if ((*u.delta)[l].size() != (*first.delta)[l].size() ||
                u.mask->layer_bits(l).size() != (*u.delta)[l].size())
                throw StructuralError("masked_aggregate: layer " + std::to_string(l) +
                                      " size mismatch");
    }

    LayerValues out(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t n = (*first.delta)[l].size();
        out[l].assign(n, 0.0);
        std::vector<double> cover(n, 0.0);
        for (const MaskedUpdate& u : updates) {
            const auto& bits = u.mask->layer_bits(l);
            const auto& vals = (*u.delta)[l];
            for (std::size_t i = 0; i < n; ++i) {
                if (bits[i]) {
                    out[l][i] += u.weight * vals[i];
                    cover[i] += u.weight;
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) out[l][i] = cover[i] > 0.0 ? out[l][i] / cover[i] : 0.0;
    }
    return out;
}

std::vector<double> average_values(const std::vector<std::vector<double>>& rows,
                                   const std::vector<double>* weights) {
    if (rows.empty()) throw StructuralError("average_values: no rows");
    if (weights && weights->size() != rows.size())
        throw StructuralError("average_values: weight count mismatch");
    const std::size_t n = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != n) throw StructuralError("average_values: length mismatch");

    std::vector<double> out(n, 0.0);
    const double uniform = 1.0 / static_cast<double>(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double w = weights ? (*weights)[k] : uniform;
        for (std::size_t i = 0; i < n; ++i) out[i] += w * rows[k][i];
    }
    return out;
}

} // namespace fedmap::aggregation
