#include "fedmap/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fedmap/errors.hpp"

namespace fedmap::pruning {

LayerValues lamp_scores(const Model& model) {
    LayerValues scores(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const std::vector<double>& w = model.layers[l].weight.values;
        scores[l].assign(w.size(), 0.0);
        if (w.empty()) continue;

        std::vector<std::size_t> order(w.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(w[a]) < std::abs(w[b]);
        });

        // Suffix sums over the ascending order give the denominator: everything
        // with magnitude at or above the current weight.
        double acc = 0.0;
        for (std::size_t p = order.size(); p-- > 0;) {
            const std::size_t idx = order[p];
            const double sq = w[idx] * w[idx];
            acc += sq;
            if (acc > 0.0) scores[l][idx] = sq / acc;
        }
    }
    return scores;
}

PruneResult prune(const Model& model, std::size_t K) {
    const std::size_t d = model.weight_count();
    if (K > d)
        throw StructuralError("prune: K=" + std::to_string(K) + " exceeds weight count " +
                              std::to_string(d));

    LayerValues scores = lamp_scores(model);

    struct Entry {
        double score;
        std::size_t layer;
        std::size_t idx;
    };
    std::vector<Entry> entries;
    entries.reserve(d);
    for (std::size_t l = 0; l < scores.size(); ++l)
        for (std::size_t i = 0; i < scores[l].size(); ++i)
            entries.push_back({scores[l][i], l, i});

    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.layer != b.layer) return a.layer < b.layer;
        return a.idx < b.idx;
    });

    PruneMask mask = PruneMask::zeros_like(model);
    for (std::size_t i = 0; i < K; ++i) mask.set(entries[i].layer, entries[i].idx, true);
    return {apply_mask(model, mask), mask};
}

Model apply_mask(const Model& model, const PruneMask& mask) {
    if (!mask.congruent(model)) throw StructuralError("apply_mask: mask shape mismatch");
    Model out = model;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        const auto& bits = mask.layer_bits(l);
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (!bits[i]) out.layers[l].weight.values[i] = 0.0;
    }
    return out;
}

} // namespace fedmap::pruning
