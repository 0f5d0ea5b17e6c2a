#include "fedmap/feddr.hpp"

#include "fedmap/errors.hpp"

namespace fedmap::feddr {

namespace {

void check_congruent(const Model& a, const Model& b, const char* where) {
    if (!a.congruent(b)) throw StructuralError(std::string(where) + ": model shape mismatch");
}

double masked(double v, bool bit) { return bit ? v : 0.0; }

} // namespace

Model update_intermediate(const Model& theta_y_prev, const Model& theta_local_prev,
                          const Model& theta_global, const PruneMask& mask, double alpha) {
    check_congruent(theta_y_prev, theta_local_prev, "update_intermediate");
    check_congruent(theta_y_prev, theta_global, "update_intermediate");
    if (!mask.congruent(theta_y_prev))
        throw StructuralError("update_intermediate: mask shape mismatch");

    Model out = theta_y_prev;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        const auto& bits = mask.layer_bits(l);
        auto& w = out.layers[l].weight.values;
        const auto& wl = theta_local_prev.layers[l].weight.values;
        const auto& wg = theta_global.layers[l].weight.values;
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = masked(w[i], bits[i]) + alpha * (wg[i] - masked(wl[i], bits[i]));
        auto& b = out.layers[l].bias.values;
        const auto& bl = theta_local_prev.layers[l].bias.values;
        const auto& bg = theta_global.layers[l].bias.values;
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = b[i] + alpha * (bg[i] - bl[i]);
    }
    return out;
}

Model reflect(const Model& theta_local, const Model& theta_y) {
    check_congruent(theta_local, theta_y, "reflect");
    Model out = theta_local;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        auto& w = out.layers[l].weight.values;
        const auto& wy = theta_y.layers[l].weight.values;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = 2.0 * w[i] - wy[i];
        auto& b = out.layers[l].bias.values;
        const auto& by = theta_y.layers[l].bias.values;
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = 2.0 * b[i] - by[i];
    }
    return out;
}

Model delta(const Model& theta_x_new, const Model& theta_x_prev, const PruneMask& mask) {
    check_congruent(theta_x_new, theta_x_prev, "delta");
    if (!mask.congruent(theta_x_new)) throw StructuralError("delta: mask shape mismatch");
    Model out = theta_x_new;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        const auto& bits = mask.layer_bits(l);
        auto& w = out.layers[l].weight.values;
        const auto& wp = theta_x_prev.layers[l].weight.values;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= masked(wp[i], bits[i]);
        auto& b = out.layers[l].bias.values;
        const auto& bp = theta_x_prev.layers[l].bias.values;
        for (std::size_t i = 0; i < b.size(); ++i) b[i] -= bp[i];
    }
    return out;
}

Model proximal_gradient(const Model& theta, const Model& center, double eta) {
    check_congruent(theta, center, "proximal_gradient");
    if (eta <= 0.0) throw StructuralError("proximal_gradient: eta must be positive");
    Model out = theta;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        auto& w = out.layers[l].weight.values;
        const auto& cw = center.layers[l].weight.values;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = (w[i] - cw[i]) / eta;
        auto& b = out.layers[l].bias.values;
        const auto& cb = center.layers[l].bias.values;
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = (b[i] - cb[i]) / eta;
    }
    return out;
}

} // namespace fedmap::feddr
