#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <vector>

#include "fedmap/errors.hpp"
#include "fedmap/feddr.hpp"
#include "fedmap/mask.hpp"
#include "fedmap/pruning.hpp"
#include "fedmap/tensor.hpp"

using namespace fedmap;

namespace {

Model scalar_model(double w, double b) {
    Model m;
    Layer l;
    l.weight = WeightTensor({1, 1});
    l.weight.values = {w};
    l.bias = WeightTensor({1});
    l.bias.values = {b};
    m.layers.push_back(std::move(l));
    return m;
}

Model random_model(std::uint64_t seed) { return make_mlp(3, {4}, 2, seed); }

bool mask_compliant(const Model& m, const PruneMask& mask) {
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& bits = mask.layer_bits(l);
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (!bits[i] && m.layers[l].weight.values[i] != 0.0) return false;
    }
    return true;
}

} // namespace

TEST_CASE("intermediate update on a scalar") {
    const Model y_prev = scalar_model(1.0, 0.0);
    const Model local_prev = scalar_model(0.8, 0.0);
    const Model global = scalar_model(1.2, 0.0);
    const Model y = feddr::update_intermediate(y_prev, local_prev, global,
                                               PruneMask::ones_like(global), 0.95);
    CHECK(y.layers[0].weight.values[0] == doctest::Approx(1.38).epsilon(1e-15));
}

TEST_CASE("bootstrapped state makes the first intermediate equal the global model") {
    const Model global = random_model(3);
    // All carried state starts as the pruned global model, so the update
    // collapses for any alpha: masked terms cancel, off-mask global is zero.
    const pruning::PruneResult pr = pruning::prune(global, global.weight_count() / 2);
    for (double alpha : {0.5, 0.95, 1.75}) {
        const Model y =
            feddr::update_intermediate(pr.model, pr.model, pr.model, pr.mask, alpha);
        for (std::size_t l = 0; l < y.layers.size(); ++l) {
            CHECK(y.layers[l].weight.values == pr.model.layers[l].weight.values);
            CHECK(y.layers[l].bias.values == pr.model.layers[l].bias.values);
        }
    }
}

TEST_CASE("masked-off positions keep only the scaled global term") {
    const Model y_prev = scalar_model(3.0, 0.0);
    const Model local_prev = scalar_model(5.0, 0.0);
    const Model global = scalar_model(1.2, 0.0);
    const Model shape = scalar_model(0.0, 0.0);
    const Model y = feddr::update_intermediate(y_prev, local_prev, global,
                                               PruneMask::zeros_like(shape), 0.95);
    CHECK(y.layers[0].weight.values[0] == doctest::Approx(0.95 * 1.2).epsilon(1e-15));
}

TEST_CASE("biases ignore the mask in the intermediate update") {
    const Model y_prev = scalar_model(0.0, 1.0);
    const Model local_prev = scalar_model(0.0, 0.8);
    const Model global = scalar_model(0.0, 1.2);
    const Model shape = scalar_model(0.0, 0.0);
    const Model y = feddr::update_intermediate(y_prev, local_prev, global,
                                               PruneMask::zeros_like(shape), 0.95);
    CHECK(y.layers[0].bias.values[0] == doctest::Approx(1.38).epsilon(1e-15));
}

TEST_CASE("reflection doubles the local move away from the intermediate") {
    const Model local = scalar_model(1.5, 2.5);
    const Model y = scalar_model(1.0, 2.0);
    const Model x = feddr::reflect(local, y);
    CHECK(x.layers[0].weight.values[0] == 2.0);
    CHECK(x.layers[0].bias.values[0] == 3.0);

    const Model fix = feddr::reflect(y, y);
    CHECK(fix.layers[0].weight.values[0] == y.layers[0].weight.values[0]);
}

TEST_CASE("reflection preserves mask compliance") {
    const Model base = random_model(21);
    const pruning::PruneResult pr = pruning::prune(base, base.weight_count() / 3);
    const Model other = pruning::apply_mask(random_model(22), pr.mask);
    const Model x = feddr::reflect(pr.model, other);
    CHECK(mask_compliant(x, pr.mask));
}

TEST_CASE("transmitted difference subtracts the masked previous reflection") {
    const Model x_new = scalar_model(2.0, 4.0);
    const Model x_prev = scalar_model(1.5, 1.0);
    const Model shape = scalar_model(0.0, 0.0);

    const Model on = feddr::delta(x_new, x_prev, PruneMask::ones_like(shape));
    CHECK(on.layers[0].weight.values[0] == 0.5);
    CHECK(on.layers[0].bias.values[0] == 3.0);

    // With the position pruned, the previous value is treated as zero.
    const Model off = feddr::delta(x_new, x_prev, PruneMask::zeros_like(shape));
    CHECK(off.layers[0].weight.values[0] == 2.0);
    CHECK(off.layers[0].bias.values[0] == 3.0); // biases never masked

    const Model zero = feddr::delta(x_prev, x_prev, PruneMask::ones_like(shape));
    CHECK(zero.layers[0].weight.values[0] == 0.0);
    CHECK(zero.layers[0].bias.values[0] == 0.0);
}

TEST_CASE("proximal gradient is the scaled displacement") {
    const Model theta = scalar_model(1.5, 0.5);
    const Model center = scalar_model(1.0, 0.5);
    const Model g = feddr::proximal_gradient(theta, center, 10.0);
    CHECK(g.layers[0].weight.values[0] == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(g.layers[0].bias.values[0] == 0.0);

    const Model self = feddr::proximal_gradient(theta, theta, 1000.0);
    CHECK(self.layers[0].weight.values[0] == 0.0);

    // Large eta makes the pull vanish.
    const Model weak = feddr::proximal_gradient(theta, center, 1e12);
    CHECK(weak.layers[0].weight.values[0] == doctest::Approx(0.0).epsilon(1e-10));

    CHECK_THROWS_AS(feddr::proximal_gradient(theta, center, 0.0), StructuralError);
}

TEST_CASE("shape mismatches are rejected") {
    const Model a = random_model(31);
    const Model b = make_mlp(3, {5}, 2, 32);
    CHECK_THROWS_AS(feddr::reflect(a, b), StructuralError);
    CHECK_THROWS_AS(feddr::delta(a, b, PruneMask::ones_like(a)), StructuralError);
    CHECK_THROWS_AS(
        feddr::update_intermediate(a, a, b, PruneMask::ones_like(a), 0.95),
        StructuralError);
}

TEST_CASE("alpha=1 with bootstrapped state doubles the plain update direction") {
    // Symbolically: y = g, local trains to v, x = 2v - g, and the transmitted
    // difference x - g = 2(v - g) is twice the plain local delta v - g.
    const Model g = scalar_model(1.0, 0.0);
    const Model y = feddr::update_intermediate(g, g, g, PruneMask::ones_like(g), 1.0);
    CHECK(y.layers[0].weight.values[0] == 1.0);

    const Model v = scalar_model(0.6, 0.0); // stand-in for the local training result
    const Model x = feddr::reflect(v, y);
    const Model sent = feddr::delta(x, g, PruneMask::ones_like(g));
    CHECK(sent.layers[0].weight.values[0] == doctest::Approx(2.0 * (0.6 - 1.0)).epsilon(1e-15));
}
