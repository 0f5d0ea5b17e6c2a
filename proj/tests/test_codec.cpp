#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <random>
#include <vector>

#include "fedmap/codec.hpp"
#include "fedmap/errors.hpp"
#include "fedmap/mask.hpp"
#include "fedmap/tensor.hpp"

using namespace fedmap;

namespace {

Model shape_model(const std::vector<std::size_t>& sizes) {
    Model m;
    for (std::size_t s : sizes) {
        Layer l;
        l.weight = WeightTensor({1, s});
        m.layers.push_back(std::move(l));
    }
    return m;
}

PruneMask mask_from_bits(const Model& m, const std::vector<std::vector<int>>& bits) {
    PruneMask mask = PruneMask::zeros_like(m);
    for (std::size_t l = 0; l < bits.size(); ++l)
        for (std::size_t i = 0; i < bits[l].size(); ++i)
            if (bits[l][i]) mask.set(l, i, true);
    return mask;
}

LayerValues random_values(const Model& m, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    LayerValues v = zeros_like_weights(m);
    for (auto& layer : v)
        for (double& x : layer) x = n(gen);
    return v;
}

} // namespace

TEST_CASE("rwz selects the masked positions in order") {
    const Model m = shape_model({4});
    const PruneMask mask = mask_from_bits(m, {{1, 0, 1, 0}});
    const LayerValues dense = {{0.5, 0.0, -1.2, 0.0}};
    CHECK(codec::rwz(dense, mask) == std::vector<double>{0.5, -1.2});
}

TEST_CASE("rwz with an all-ones mask flattens, with all-zeros empties") {
    const Model m = shape_model({3, 2});
    const LayerValues dense = {{1.0, 2.0, 3.0}, {4.0, 5.0}};
    CHECK(codec::rwz(dense, PruneMask::ones_like(m)) ==
          std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0});
    CHECK(codec::rwz(dense, PruneMask::zeros_like(m)).empty());
}

TEST_CASE("rwz discards off-support values even when nonzero") {
    const Model m = shape_model({3});
    const PruneMask mask = mask_from_bits(m, {{0, 1, 0}});
    const LayerValues dense = {{99.0, 7.0, -99.0}};
    CHECK(codec::rwz(dense, mask) == std::vector<double>{7.0});
}

TEST_CASE("rfm scatters a single value to its exact slot") {
    const Model m = shape_model({2, 2, 5});
    PruneMask mask = PruneMask::zeros_like(m);
    mask.set(2, 3, true);
    const LayerValues out = codec::rfm({7.0}, mask);
    for (std::size_t l = 0; l < out.size(); ++l)
        for (std::size_t i = 0; i < out[l].size(); ++i) {
            if (l == 2 && i == 3)
                CHECK(out[l][i] == 7.0);
            else
                CHECK(out[l][i] == 0.0);
        }
}

TEST_CASE("rfm of an empty payload on a zero mask is the zero vector") {
    const Model m = shape_model({4, 3});
    const LayerValues out = codec::rfm({}, PruneMask::zeros_like(m));
    for (const auto& layer : out)
        for (double v : layer) CHECK(v == 0.0);
}

TEST_CASE("rfm rejects a payload whose length disagrees with the mask") {
    const Model m = shape_model({4});
    const PruneMask mask = mask_from_bits(m, {{1, 1, 0, 0}});
    CHECK_THROWS_AS(codec::rfm({1.0}, mask), StructuralError);
    CHECK_THROWS_AS(codec::rfm({1.0, 2.0, 3.0}, mask), StructuralError);
}

TEST_CASE("roundtrip reproduces the masked input over all 256 masks of one layer") {
    const Model m = shape_model({8});
    const LayerValues dense = random_values(m, 42);
    for (unsigned bits = 0; bits < 256; ++bits) {
        PruneMask mask = PruneMask::zeros_like(m);
        for (unsigned i = 0; i < 8; ++i)
            if (bits & (1u << i)) mask.set(0, i, true);
        const LayerValues back = codec::rfm(codec::rwz(dense, mask), mask);
        for (unsigned i = 0; i < 8; ++i)
            CHECK(back[0][i] == (mask.get(0, i) ? dense[0][i] : 0.0));
    }
}

TEST_CASE("roundtrip holds on randomized larger shapes") {
    std::mt19937_64 gen(7);
    const Model m = shape_model({37, 64, 9});
    for (int trial = 0; trial < 10000; ++trial) {
        PruneMask mask = PruneMask::zeros_like(m);
        for (std::size_t l = 0; l < 3; ++l)
            for (std::size_t i = 0; i < mask.layer_size(l); ++i)
                if (gen() & 1) mask.set(l, i, true);
        const LayerValues dense = random_values(m, gen());
        const LayerValues back = codec::rfm(codec::rwz(dense, mask), mask);
        bool exact = true;
        for (std::size_t l = 0; l < back.size(); ++l)
            for (std::size_t i = 0; i < back[l].size(); ++i)
                exact = exact && back[l][i] == (mask.get(l, i) ? dense[l][i] : 0.0);
        CHECK(exact);
    }
}

TEST_CASE("byte math follows ceil(count*bits/8)") {
    CHECK(codec::payload_bytes(7500, 32) == 30000);
    CHECK(codec::payload_bytes(0, 32) == 0);
    CHECK(codec::payload_bytes(1, 32) == 4);
    CHECK(codec::payload_bytes(3, 64) == 24);
    CHECK(codec::mask_bytes(10000) == 1250);
    CHECK(codec::mask_bytes(10001) == 1251);
    CHECK(codec::mask_bytes(7) == 1);
}

TEST_CASE("account charges values, optional mask, and the running total") {
    codec::ByteLedger ledger;
    ledger = codec::account(ledger, 7500, codec::Direction::Up, false, 10000);
    CHECK(ledger.uplink_bytes_per_client == 30000);
    CHECK(ledger.downlink_bytes == 0);
    CHECK(ledger.mask_bytes == 0);
    CHECK(ledger.cumulative_bytes == 30000);

    ledger = codec::account(ledger, 7500, codec::Direction::Down, true, 10000);
    CHECK(ledger.downlink_bytes == 30000 + 1250);
    CHECK(ledger.mask_bytes == 1250);
    CHECK(ledger.cumulative_bytes == 30000 + 30000 + 1250);

    const std::uint64_t before = ledger.cumulative_bytes;
    ledger = codec::account(ledger, 0, codec::Direction::Up, false, 10000);
    CHECK(ledger.cumulative_bytes == before);

    ledger.begin_round();
    CHECK(ledger.uplink_bytes_per_client == 0);
    CHECK(ledger.downlink_bytes == 0);
    CHECK(ledger.mask_bytes == 0);
    CHECK(ledger.cumulative_bytes == before); // cumulative survives round resets
}

TEST_CASE("account rejects counting more values than exist") {
    codec::ByteLedger ledger;
    CHECK_THROWS_AS(codec::account(ledger, 11, codec::Direction::Up, false, 10), StructuralError);
}

TEST_CASE("payload wire image roundtrips exactly at 64-bit") {
    codec::SparsePayload p;
    p.round = 17;
    p.client_id = 3;
    p.values = {1.5, -2.25, 1e-12, 3.141592653589793};
    p.biases = {0.125, -8.0};
    const std::vector<std::uint8_t> bytes = codec::encode_payload(p, 64);
    const codec::SparsePayload q = codec::decode_payload(bytes, 64);
    CHECK(q.round == 17);
    CHECK(q.client_id == 3);
    CHECK(q.values == p.values);
    CHECK(q.biases == p.biases);
}

TEST_CASE("32-bit wire width rounds values through float") {
    codec::SparsePayload p;
    p.round = 1;
    p.client_id = 1;
    p.values = {0.1, 1.0 / 3.0, 2.5};
    const std::vector<std::uint8_t> bytes = codec::encode_payload(p, 32);
    const codec::SparsePayload q = codec::decode_payload(bytes, 32);
    CHECK(q.values[0] == static_cast<double>(static_cast<float>(0.1)));
    CHECK(q.values[1] == static_cast<double>(static_cast<float>(1.0 / 3.0)));
    CHECK(q.values[2] == 2.5); // exactly representable, unchanged
    CHECK(q.values[0] != 0.1);
}

TEST_CASE("payload byte size matches the accounting formula plus framing") {
    codec::SparsePayload p;
    p.round = 2;
    p.client_id = 9;
    p.values.assign(11, 1.0);
    p.biases.assign(3, 2.0);
    const std::vector<std::uint8_t> bytes = codec::encode_payload(p, 32);
    // 5 magic + 3*4 header + 11*4 values + 4 bias count + 3*4 biases
    CHECK(bytes.size() == 5 + 12 + codec::payload_bytes(11, 32) + 4 + 12);
}

TEST_CASE("decode rejects corrupt framing") {
    codec::SparsePayload p;
    p.values = {1.0, 2.0};
    std::vector<std::uint8_t> bytes = codec::encode_payload(p, 32);

    std::vector<std::uint8_t> bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(codec::decode_payload(bad_magic, 32), StructuralError);

    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 3);
    CHECK_THROWS_AS(codec::decode_payload(truncated, 32), StructuralError);

    std::vector<std::uint8_t> trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(codec::decode_payload(trailing, 32), StructuralError);

    CHECK_THROWS_AS(codec::decode_payload(bytes, 16), StructuralError);
}

TEST_CASE("encoding is byte-stable for identical payloads") {
    codec::SparsePayload p;
    p.round = 5;
    p.client_id = 2;
    p.values = {0.25, -0.75, 11.0};
    p.biases = {1.0};
    CHECK(codec::encode_payload(p, 32) == codec::encode_payload(p, 32));
    CHECK(codec::encode_payload(p, 64) == codec::encode_payload(p, 64));
}
