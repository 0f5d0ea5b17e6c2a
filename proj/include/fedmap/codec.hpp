#pragma once

#include <cstdint>
#include <vector>

#include "fedmap/mask.hpp"
#include "fedmap/tensor.hpp"

namespace fedmap::codec {

// Gather the dense per-layer values at the mask's set positions, in
// (layer, flat index) ascending order.
std::vector<double> rwz(const LayerValues& dense, const PruneMask& mask);

// Scatter packed values back onto the mask support; cleared positions read 0.
// Inverse of rwz on the support: rfm(rwz(x, m), m) reproduces x wherever the
// mask is set, exactly.
LayerValues rfm(const std::vector<double>& packed, const PruneMask& mask);

// Bytes needed for `count` values at the given width: ceil(count * bits / 8).
std::uint64_t payload_bytes(std::uint64_t count, unsigned bits_per_param);

// Bytes for a packed bitmap over all weight positions: ceil(d / 8).
std::uint64_t mask_bytes(std::uint64_t total_weights);

// Per-round traffic. Uplink is measured per client; the broadcast is counted
// once. Cumulative sums everything ever accounted.
struct ByteLedger {
    unsigned bits_per_param = 32;
    std::uint64_t uplink_bytes_per_client = 0;
    std::uint64_t downlink_bytes = 0;
    std::uint64_t mask_bytes = 0;
    std::uint64_t cumulative_bytes = 0;

    // Clears the per-round fields; cumulative carries across rounds.
    void begin_round() {
        uplink_bytes_per_client = 0;
        downlink_bytes = 0;
        mask_bytes = 0;
    }
};

enum class Direction { Up, Down };

// Charge one transfer of `count` values to the ledger. with_mask adds a
// packed bitmap over all positions on top (the rerank baseline sends its
// mask every round; nothing else ever does).
ByteLedger account(ByteLedger ledger, std::uint64_t count, Direction direction, bool with_mask,
                   std::uint64_t total_weights);

struct SparsePayload {
    std::uint32_t round = 0;
    std::uint32_t client_id = 0;
    std::vector<double> values; // mask-support order
    std::vector<double> biases; // every bias, layer order
};

// Wire image: magic "FPAY1", round, client id, value count (u32 LE each),
// the values, then a u32 bias count and the biases. Values are IEEE little
// endian at bits_per_param width (32 or 64); at 32 they round through float.
std::vector<std::uint8_t> encode_payload(const SparsePayload& payload, unsigned bits_per_param);
SparsePayload decode_payload(const std::vector<std::uint8_t>& bytes, unsigned bits_per_param);

} // namespace fedmap::codec
