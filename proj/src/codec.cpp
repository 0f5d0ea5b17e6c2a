#include "fedmap/codec.hpp"

#include <cstring>
#include <string>

#include "fedmap/errors.hpp"

namespace fedmap::codec {

namespace {

void check_width(unsigned bits_per_param) {
    if (bits_per_param != 32 && bits_per_param != 64)
        throw StructuralError("codec: unsupported value width " + std::to_string(bits_per_param));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw StructuralError("payload: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

void put_value(std::vector<std::uint8_t>& out, double v, unsigned bits) {
    if (bits == 32) {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        put_u32(out, u);
    } else {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
    }
}

double get_value(const std::vector<std::uint8_t>& in, std::size_t& pos, unsigned bits) {
    if (bits == 32) {
        const std::uint32_t u = get_u32(in, pos);
        float f;
        std::memcpy(&f, &u, 4);
        return static_cast<double>(f);
    }
    if (pos + 8 > in.size()) throw StructuralError("payload: truncated value block");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

constexpr char kMagic[5] = {'F', 'P', 'A', 'Y', '1'};

} // namespace

std::vector<double> rwz(const LayerValues& dense, const PruneMask& mask) {
    if (dense.size() != mask.layer_count()) throw StructuralError("rwz: layer count mismatch");
    for (std::size_t l = 0; l < dense.size(); ++l)
        if (dense[l].size() != mask.layer_bits(l).size())
            throw StructuralError("rwz: layer " + std::to_string(l) + " size mismatch");

    std::vector<double> packed;
    packed.reserve(mask.nonzero_count());
    mask.for_each_set([&](std::size_t l, std::size_t i) { packed.push_back(dense[l][i]); });
    return packed;
}

LayerValues rfm(const std::vector<double>& packed, const PruneMask& mask) {
    if (packed.size() != mask.nonzero_count())
        throw StructuralError("rfm: got " + std::to_string(packed.size()) + " values, mask has " +
                              std::to_string(mask.nonzero_count()) + " set positions");
    LayerValues dense(mask.layer_count());
    for (std::size_t l = 0; l < dense.size(); ++l)
        dense[l].assign(mask.layer_bits(l).size(), 0.0);
    std::size_t next = 0;
    mask.for_each_set([&](std::size_t l, std::size_t i) { dense[l][i] = packed[next++]; });
    return dense;
}

std::uint64_t payload_bytes(std::uint64_t count, unsigned bits_per_param) {
    check_width(bits_per_param);
    return (count * bits_per_param + 7) / 8;
}

std::uint64_t mask_bytes(std::uint64_t total_weights) { return (total_weights + 7) / 8; }

ByteLedger account(ByteLedger ledger, std::uint64_t count, Direction direction, bool with_mask,
                   std::uint64_t total_weights) {
    if (count > total_weights) throw StructuralError("account: count exceeds total weights");
    std::uint64_t bytes = payload_bytes(count, ledger.bits_per_param);
    if (with_mask) {
        const std::uint64_t mb = mask_bytes(total_weights);
        ledger.mask_bytes += mb;
        bytes += mb;
    }
    if (direction == Direction::Up)
        ledger.uplink_bytes_per_client += bytes;
    else
        ledger.downlink_bytes += bytes;
    ledger.cumulative_bytes += bytes;
    return ledger;
}

std::vector<std::uint8_t> encode_payload(const SparsePayload& payload, unsigned bits_per_param) {
    check_width(bits_per_param);
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 5);
    put_u32(out, payload.round);
    put_u32(out, payload.client_id);
    put_u32(out, static_cast<std::uint32_t>(payload.values.size()));
    for (double v : payload.values) put_value(out, v, bits_per_param);
    put_u32(out, static_cast<std::uint32_t>(payload.biases.size()));
    for (double v : payload.biases) put_value(out, v, bits_per_param);
    return out;
}

SparsePayload decode_payload(const std::vector<std::uint8_t>& bytes, unsigned bits_per_param) {
    check_width(bits_per_param);
    if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 5) != 0)
        throw StructuralError("payload: bad magic");
    std::size_t pos = 5;
    SparsePayload p;
    p.round = get_u32(bytes, pos);
    p.client_id = get_u32(bytes, pos);
    const std::uint32_t k = get_u32(bytes, pos);
    p.values.resize(k);
    for (std::uint32_t i = 0; i < k; ++i) p.values[i] = get_value(bytes, pos, bits_per_param);
    const std::uint32_t nb = get_u32(bytes, pos);
    p.biases.resize(nb);
    for (std::uint32_t i = 0; i < nb; ++i) p.biases[i] = get_value(bytes, pos, bits_per_param);
    if (pos != bytes.size()) throw StructuralError("payload: trailing bytes");
    return p;
}

} // namespace fedmap::codec
