#include "fedmap/mask.hpp"

#include <cstring>
#include <fstream>
#include <numeric>

namespace fedmap {

PruneMask PruneMask::ones_like(const Model& m) {
    std::vector<std::vector<std::uint8_t>> bits;
    bits.reserve(m.layers.size());
    for (const auto& l : m.layers) bits.emplace_back(l.weight.size(), std::uint8_t{1});
    return make_mask(std::move(bits));
}

PruneMask PruneMask::zeros_like(const Model& m) {
    std::vector<std::vector<std::uint8_t>> bits;
    bits.reserve(m.layers.size());
    for (const auto& l : m.layers) bits.emplace_back(l.weight.size(), std::uint8_t{0});
    return make_mask(std::move(bits));
}

void PruneMask::set(std::size_t layer, std::size_t idx, bool on) {
    std::uint8_t& b = bits_[layer][idx];
    if (b && !on) --nonzero_;
    if (!b && on) ++nonzero_;
    b = on ? 1 : 0;
}

bool PruneMask::congruent(const PruneMask& other) const {
    if (bits_.size() != other.bits_.size()) return false;
    for (std::size_t l = 0; l < bits_.size(); ++l)
        if (bits_[l].size() != other.bits_[l].size()) return false;
    return true;
}

bool PruneMask::congruent(const Model& m) const {
    if (bits_.size() != m.layers.size()) return false;
    for (std::size_t l = 0; l < bits_.size(); ++l)
        if (bits_[l].size() != m.layers[l].weight.size()) return false;
    return true;
}

PruneMask make_mask(std::vector<std::vector<std::uint8_t>> bits) {
    PruneMask m;
    m.bits_ = std::move(bits);
    m.nonzero_ = 0;
    for (const auto& layer : m.bits_)
        for (auto b : layer) m.nonzero_ += b ? 1 : 0;
    return m;
}

bool is_subset(const PruneMask& a, const PruneMask& b) {
    if (!a.congruent(b)) throw StructuralError("is_subset: mask shapes differ");
    for (std::size_t l = 0; l < a.layer_count(); ++l) {
        const auto& la = a.layer_bits(l);
        const auto& lb = b.layer_bits(l);
        for (std::size_t i = 0; i < la.size(); ++i)
            if (la[i] && !lb[i]) return false;
    }
    return true;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void save_mask(const PruneMask& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open mask file for writing: " + path);
    os.write("FMSK1", 5);
    put_u32(os, static_cast<std::uint32_t>(m.layer_count()));
    for (std::size_t l = 0; l < m.layer_count(); ++l)
        put_u32(os, static_cast<std::uint32_t>(m.layer_size(l)));
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        const auto& bits = m.layer_bits(l);
        std::vector<unsigned char> packed((bits.size() + 7) / 8, 0);
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (bits[i]) packed[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
        os.write(reinterpret_cast<const char*>(packed.data()),
                 static_cast<std::streamsize>(packed.size()));
    }
    if (!os) throw IoError("short write to mask file: " + path);
}

PruneMask load_mask(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open mask file: " + path);
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, "FMSK1", 5) != 0) throw IoError("bad mask magic in " + path);
    std::uint32_t nlayers = get_u32(is);
    std::vector<std::uint32_t> sizes(nlayers);
    for (auto& s : sizes) s = get_u32(is);
    std::vector<std::vector<std::uint8_t>> bits(nlayers);
    for (std::uint32_t l = 0; l < nlayers; ++l) {
        std::vector<unsigned char> packed((sizes[l] + 7) / 8);
        is.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
        bits[l].resize(sizes[l]);
        for (std::uint32_t i = 0; i < sizes[l]; ++i)
            bits[l][i] = (packed[i / 8] >> (i % 8)) & 1u;
    }
    if (!is) throw IoError("truncated mask file: " + path);
    return make_mask(std::move(bits));
}

} // namespace fedmap
