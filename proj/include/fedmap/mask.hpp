#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedmap/tensor.hpp"

namespace fedmap {

// Per-layer binary masks over weight tensors, flat row-major order. Biases
// are never masked.
class PruneMask {
public:
    PruneMask() = default;

    // All-ones mask matching a model's weight layout.
    static PruneMask ones_like(const Model& m);
    static PruneMask zeros_like(const Model& m);

    std::size_t layer_count() const { return bits_.size(); }
    std::size_t layer_size(std::size_t layer) const { return bits_[layer].size(); }

    bool get(std::size_t layer, std::size_t idx) const { return bits_[layer][idx] != 0; }
    void set(std::size_t layer, std::size_t idx, bool on);

    const std::vector<std::uint8_t>& layer_bits(std::size_t layer) const { return bits_[layer]; }

    // Cached popcount over all layers.
    std::size_t nonzero_count() const { return nonzero_; }

    bool congruent(const PruneMask& other) const;
    bool congruent(const Model& m) const;

    bool operator==(const PruneMask& other) const { return bits_ == other.bits_; }

    // Support order used everywhere: (layer, flat index) ascending.
    template <typename Fn>
    void for_each_set(Fn&& fn) const {
        for (std::size_t l = 0; l < bits_.size(); ++l)
            for (std::size_t i = 0; i < bits_[l].size(); ++i)
                if (bits_[l][i]) fn(l, i);
    }

private:
    std::vector<std::vector<std::uint8_t>> bits_;
    std::size_t nonzero_ = 0;

    friend PruneMask make_mask(std::vector<std::vector<std::uint8_t>> bits);
};

PruneMask make_mask(std::vector<std::vector<std::uint8_t>> bits);

// supp(a) subset of supp(b); shapes must be congruent.
bool is_subset(const PruneMask& a, const PruneMask& b);

// Mask file ("FMSK1"): layer count, per-layer bit counts (32-bit LE), then
// per-layer packed bitmaps, LSB-first within each byte.
void save_mask(const PruneMask& m, const std::string& path);
PruneMask load_mask(const std::string& path);

} // namespace fedmap
