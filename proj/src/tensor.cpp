#include "fedmap/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fedmap/rng.hpp"

namespace fedmap {

WeightTensor::WeightTensor(std::vector<std::size_t> shape_, double fill) : shape(std::move(shape_)) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    values.assign(n, fill);
}

std::size_t Model::weight_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size();
    return n;
}

std::size_t Model::bias_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.bias.size();
    return n;
}

bool Model::congruent(const Model& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (!layers[i].weight.same_shape(other.layers[i].weight)) return false;
        if (layers[i].bias.size() != other.layers[i].bias.size()) return false;
    }
    return true;
}

void Model::check_finite(const std::string& context) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        for (double v : layers[i].weight.values)
            if (!std::isfinite(v))
                throw NumericError(context + ": non-finite weight in layer " + std::to_string(i));
        for (double v : layers[i].bias.values)
            if (!std::isfinite(v))
                throw NumericError(context + ": non-finite bias in layer " + std::to_string(i));
    }
}

Model Model::zeros_like() const {
    Model z = *this;
    for (auto& l : z.layers) {
        std::fill(l.weight.values.begin(), l.weight.values.end(), 0.0);
        std::fill(l.bias.values.begin(), l.bias.values.end(), 0.0);
    }
    return z;
}

LayerValues weight_values(const Model& m) {
    LayerValues v;
    v.reserve(m.layers.size());
    for (const auto& l : m.layers) v.push_back(l.weight.values);
    return v;
}

LayerValues zeros_like_weights(const Model& m) {
    LayerValues v;
    v.reserve(m.layers.size());
    for (const auto& l : m.layers) v.emplace_back(l.weight.size(), 0.0);
    return v;
}

void set_weight_values(Model& m, const LayerValues& v) {
    if (v.size() != m.layers.size()) throw StructuralError("set_weight_values: layer count mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i].size() != m.layers[i].weight.size())
            throw StructuralError("set_weight_values: size mismatch in layer " + std::to_string(i));
        m.layers[i].weight.values = v[i];
    }
}

Model make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
               std::size_t num_classes, std::uint64_t init_seed, bool with_bias) {
    std::vector<std::size_t> dims;
    dims.push_back(input_dim);
    for (auto h : hidden) dims.push_back(h);
    dims.push_back(num_classes);

    rng::Stream stream(init_seed);
    Model m;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer l;
        l.weight = WeightTensor({dims[i + 1], dims[i]});
        double scale = 1.0 / std::sqrt(static_cast<double>(dims[i]));
        for (auto& w : l.weight.values) w = scale * stream.next_normal();
        if (with_bias) l.bias = WeightTensor({dims[i + 1]});
        l.activation = (i + 2 == dims.size()) ? Activation::SoftmaxOutput : Activation::Rectifier;
        m.layers.push_back(std::move(l));
    }
    return m;
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

void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

} // namespace

void save_checkpoint(const Model& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write("FMAP1", 5);
    put_u32(os, static_cast<std::uint32_t>(m.layers.size()));
    for (const auto& l : m.layers) {
        put_u32(os, static_cast<std::uint32_t>(l.out_dim()));
        put_u32(os, static_cast<std::uint32_t>(l.in_dim()));
        put_u32(os, static_cast<std::uint32_t>(l.bias.size()));
    }
    for (const auto& l : m.layers)
        for (double v : l.weight.values) put_f64(os, v);
    for (const auto& l : m.layers)
        for (double v : l.bias.values) put_f64(os, v);
    if (!os) throw IoError("short write to checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, "FMAP1", 5) != 0)
        throw IoError("bad checkpoint magic in " + path);
    std::uint32_t nlayers = get_u32(is);
    Model m;
    m.layers.resize(nlayers);
    for (auto& l : m.layers) {
        std::uint32_t rows = get_u32(is);
        std::uint32_t cols = get_u32(is);
        std::uint32_t nbias = get_u32(is);
        l.weight = WeightTensor({rows, cols});
        if (nbias) l.bias = WeightTensor({nbias});
    }
    for (auto& l : m.layers)
        for (auto& v : l.weight.values) v = get_f64(is);
    for (auto& l : m.layers)
        for (auto& v : l.bias.values) v = get_f64(is);
    if (!is) throw IoError("truncated checkpoint: " + path);
    for (std::size_t i = 0; i < m.layers.size(); ++i)
        m.layers[i].activation =
            (i + 1 == m.layers.size()) ? Activation::SoftmaxOutput : Activation::Rectifier;
    return m;
}

} // namespace fedmap
