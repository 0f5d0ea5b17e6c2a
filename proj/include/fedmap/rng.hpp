#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fedmap::rng {

// All randomness in an experiment flows from one 64-bit seed through named
// sub-streams, so adding a new consumer never perturbs existing streams.

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Seed for the named sub-stream of an experiment seed.
inline std::uint64_t derive(std::uint64_t seed, std::string_view stream) {
    return splitmix64(seed ^ fnv1a64(stream));
}

// Seed for a client's within-round data shuffle.
inline std::uint64_t shuffle_seed(std::uint64_t experiment_seed, std::uint64_t client_id,
                                  std::uint64_t round) {
    return experiment_seed ^ client_id ^ round;
}

// Engine wrapper: mt19937_64 bits plus hand-rolled value transforms. The
// standard distributions are implementation-defined, these are not.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Box-Muller; caches the second variate.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Marsaglia-Tsang, with the alpha<1 boost.
    double next_gamma(double alpha) {
        if (alpha < 1.0) {
            double u = next_unit();
            if (u < 1e-300) u = 1e-300;
            return next_gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = next_normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = next_unit();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u < 1e-300) u = 1e-300;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    std::vector<double> next_dirichlet(double beta, std::size_t k) {
        std::vector<double> g(k);
        double sum = 0.0;
        for (auto& v : g) {
            v = next_gamma(beta);
            sum += v;
        }
        if (sum <= 0.0) sum = 1.0;
        for (auto& v : g) v /= sum;
        return g;
    }

    // Fisher-Yates; identical permutation for identical seeds.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_u64() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace fedmap::rng
