#ifndef TGAN_RNG_HPP
#define TGAN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace tgan {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_str(const std::string& s) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic RNG. mt19937_64 output is pinned by the standard, and all
// conversions to floating point are done explicitly here, so sequences are
// bit-identical across platforms and library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : base_(seed), eng_(splitmix64(seed)) {}

    // Independent child stream, stable under call order.
    Rng derive(std::uint64_t salt) const {
        return Rng(splitmix64(base_ ^ splitmix64(salt ^ 0x5851f42d4c957f2dULL)));
    }
    Rng derive(const std::string& tag) const { return derive(hash_str(tag)); }

    std::uint64_t next_u64() { return eng_(); }

    double uniform01() {
        // 53 random bits -> [0,1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller with a cached second deviate.
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_cached_) {
            has_cached_ = false;
            return mean + stddev * cached_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 1e-300) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return mean + stddev * r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer in [0, n). n must be >= 1.
    std::uint64_t uniform_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n)) % n;
    }

    int uniform_int(int lo, int hi) { // inclusive bounds
        return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Index drawn from unnormalized weights.
    template <class Container>
    std::size_t categorical(const Container& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform01() * total;
        double acc = 0.0;
        std::size_t i = 0;
        for (double w : weights) {
            acc += w;
            if (u < acc) return i;
            ++i;
        }
        return weights.size() - 1;
    }

private:
    std::uint64_t base_;
    std::mt19937_64 eng_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace tgan

#endif
