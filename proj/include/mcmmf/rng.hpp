#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mcmmf {

// Deterministic random stream used everywhere in the simulator.
//
// Only the raw mt19937_64 engine comes from the standard library; the
// distributions are written out here because std::uniform_real_distribution
// and friends are not guaranteed to produce the same sequence across
// standard library implementations, and byte-identical outputs for a given
// seed are part of the contract.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // Modulo rejection keeps the draw unbiased without floating point.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // First k elements of a random permutation of 0..n-1, returned sorted.
    std::vector<std::uint32_t> sample_sorted(std::uint32_t n, std::uint32_t k);

    // Derives a decorrelated child seed from a base seed and a stream index,
    // so perturbing one consumer's draws never shifts another's.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        auto split = [](std::uint64_t x) {
            x += 0x9e3779b97f4a7c15ULL;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
            return x ^ (x >> 31);
        };
        return split(split(seed) ^ (stream + 0x9e3779b97f4a7c15ULL));
    }

private:
    std::mt19937_64 engine_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

inline std::vector<std::uint32_t> Rng::sample_sorted(std::uint32_t n, std::uint32_t k) {
    std::vector<std::uint32_t> idx(n);
    for (std::uint32_t i = 0; i < n; ++i) idx[i] = i;
    shuffle(idx);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace mcmmf
