#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qgw/common.hpp"

namespace qgw {

/// Seeded random source with hand-rolled distributions. std:: distribution
/// objects are implementation-defined, so sampling through the raw engine
/// keeps runs byte-reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(mix(seed)) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Derives an independent stream, e.g. one per trial or per side.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        return mix(seed ^ mix(stream + 1));
    }

    std::uint64_t u64() { return gen_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0ULL - n) % n; // 2^64 mod n
        for (;;) {
            const std::uint64_t r = gen_();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller; second deviate is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    template <class T>
    void shuffle(std::span<T> values) {
        for (idx i = static_cast<idx>(values.size()) - 1; i > 0; --i) {
            const idx j = static_cast<idx>(below(static_cast<std::uint64_t>(i) + 1));
            std::swap(values[i], values[j]);
        }
    }

    /// m distinct indices from [0, n), in draw order (partial Fisher-Yates).
    std::vector<idx> sample_without_replacement(idx n, idx m) {
        std::vector<idx> pool(static_cast<std::size_t>(n));
        for (idx i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
        std::vector<idx> out;
        out.reserve(static_cast<std::size_t>(m));
        for (idx i = 0; i < m; ++i) {
            const idx j = i + static_cast<idx>(below(static_cast<std::uint64_t>(n - i)));
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
            out.push_back(pool[static_cast<std::size_t>(i)]);
        }
        return out;
    }

private:
    std::mt19937_64 gen_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace qgw
