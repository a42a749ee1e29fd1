#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

namespace tinydet {

namespace detail {

inline uint64_t splitmix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t hash_label(std::string_view label) {
    // FNV-1a, then one splitmix round to spread low entropy labels.
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

} // namespace detail

// Deterministic generator with named/indexed substreams. All randomness in
// a run flows from one root seed; every consumer derives its own stream so
// adding a consumer does not shift the others. Uniform values are built
// from raw engine words, not <random> distributions, so output is
// identical across standard libraries.
class SplitRng {
public:
    explicit SplitRng(uint64_t seed) : engine_(detail::splitmix64(seed)), seed_(seed) {}

    SplitRng split(std::string_view label) const {
        return SplitRng(seed_ ^ detail::hash_label(label));
    }

    SplitRng split(uint64_t index) const {
        return SplitRng(detail::splitmix64(seed_ + 0x9e3779b97f4a7c15ULL * (index + 1)));
    }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1): 53 mantissa bits of one engine word.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [0, n). Modulo bias is irrelevant here; the
    // contract is determinism, not statistical perfection.
    uint64_t uniform_index(uint64_t n) {
        if (n == 0)
            throw std::invalid_argument("uniform_index: n must be positive");
        return engine_() % n;
    }

    bool coin() { return (engine_() & 1ULL) != 0; }

private:
    std::mt19937_64 engine_;
    uint64_t seed_;
};

} // namespace tinydet
