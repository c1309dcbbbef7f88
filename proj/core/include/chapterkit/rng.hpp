#pragma once

#include <cstdint>
#include <vector>

namespace chapterkit {

// splitmix64: the documented generator behind every seeded choice in this
// library. Chosen over std::mt19937 + std::uniform_int_distribution because
// the standard distributions are implementation-defined; this sequence is
// bit-identical on every platform.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). Plain modulo; the bias is ~n/2^64, irrelevant at the
    // corpus sizes this library handles.
    std::uint64_t bounded(std::uint64_t n) { return next() % n; }

    // Uniform double in [0, 1), 53 bits of entropy.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// In-place Fisher-Yates shuffle driven by SplitMix64.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.bounded(i));
        using std::swap;
        swap(v[i - 1], v[j]);
    }
}

// FNV-1a 64-bit hash. Used for trigram hashing and for deriving per-label
// RNG streams.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace chapterkit
