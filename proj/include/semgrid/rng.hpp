#pragma once

#include <cstdint>

namespace semgrid {

// SplitMix64 finalizer; full-period mixing of a 64-bit counter.
inline uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based PRNG for a named stream. Draws are a pure function of
/// (stream identity, counter), so results do not depend on the order in
/// which streams are polled — the property the channel layer needs for
/// reproducible per-link attack draws.
class StreamRng {
public:
    StreamRng() = default;
    StreamRng(uint64_t seed, uint64_t stream_a, uint64_t stream_b)
        : base_(mix64(mix64(seed) ^ mix64(stream_a ^ (stream_b << 32) ^ 0xA5A5A5A5A5A5A5A5ULL))) {}

    /// Uniform double in [0, 1) for the given counter value.
    double uniform(uint64_t counter) const {
        const uint64_t z = mix64(base_ ^ mix64(counter));
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }

private:
    uint64_t base_ = 0;
};

}  // namespace semgrid
