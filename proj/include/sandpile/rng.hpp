#pragma once

#include <cstdint>

namespace sandpile {

// SplitMix64 finalizer (Vigna). Bijective on 64-bit words.
inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 stream. Fast, passes BigCrush, one word of state; plenty for
// Monte Carlo duty here and trivially seedable from a counter.
class SplitMix64 {
  public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() { return mix64(state_ += kGolden); }

    // Unbiased draw in [0, n), n >= 1. Lemire's multiply-shift with
    // rejection, so the result is exactly uniform.
    uint64_t next_below(uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
        auto lo = static_cast<uint64_t>(m);
        if (lo < n) {
            const uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next()) * n;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  private:
    uint64_t state_;
};

// Counter-based substream derivation: stream_id indexes decorrelated
// child seeds of a master seed. Replicas seeded this way are reproducible
// and independent of scheduling.
inline uint64_t derive_seed(uint64_t master, uint64_t stream_id) {
    return mix64(master + kGolden * (stream_id + 1));
}

} // namespace sandpile
