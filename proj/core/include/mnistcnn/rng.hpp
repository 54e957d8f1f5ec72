#pragma once

#include <cstdint>
#include <random>

namespace mcnn {

// splitmix64 finalizer; used to mix seed components into stream seeds
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic sub-stream seed from a base seed and up to three indices.
/// Augmentation draws depend only on (seed, epoch, sample), never on schedule.
inline uint64_t derive_seed(uint64_t base, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = mix64(base);
    s = mix64(s ^ a);
    s = mix64(s ^ b);
    s = mix64(s ^ c);
    return s;
}

using Rng = std::mt19937_64;

inline Rng make_rng(uint64_t base, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
    return Rng(derive_seed(base, a, b, c));
}

}  // namespace mcnn
