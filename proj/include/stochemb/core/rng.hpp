#pragma once

#include <cstdint>
#include <random>

namespace stochemb {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of the independent stream `index` under master seed `seed`.
///
/// Streams depend only on (seed, index), so results never depend on how work is
/// scheduled across threads.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_stream(std::uint64_t seed, std::uint64_t index) {
    return Engine(stream_seed(seed, index));
}

// Tags separating stream families drawn from one master seed.
inline constexpr std::uint64_t kBootstrapStreamTag = 0xb007'5742'0000'0000ULL;

}  // namespace stochemb
