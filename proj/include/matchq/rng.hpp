#pragma once

#include <cstdint>
#include <random>

namespace matchq {

using RngSeed = std::uint64_t;
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive decorrelated child seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of stream `index` under `parent`. Streams for distinct indices are
/// independent for practical purposes and do not depend on evaluation order.
constexpr RngSeed derive_seed(RngSeed parent, std::uint64_t index) noexcept {
    return mix64(mix64(parent) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

constexpr RngSeed derive_seed(RngSeed parent, std::uint64_t a, std::uint64_t b) noexcept {
    return derive_seed(derive_seed(parent, a), b);
}

inline Rng make_rng(RngSeed seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Rng(seq);
}

}  // namespace matchq
