#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace maeq {

using Engine = std::mt19937_64;

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Sub-seed for stream `index` of `master`. Distinct (master, index) pairs
/// give statistically independent engines; the mapping never changes.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b) noexcept {
    return derive_seed(derive_seed(master, a), b);
}

/// 64-bit FNV-1a; stable across platforms, used to key seeds by name.
std::uint64_t stable_hash(std::string_view s) noexcept;

Engine make_engine(std::uint64_t seed);

}  // namespace maeq
