#pragma once

#include <cstdint>
#include <string_view>

namespace regen {

inline constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                       std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable per-stage seed: the same (seed, stage) always yields the same value.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) {
    return splitmix64(fnv1a64(stage, splitmix64(seed)));
}

}  // namespace regen
