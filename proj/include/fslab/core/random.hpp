#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fslab {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text)
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Deterministic per-component seed derived from one master seed.
constexpr std::uint64_t fork_seed(std::uint64_t master, std::string_view component)
{
    return mix64(master ^ mix64(fnv1a64(component)));
}

inline Rng make_rng(std::uint64_t master, std::string_view component)
{
    return Rng(fork_seed(master, component));
}

}  // namespace fslab
