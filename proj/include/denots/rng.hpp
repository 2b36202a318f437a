#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace denots {

// FNV-1a, used for config hashes, file checksums and substream derivation.
constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64_bytes(const void* data, std::size_t n,
                                   std::uint64_t h = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// All randomness in the project flows from one root seed through named
// substreams, so reruns of one stage never perturb another.
inline std::mt19937_64 substream(std::uint64_t root, std::string_view name,
                                 std::uint64_t index = 0) {
    std::uint64_t s = splitmix64(root ^ fnv1a64(name));
    s = splitmix64(s ^ (0x632be59bd9b4e019ull * (index + 1)));
    return std::mt19937_64(s);
}

} // namespace denots
