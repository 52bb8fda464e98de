#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gemmed {

// All randomness in the project flows from a single 64-bit master seed.
// Independent streams are derived by hashing a textual stream tag into the
// master seed, so results do not depend on the order in which components
// consume randomness.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
    return splitmix64(master ^ splitmix64(hash_tag(tag)));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
    return splitmix64(derive_seed(master, tag) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t master, std::string_view tag) {
    return std::mt19937_64(derive_seed(master, tag));
}

inline std::mt19937_64 make_rng(std::uint64_t master, std::string_view tag, std::uint64_t index) {
    return std::mt19937_64(derive_seed(master, tag, index));
}

} // namespace gemmed
