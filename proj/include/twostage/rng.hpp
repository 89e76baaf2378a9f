#pragma once

#include <cstdint>
#include <random>

namespace twostage {

// SplitMix64 finalizer; used only to derive well-separated sub-seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Sub-seed for a named stream of a master seed. Every randomized stage owns
// one stream id, so results for one unit of work do not depend on which other
// units run or in what order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t s1, std::uint64_t s2) {
    return derive_seed(derive_seed(master, s1), s2);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace twostage
