#ifndef METRICNET_RANDOM_HPP
#define METRICNET_RANDOM_HPP

#include <cstdint>
#include <random>

namespace metricnet {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a master seed and a stream index,
/// so ensemble results do not depend on worker scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t index) {
    return Rng(derive_seed(master, index));
}

} // namespace metricnet

#endif
