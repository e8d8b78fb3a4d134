#pragma once

#include <cstdint>
#include <random>

namespace lowrank_levy {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer. Used to spread seeds and derive substreams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of substream `index` under `master`. The mapping depends only on the
/// pair, so replicates can be generated in any order.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index,
                                       std::uint64_t tag = 0) noexcept {
    return mix64(mix64(master) ^ mix64(index * 0x2545f4914f6cdd1dULL + tag));
}

inline Engine make_engine(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Engine(seq);
}

inline Engine make_substream(std::uint64_t master, std::uint64_t index, std::uint64_t tag = 0) {
    return make_engine(substream_seed(master, index, tag));
}

// Substream tags, so that the sample, the frequency draws and the rotation of
// one replicate never share a stream.
namespace stream_tag {
inline constexpr std::uint64_t samples = 1;
inline constexpr std::uint64_t frequencies = 2;
inline constexpr std::uint64_t rotation = 3;
inline constexpr std::uint64_t clock_sample = 4;
}  // namespace stream_tag

}  // namespace lowrank_levy
