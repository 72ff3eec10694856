#pragma once

#include <cstdint>
#include <random>

namespace hnbr {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent stream keyed by (seed, index); identical regardless of which
/// worker draws it or in what order streams are created.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(mix64(seed)), static_cast<std::uint32_t>(mix64(seed) >> 32),
                    static_cast<std::uint32_t>(mix64(seed ^ mix64(index))),
                    static_cast<std::uint32_t>(mix64(seed ^ mix64(index)) >> 32)};
  return Rng(seq);
}

}  // namespace hnbr
