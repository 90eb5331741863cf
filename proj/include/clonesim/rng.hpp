#pragma once

#include <cstdint>
#include <random>

namespace clonesim {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent stream for shot `counter` of a run seeded with `master`.
/// Depends only on (master, counter), so results do not depend on how shots
/// are distributed over threads.
inline Rng stream_rng(std::uint64_t master, std::uint64_t counter) {
  return Rng(mix64(mix64(master) ^ mix64(counter + 0x632be59bd9b4e019ULL)));
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace clonesim
