#pragma once

#include <cstdint>
#include <random>

namespace mesu {

// Deterministic seed derivation. Every random decision in the toolkit draws
// from a stream derived from (master seed, purpose tag, index), so that the
// same scenario file always produces byte-identical outputs and independent
// concerns (topology, workload, deployment, ...) never share a stream.

enum class SeedTag : std::uint64_t {
  Topology = 1,
  InitialWorkload = 2,
  StageEvolution = 3,
  InitialDeployment = 4,
  SweepCell = 5,
  Instance = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, SeedTag tag, std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(master ^ (0x2545f4914f6cdd1dULL * static_cast<std::uint64_t>(tag)));
  return splitmix64(h ^ (0x9e3779b97f4a7c15ULL + index));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace mesu
