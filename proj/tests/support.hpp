#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <memory>

#include "mesu/harness.hpp"

namespace mesu::testing {

struct OwnedScenario {
  std::shared_ptr<const Topology> topology;
  std::shared_ptr<const PathTable> paths;
  PlannerInputs in;
};

// Small randomized instances inside the exact-oracle guard:
// |V| <= 5, T <= 2, |R^1| <= 8, M_max = 2.
inline OwnedScenario make_tiny_scenario(std::uint64_t seed) {
  auto rng = make_rng(derive_seed(seed, SeedTag::Instance));
  int nodes = std::uniform_int_distribution<int>(4, 5)(rng);
  int max_links = (nodes - 1) * (nodes - 2) / 2;
  int links = std::uniform_int_distribution<int>(nodes - 1, std::max(nodes - 1, max_links))(rng);

  OwnedScenario s;
  s.topology = std::make_shared<Topology>(
      generate_topology(nodes, links, derive_seed(seed, SeedTag::Topology)));
  s.paths = std::make_shared<PathTable>(build_path_table(*s.topology));

  PlannerInputs& in = s.in;
  in.topology = s.topology.get();
  in.paths = s.paths.get();
  in.planning_stages = std::uniform_int_distribution<int>(1, 2)(rng);
  in.capacity_per_rpack_bits = 10e9;
  in.max_rpacks = 2;
  in.workload.initial_count = std::uniform_int_distribution<int>(3, 8)(rng);
  in.cost = CostModel{};
  double coverage = std::uniform_real_distribution<double>(30.0, 80.0)(rng);
  in.budget_total = budget_for_coverage(nodes, coverage, in.cost, in.max_rpacks);
  if (std::uniform_int_distribution<int>(0, 1)(rng) == 1)
    in.initial_deployment = sample_initial_deployment(
        *s.topology, 0.5, 1, derive_seed(seed, SeedTag::InitialDeployment));
  in.master_seed = derive_seed(seed, SeedTag::InitialWorkload);
  return s;
}

inline const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> algos = {Algorithm::H, Algorithm::HO, Algorithm::DF,
                                               Algorithm::UF, Algorithm::DO};
  return algos;
}

}  // namespace mesu::testing
