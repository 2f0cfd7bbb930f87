#pragma once

#include "bmkn/deform.hpp"
#include "bmkn/keynodes.hpp"

namespace bmkn {

struct GeneratorConfig {
  int target_count = 24;
  /// Initial sampling density relative to target_count.
  double init_factor = 2.0;
  int max_rounds = 20;
  int prune_batch = 8;
  uint64_t seed = 1;
  int q = 4;
  /// Mask used while refining nodes; the full model keeps pruning decisions
  /// independent of the later RD mask choice.
  CombinationMask fit_mask = CombinationMask::full();
  SolverConfig solver;
  SegmentationConfig seg;
};

/// Key-node generation on the GoF's key P-frame pair: repeatedly fit node
/// transforms, score nodes by influence-weighted vertex error, and prune or
/// insert toward the target count. Refits once more after every set change,
/// so the returned set has converged at the target size. Deterministic.
KeyNodeSet generate(const Mesh& source, const Mesh& target,
                    const GeneratorConfig& cfg);

}  // namespace bmkn
