#pragma once

#include <vector>

#include "bmkn/deform.hpp"
#include "bmkn/motion_coder.hpp"

namespace bmkn {

struct RDPoint {
  CombinationMask mask;
  size_t rate = 0;        // motion payload bytes for the frame
  double distortion = 0;  // normalized RMSE of the quantized prediction
  double j = 0;           // distortion + lambda * rate
};

enum class RDStrategy : uint8_t { FirstP = 0, PerFrame = 1 };

struct RDConfig {
  double lambda = 1e-4;
  RDStrategy strategy = RDStrategy::FirstP;

  void validate() const {
    if (lambda < 0) throw ConfigError("lambda must be nonnegative");
  }
};

/// Everything needed to fit and code one P-frame under a candidate mask.
struct RDContext {
  const Mesh* source = nullptr;  // previously decoded frame
  const Mesh* target = nullptr;  // ground-truth frame being predicted
  const KeyNodeSet* nodes = nullptr;
  const InfluenceMap* infl = nullptr;
  const InfluenceGraph* graph = nullptr;
  SolverConfig solver;
  SegmentationConfig seg;
  MotionContext motion;
};

/// Fits transforms under `mask`, codes the motion payload, and measures the
/// rate in bytes and the distortion of the quantized prediction.
RDPoint evaluate_mask(const CombinationMask& mask, const RDContext& ctx,
                      double lambda);

/// Argmin of j over `points`; ties prefer fewer enabled components, then the
/// ascending mask code.
const RDPoint& select_from_points(const std::vector<RDPoint>& points,
                                  double lambda);

struct MaskSelection {
  CombinationMask mask;
  std::vector<RDPoint> points;  // all 8 legal masks, ascending code order
};

/// Evaluates all 8 legal masks and returns the Lagrangian argmin.
MaskSelection select_mask(const RDContext& ctx, double lambda);

}  // namespace bmkn
