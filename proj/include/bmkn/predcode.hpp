#pragma once

#include <array>
#include <optional>
#include <vector>

#include "bmkn/entropy.hpp"
#include "bmkn/keynodes.hpp"

namespace bmkn {

/// Node visit order for spatial prediction. `pred[k]` is the node whose
/// decoded translation predicts `order[k]` (-1 = zero predictor, used only
/// by the very first node of the plan).
struct TraversalPlan {
  std::vector<int> order;
  std::vector<int> pred;
  /// (start node, reference node on head/torso) per later component.
  std::vector<std::pair<int, int>> start_markers;
};

/// Top-down spiral traversal: connected components in body-part order, each
/// grown layer-by-layer from its start node through graph 1-rings, layers
/// sorted clockwise around their x-z centroid. Throws UnlabeledNodes.
TraversalPlan plan_traversal(const KeyNodeSet& nodes,
                             const InfluenceGraph& graph);

struct SpatialCoded {
  BitPayload bits;
  CauchyModel model;
  /// Decoder-reconstructed translations (closed loop), by node index.
  std::vector<Vec3> decoded;
};

/// Differential prediction along the plan: the model is fitted on pseudo
/// differences (raw neighbor deltas), residuals are coded against decoded
/// values. The plan's first node codes its absolute translation.
SpatialCoded spatial_encode(const std::vector<Vec3>& translations,
                            const TraversalPlan& plan, double qstep);

std::vector<Vec3> spatial_decode(const BitPayload& bits,
                                 const CauchyModel& model,
                                 const TraversalPlan& plan);

/// Decoded representative temporal change per body part.
struct PartDelta {
  std::array<Vec3, kBodyPartCount> delta{};
  std::array<uint8_t, kBodyPartCount> present{};
};

struct SpatioTemporalCoded {
  BitPayload delta_bits;  // coded with the previous P-frame's model
  BitPayload resid_bits;  // coded with a freshly fitted model
  CauchyModel resid_model;
  PartDelta part_delta;
  std::vector<Vec3> decoded;
};

/// Per part, the representative change minimizing the summed squared
/// prediction error (mean of t_i - t_prev_i, refined by a 27-candidate
/// search on the quantization grid), coded through `prev_model`; per-node
/// residuals against (t_prev + delta) coded with a fresh model.
/// Throws MissingPreviousModel when prev_model is null.
SpatioTemporalCoded spatiotemporal_encode(
    const std::vector<Vec3>& translations,
    const std::vector<Vec3>& prev_decoded,
    const std::vector<BodyPart>& parts, const CauchyModel* prev_model,
    double qstep);

std::vector<Vec3> spatiotemporal_decode(
    const BitPayload& delta_bits, const BitPayload& resid_bits,
    const CauchyModel* prev_model, const CauchyModel& resid_model,
    const std::vector<Vec3>& prev_decoded,
    const std::vector<BodyPart>& parts);

}  // namespace bmkn
