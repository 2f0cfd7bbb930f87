#include "bmkn/rdopt.hpp"

namespace bmkn {

RDPoint evaluate_mask(const CombinationMask& mask, const RDContext& ctx,
                      double lambda) {
  if (!mask.t_on) throw ConfigError("mask must enable T");

  const FitResult fit =
      fit_transforms(*ctx.source, *ctx.target, *ctx.nodes, mask, ctx.solver,
                     ctx.seg, *ctx.infl, *ctx.graph);
  const CodedMotion coded =
      code_motion(fit.transforms, *ctx.nodes, *ctx.graph, mask, ctx.motion);
  const Mesh predicted =
      deform_mesh(*ctx.source, *ctx.nodes, coded.decoded, *ctx.infl);

  RDPoint point;
  point.mask = mask;
  // mask + mode bytes plus both coded sections; container length prefixes
  // are not part of the motion payload.
  point.rate = 1 + coded.payload_bytes();
  point.distortion = rmse_distortion(predicted, *ctx.target);
  point.j = point.distortion + lambda * double(point.rate);
  return point;
}

const RDPoint& select_from_points(const std::vector<RDPoint>& points,
                                  double lambda) {
  if (points.empty()) throw ConfigError("no RD points to select from");
  const RDPoint* best = &points.front();
  double best_j = best->distortion + lambda * double(best->rate);
  for (const RDPoint& p : points) {
    const double j = p.distortion + lambda * double(p.rate);
    if (j < best_j) {
      best = &p;
      best_j = j;
    } else if (j == best_j && &p != best) {
      const int pc = p.mask.enabled_count(), bc = best->mask.enabled_count();
      if (pc < bc || (pc == bc && p.mask.code_value() < best->mask.code_value())) {
        best = &p;
      }
    }
  }
  return *best;
}

MaskSelection select_mask(const RDContext& ctx, double lambda) {
  MaskSelection sel;
  for (const CombinationMask& mask : CombinationMask::legal_masks()) {
    sel.points.push_back(evaluate_mask(mask, ctx, lambda));
  }
  sel.mask = select_from_points(sel.points, lambda).mask;
  return sel;
}

}  // namespace bmkn
