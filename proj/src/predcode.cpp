#include "bmkn/predcode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bmkn {

namespace {

std::vector<int> connected_components(const InfluenceGraph& graph,
                                      std::vector<int>& comp_of) {
  const int n = graph.node_count;
  const auto adj = graph.adjacency();
  comp_of.assign(size_t(n), -1);
  std::vector<int> roots;
  for (int start = 0; start < n; ++start) {
    if (comp_of[size_t(start)] >= 0) continue;
    const int c = int(roots.size());
    roots.push_back(start);
    std::vector<int> queue{start};
    comp_of[size_t(start)] = c;
    for (size_t h = 0; h < queue.size(); ++h) {
      for (int nb : adj[size_t(queue[h])]) {
        if (comp_of[size_t(nb)] < 0) {
          comp_of[size_t(nb)] = c;
          queue.push_back(nb);
        }
      }
    }
  }
  return roots;
}

// Clockwise layer order: descending angle about the x-z centroid, ties by
// node index.
void sort_layer_clockwise(std::vector<int>& layer, const KeyNodeSet& nodes) {
  if (layer.size() < 2) return;
  double cx = 0.0, cz = 0.0;
  for (int i : layer) {
    cx += nodes.positions[size_t(i)].x();
    cz += nodes.positions[size_t(i)].z();
  }
  cx /= double(layer.size());
  cz /= double(layer.size());
  std::vector<std::pair<double, int>> keyed;
  keyed.reserve(layer.size());
  for (int i : layer) {
    const double angle = std::atan2(nodes.positions[size_t(i)].z() - cz,
                                    nodes.positions[size_t(i)].x() - cx);
    keyed.emplace_back(-angle, i);
  }
  std::sort(keyed.begin(), keyed.end());
  for (size_t k = 0; k < layer.size(); ++k) layer[k] = keyed[k].second;
}

int max_y_node(const std::vector<int>& members, const KeyNodeSet& nodes) {
  int best = members.front();
  for (int i : members) {
    const double y = nodes.positions[size_t(i)].y();
    const double by = nodes.positions[size_t(best)].y();
    if (y > by || (y == by && i < best)) best = i;
  }
  return best;
}

// Closest (member, reference) pair by Euclidean distance, ties by indices.
std::pair<int, int> closest_pair(const std::vector<int>& members,
                                 const std::vector<int>& refs,
                                 const KeyNodeSet& nodes) {
  int bs = -1, bp = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int s : members) {
    for (int p : refs) {
      const double d2 =
          (nodes.positions[size_t(s)] - nodes.positions[size_t(p)])
              .squaredNorm();
      if (d2 < best || (d2 == best && (s < bs || (s == bs && p < bp)))) {
        best = d2;
        bs = s;
        bp = p;
      }
    }
  }
  return {bs, bp};
}

}  // namespace

TraversalPlan plan_traversal(const KeyNodeSet& nodes,
                             const InfluenceGraph& graph) {
  const int n = int(nodes.size());
  if (nodes.labels.size() != size_t(n)) {
    throw UnlabeledNodes("traversal requires labeled nodes");
  }
  if (graph.node_count != n) {
    throw AlignmentError("graph node count mismatch");
  }

  std::vector<int> comp_of;
  connected_components(graph, comp_of);
  const int ncomp = 1 + (comp_of.empty()
                             ? -1
                             : *std::max_element(comp_of.begin(), comp_of.end()));

  std::vector<std::vector<int>> members(size_t(std::max(ncomp, 0)));
  for (int i = 0; i < n; ++i) members[size_t(comp_of[size_t(i)])].push_back(i);

  // Components follow the body-part ordinal order (by their lowest part),
  // with the lowest node index breaking ties between same-part components.
  std::vector<int> comp_order(members.size());
  std::iota(comp_order.begin(), comp_order.end(), 0);
  auto min_part = [&](int c) {
    int mp = kBodyPartCount;
    for (int i : members[size_t(c)]) {
      mp = std::min(mp, int(nodes.labels[size_t(i)]));
    }
    return mp;
  };
  std::sort(comp_order.begin(), comp_order.end(), [&](int a, int b) {
    const int pa = min_part(a), pb = min_part(b);
    if (pa != pb) return pa < pb;
    return members[size_t(a)].front() < members[size_t(b)].front();
  });

  // Nodes of the reference parts for start-node selection.
  std::vector<int> head_nodes, torso_nodes;
  for (int i = 0; i < n; ++i) {
    if (nodes.labels[size_t(i)] == BodyPart::Head) head_nodes.push_back(i);
    if (nodes.labels[size_t(i)] == BodyPart::Torso) torso_nodes.push_back(i);
  }

  const auto adj = graph.adjacency();
  TraversalPlan plan;
  plan.order.reserve(size_t(n));
  plan.pred.reserve(size_t(n));
  std::vector<uint8_t> traversed(size_t(n), 0);

  for (int c : comp_order) {
    const std::vector<int>& comp = members[size_t(c)];
    const BodyPart part = BodyPart(min_part(c));

    int start = -1, ref = -1;
    if (part == BodyPart::Head) {
      start = max_y_node(comp, nodes);
    } else if (part == BodyPart::LeftUpperArm ||
               part == BodyPart::RightUpperArm || part == BodyPart::Torso) {
      if (!head_nodes.empty()) {
        std::tie(start, ref) = closest_pair(comp, head_nodes, nodes);
      }
    } else if (part == BodyPart::LeftThigh || part == BodyPart::RightThigh) {
      if (!torso_nodes.empty()) {
        std::tie(start, ref) = closest_pair(comp, torso_nodes, nodes);
      }
    }
    // A usable reference must already be traversed and lie outside this
    // component; otherwise anchor on the closest traversed node. Only the
    // very first node of the whole plan codes against the zero predictor.
    if (ref >= 0 && !traversed[size_t(ref)]) {
      start = -1;
      ref = -1;
    }
    if (start < 0) {
      if (!plan.order.empty()) {
        std::tie(start, ref) = closest_pair(comp, plan.order, nodes);
      } else {
        start = max_y_node(comp, nodes);
        ref = -1;
      }
    } else if (ref < 0 && !plan.order.empty()) {
      ref = closest_pair({start}, plan.order, nodes).second;
    }

    if (ref >= 0) plan.start_markers.emplace_back(start, ref);

    // BFS layers from the start node, each sorted clockwise.
    std::vector<int> layer{start};
    traversed[size_t(start)] = 1;
    bool first_of_comp = true;
    while (!layer.empty()) {
      sort_layer_clockwise(layer, nodes);
      for (int i : layer) {
        plan.pred.push_back(first_of_comp ? ref
                                          : plan.order.back());
        plan.order.push_back(i);
        first_of_comp = false;
      }
      std::vector<int> next;
      for (int i : layer) {
        for (int nb : adj[size_t(i)]) {
          if (!traversed[size_t(nb)]) {
            traversed[size_t(nb)] = 1;
            next.push_back(nb);
          }
        }
      }
      std::sort(next.begin(), next.end());
      layer = std::move(next);
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------

SpatialCoded spatial_encode(const std::vector<Vec3>& translations,
                            const TraversalPlan& plan, double qstep) {
  const size_t n = translations.size();
  if (plan.order.size() != n) {
    throw AlignmentError("plan does not cover the translation set");
  }
  SpatialCoded out;
  if (n == 0) {
    out.model = fit_model(std::vector<double>{0.0}, qstep);
    return out;
  }

  // Pseudo-differences over consecutive plan entries (start nodes against
  // their reference node); the plan's first node has no counterpart.
  std::vector<double> pseudo;
  pseudo.reserve(3 * n);
  for (size_t k = 0; k < n; ++k) {
    const int p = plan.pred[k];
    if (p < 0) continue;
    const Vec3 d = translations[size_t(plan.order[k])] - translations[size_t(p)];
    pseudo.push_back(d.x());
    pseudo.push_back(d.y());
    pseudo.push_back(d.z());
  }
  if (pseudo.empty()) {
    // Single-node plan: model the absolute translation instead.
    const Vec3& t = translations[size_t(plan.order[0])];
    pseudo = {t.x(), t.y(), t.z()};
  }
  out.model = fit_model(pseudo, qstep);

  const HuffmanTable table(out.model);
  BitWriter bw;
  out.decoded.assign(n, Vec3::Zero());
  for (size_t k = 0; k < n; ++k) {
    const int i = plan.order[k];
    const int p = plan.pred[k];
    const Vec3 pred = p < 0 ? Vec3::Zero() : out.decoded[size_t(p)];
    Vec3 rec;
    for (int axis = 0; axis < 3; ++axis) {
      const double resid = translations[size_t(i)][axis] - pred[axis];
      const int64_t s = quantize(resid, out.model.qstep);
      table.encode_symbol(bw, s);
      rec[axis] = pred[axis] + dequantize(s, out.model.qstep);
    }
    out.decoded[size_t(i)] = rec;
  }
  out.bits = {bw.bytes(), bw.bit_count()};
  return out;
}

std::vector<Vec3> spatial_decode(const BitPayload& bits,
                                 const CauchyModel& model,
                                 const TraversalPlan& plan) {
  const size_t n = plan.order.size();
  std::vector<Vec3> decoded(n, Vec3::Zero());
  const HuffmanTable table(model);
  BitReader br(bits.bytes, bits.nbits);
  for (size_t k = 0; k < n; ++k) {
    const int i = plan.order[k];
    const int p = plan.pred[k];
    const Vec3 pred = p < 0 ? Vec3::Zero() : decoded[size_t(p)];
    for (int axis = 0; axis < 3; ++axis) {
      decoded[size_t(i)][axis] =
          pred[axis] + dequantize(table.decode_symbol(br), model.qstep);
    }
  }
  return decoded;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> parts_present(const std::vector<BodyPart>& parts) {
  std::array<uint8_t, kBodyPartCount> seen{};
  for (BodyPart p : parts) seen[size_t(p)] = 1;
  std::vector<int> out;
  for (int p = 0; p < kBodyPartCount; ++p) {
    if (seen[size_t(p)]) out.push_back(p);
  }
  return out;
}

}  // namespace

SpatioTemporalCoded spatiotemporal_encode(
    const std::vector<Vec3>& translations,
    const std::vector<Vec3>& prev_decoded,
    const std::vector<BodyPart>& parts, const CauchyModel* prev_model,
    double qstep) {
  if (!prev_model) {
    throw MissingPreviousModel("spatio-temporal coding needs a previous model");
  }
  const size_t n = translations.size();
  if (prev_decoded.size() != n || parts.size() != n) {
    throw AlignmentError("translation/previous/part sizes differ");
  }

  SpatioTemporalCoded out;
  const HuffmanTable prev_table(*prev_model);
  const double pq = prev_model->qstep;
  BitWriter delta_bw;

  for (int p : parts_present(parts)) {
    Vec3 mean = Vec3::Zero();
    int count = 0;
    for (size_t i = 0; i < n; ++i) {
      if (int(parts[i]) != p) continue;
      mean += translations[i] - prev_decoded[i];
      ++count;
    }
    mean /= double(count);

    // Quantization-aware refinement: try the 27 symbol triples around the
    // rounded mean, keep the first that minimizes the prediction error. The
    // rounded mean itself is evaluated first so that ties preserve the
    // all-zero-residual property under uniform motion.
    const int64_t bx = quantize(mean.x(), pq);
    const int64_t by = quantize(mean.y(), pq);
    const int64_t bz = quantize(mean.z(), pq);
    std::array<int64_t, 3> best{bx, by, bz};
    double best_cost = std::numeric_limits<double>::infinity();
    constexpr int kOffsets[3] = {0, -1, 1};
    for (int dx : kOffsets) {
      for (int dy : kOffsets) {
        for (int dz : kOffsets) {
          const Vec3 cand(dequantize(bx + dx, pq), dequantize(by + dy, pq),
                          dequantize(bz + dz, pq));
          double cost = 0.0;
          for (size_t i = 0; i < n; ++i) {
            if (int(parts[i]) != p) continue;
            cost += (prev_decoded[i] + cand - translations[i]).squaredNorm();
          }
          if (cost < best_cost) {
            best_cost = cost;
            best = {bx + dx, by + dy, bz + dz};
          }
        }
      }
    }
    for (int axis = 0; axis < 3; ++axis) {
      prev_table.encode_symbol(delta_bw, best[size_t(axis)]);
      out.part_delta.delta[size_t(p)][axis] = dequantize(best[size_t(axis)], pq);
    }
    out.part_delta.present[size_t(p)] = 1;
  }
  out.delta_bits = {delta_bw.bytes(), delta_bw.bit_count()};

  // Per-node residuals against the part-level prediction, in index order.
  std::vector<double> resid;
  resid.reserve(3 * n);
  for (size_t i = 0; i < n; ++i) {
    const Vec3 e = translations[i] - prev_decoded[i] -
                   out.part_delta.delta[size_t(parts[i])];
    resid.push_back(e.x());
    resid.push_back(e.y());
    resid.push_back(e.z());
  }
  if (resid.empty()) resid.push_back(0.0);
  out.resid_model = fit_model(resid, qstep);

  const HuffmanTable resid_table(out.resid_model);
  BitWriter resid_bw;
  out.decoded.assign(n, Vec3::Zero());
  for (size_t i = 0; i < n; ++i) {
    const Vec3 pred = prev_decoded[i] + out.part_delta.delta[size_t(parts[i])];
    for (int axis = 0; axis < 3; ++axis) {
      const int64_t s =
          quantize(translations[i][axis] - pred[axis], out.resid_model.qstep);
      resid_table.encode_symbol(resid_bw, s);
      out.decoded[i][axis] = pred[axis] + dequantize(s, out.resid_model.qstep);
    }
  }
  out.resid_bits = {resid_bw.bytes(), resid_bw.bit_count()};
  return out;
}

std::vector<Vec3> spatiotemporal_decode(
    const BitPayload& delta_bits, const BitPayload& resid_bits,
    const CauchyModel* prev_model, const CauchyModel& resid_model,
    const std::vector<Vec3>& prev_decoded,
    const std::vector<BodyPart>& parts) {
  if (!prev_model) {
    throw MissingPreviousModel("spatio-temporal decode needs a previous model");
  }
  if (prev_decoded.size() != parts.size()) {
    throw AlignmentError("previous/part sizes differ");
  }
  const size_t n = prev_decoded.size();

  PartDelta pd;
  const HuffmanTable prev_table(*prev_model);
  BitReader delta_br(delta_bits.bytes, delta_bits.nbits);
  for (int p : parts_present(parts)) {
    for (int axis = 0; axis < 3; ++axis) {
      pd.delta[size_t(p)][axis] =
          dequantize(prev_table.decode_symbol(delta_br), prev_model->qstep);
    }
    pd.present[size_t(p)] = 1;
  }

  const HuffmanTable resid_table(resid_model);
  BitReader resid_br(resid_bits.bytes, resid_bits.nbits);
  std::vector<Vec3> decoded(n, Vec3::Zero());
  for (size_t i = 0; i < n; ++i) {
    const Vec3 pred = prev_decoded[i] + pd.delta[size_t(parts[i])];
    for (int axis = 0; axis < 3; ++axis) {
      decoded[i][axis] = pred[axis] + dequantize(resid_table.decode_symbol(resid_br),
                                                 resid_model.qstep);
    }
  }
  return decoded;
}

}  // namespace bmkn
