#include "bmkn/keynodes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "bmkn/spatial.hpp"

namespace bmkn {

void KeyNodeSet::assign_labels(const Mesh& mesh, const SegmentationConfig& seg) {
  labels.assign(positions.size(), BodyPart::Torso);
  types.assign(positions.size(), NodeType::Rigid);
  if (!mesh.labels || seg.mode == SegMode::Off) return;
  const KdTree tree(mesh.vertices);
  for (size_t j = 0; j < positions.size(); ++j) {
    const int nearest = tree.nearest(positions[j]).first;
    labels[j] = (*mesh.labels)[size_t(nearest)];
    types[j] = seg.affine_parts.count(labels[j]) ? NodeType::Affine
                                                 : NodeType::Rigid;
  }
}

void KeyNodeSet::check_aligned() const {
  if (labels.size() != positions.size() || types.size() != positions.size()) {
    throw AlignmentError("key node labels/types not aligned with positions");
  }
}

std::vector<std::vector<int>> InfluenceGraph::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<size_t>(node_count));
  for (const auto& [i, j] : edges) {
    adj[size_t(i)].push_back(j);
    adj[size_t(j)].push_back(i);
  }
  return adj;
}

InfluenceGraph build_influence_graph(const InfluenceMap& infl, int node_count) {
  InfluenceGraph g;
  g.node_count = node_count;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> distinct;
  for (const auto& row : infl.rows) {
    distinct.clear();
    for (const auto& e : row) distinct.push_back(e.node);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    for (size_t a = 0; a < distinct.size(); ++a) {
      for (size_t b = a + 1; b < distinct.size(); ++b) {
        edges.emplace_back(distinct[a], distinct[b]);
      }
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  return g;
}

KeyNodeSet init_nodes(const Mesh& mesh, int target_count, uint64_t seed,
                      const SegmentationConfig& seg) {
  const size_t n = mesh.vertex_count();
  if (target_count < 1) throw ConfigError("target_count must be >= 1");
  if (size_t(target_count) > n) {
    throw TooFewVertices("cannot sample " + std::to_string(target_count) +
                         " nodes from " + std::to_string(n) + " vertices");
  }

  std::vector<int> chosen;
  chosen.reserve(size_t(target_count));
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  int current = int(seed % n);
  chosen.push_back(current);
  while (int(chosen.size()) < target_count) {
    int best = -1;
    double best_d2 = -1.0;
    for (size_t i = 0; i < n; ++i) {
      const double d2 =
          (mesh.vertices[i] - mesh.vertices[size_t(current)]).squaredNorm();
      if (d2 < dist2[i]) dist2[i] = d2;
      if (dist2[i] > best_d2) {
        best_d2 = dist2[i];
        best = int(i);
      }
    }
    chosen.push_back(best);
    current = best;
  }

  KeyNodeSet nodes;
  nodes.positions.reserve(chosen.size());
  for (int idx : chosen) nodes.positions.push_back(mesh.vertices[size_t(idx)]);
  nodes.assign_labels(mesh, seg);
  return nodes;
}

namespace {

// Vertices a node controls with aggregate row weight > 0.01.
std::vector<std::vector<int>> influenced_vertices(const InfluenceMap& infl,
                                                  int node_count) {
  std::vector<std::vector<int>> verts(static_cast<size_t>(node_count));
  std::map<int, double> wsum;
  for (size_t i = 0; i < infl.rows.size(); ++i) {
    wsum.clear();
    for (const auto& e : infl.rows[i]) wsum[e.node] += e.weight;
    for (const auto& [node, w] : wsum) {
      if (w > 0.01) verts[size_t(node)].push_back(int(i));
    }
  }
  return verts;
}

}  // namespace

std::vector<double> per_node_errors(const InfluenceMap& infl, int node_count,
                                    const std::vector<double>& per_vertex_error) {
  const auto verts = influenced_vertices(infl, node_count);
  std::vector<double> err(size_t(node_count), 0.0);
  for (int j = 0; j < node_count; ++j) {
    if (verts[size_t(j)].empty()) continue;
    double sum = 0.0;
    for (int v : verts[size_t(j)]) sum += per_vertex_error[size_t(v)];
    err[size_t(j)] = sum / double(verts[size_t(j)].size());
  }
  return err;
}

KeyNodeSet prune_nodes(const KeyNodeSet& nodes, const InfluenceMap& infl,
                       const std::vector<double>& per_node_error, int batch) {
  nodes.check_aligned();
  if (per_node_error.size() != nodes.size()) {
    throw AlignmentError("per-node errors not aligned with node set");
  }
  const int n = int(nodes.size());
  if (batch <= 0 || n == 0) return nodes;

  const auto verts = influenced_vertices(infl, n);
  std::vector<int> order(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) order[size_t(j)] = j;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (per_node_error[size_t(a)] != per_node_error[size_t(b)]) {
      return per_node_error[size_t(a)] < per_node_error[size_t(b)];
    }
    return a < b;
  });

  std::vector<uint8_t> claimed(infl.rows.size(), 0);
  std::vector<uint8_t> removed(size_t(n), 0);
  int taken = 0;
  for (int j : order) {
    if (taken == batch) break;
    bool conflict = false;
    for (int v : verts[size_t(j)]) {
      if (claimed[size_t(v)]) {
        conflict = true;
        break;
      }
    }
    if (conflict) continue;
    for (int v : verts[size_t(j)]) claimed[size_t(v)] = 1;
    removed[size_t(j)] = 1;
    ++taken;
  }

  KeyNodeSet out;
  for (int j = 0; j < n; ++j) {
    if (removed[size_t(j)]) continue;
    out.positions.push_back(nodes.positions[size_t(j)]);
    out.labels.push_back(nodes.labels[size_t(j)]);
    out.types.push_back(nodes.types[size_t(j)]);
  }
  return out;
}

KeyNodeSet insert_nodes(const KeyNodeSet& nodes, const Mesh& mesh,
                        const std::vector<double>& per_vertex_error,
                        int deficit, double min_dist,
                        const SegmentationConfig& seg) {
  if (deficit < 1) throw ConfigError("deficit must be >= 1");
  if (per_vertex_error.size() != mesh.vertex_count()) {
    throw AlignmentError("per-vertex errors not aligned with mesh");
  }
  std::vector<int> order(mesh.vertex_count());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (per_vertex_error[size_t(a)] != per_vertex_error[size_t(b)]) {
      return per_vertex_error[size_t(a)] > per_vertex_error[size_t(b)];
    }
    return a < b;
  });

  KeyNodeSet out = nodes;
  const double min_d2 = min_dist * min_dist;
  int added = 0;
  for (int v : order) {
    if (added == deficit) break;
    const Vec3& p = mesh.vertices[size_t(v)];
    bool near = false;
    for (const Vec3& q : out.positions) {
      if ((p - q).squaredNorm() < min_d2) {
        near = true;
        break;
      }
    }
    if (near) continue;
    out.positions.push_back(p);
    ++added;
  }
  out.assign_labels(mesh, seg);
  return out;
}

double default_min_insert_dist(const KeyNodeSet& nodes) {
  const size_t n = nodes.positions.size();
  if (n < 2) return 0.0;
  std::vector<double> nn(n, std::numeric_limits<double>::infinity());
  for (size_t a = 0; a < n; ++a) {
    for (size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      nn[a] = std::min(nn[a],
                       (nodes.positions[a] - nodes.positions[b]).squaredNorm());
    }
  }
  std::sort(nn.begin(), nn.end());
  const double med2 = 0.5 * (nn[(n - 1) / 2] + nn[n / 2]);
  return 2.0 * std::sqrt(med2);
}

}  // namespace bmkn
