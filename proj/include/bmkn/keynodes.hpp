#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bmkn/mesh.hpp"

namespace bmkn {

enum class NodeType : uint8_t { Rigid = 0, Affine = 1 };

/// Sparse control nodes. Each node inherits the segmentation label of its
/// nearest mesh vertex; a node is Affine iff its label is one of the
/// configured affine parts.
struct KeyNodeSet {
  std::vector<Vec3> positions;
  std::vector<BodyPart> labels;
  std::vector<NodeType> types;

  size_t size() const { return positions.size(); }

  /// Recomputes labels from the nearest vertex of `mesh` (when labeled) and
  /// types from `affine_parts`. Unlabeled meshes get Torso labels and all
  /// nodes stay rigid.
  void assign_labels(const Mesh& mesh, const SegmentationConfig& seg);

  void check_aligned() const;
};

/// Per-vertex controlling nodes with normalized inverse-square-distance
/// weights. Rows hold exactly Q entries; when fewer than Q valid nodes exist
/// the closest one is replicated, so entries may repeat a node index.
struct InfluenceMap {
  struct Entry {
    int node;
    double weight;
  };
  int q = 4;
  std::vector<std::vector<Entry>> rows;
};

/// Node adjacency induced by joint influence: an edge (i, j) exists iff some
/// vertex's influence row contains both nodes.
struct InfluenceGraph {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;  // i < j, sorted, unique

  std::vector<std::vector<int>> adjacency() const;
};

InfluenceGraph build_influence_graph(const InfluenceMap& infl, int node_count);

/// Farthest-point sampling of vertex positions; the seed picks the first
/// vertex. Throws TooFewVertices when target_count > vertex count.
KeyNodeSet init_nodes(const Mesh& mesh, int target_count, uint64_t seed,
                      const SegmentationConfig& seg);

/// Removes up to `batch` lowest-error nodes, never removing two nodes that
/// both influence some vertex with weight > 0.01. Ties break on (error,
/// node index). May remove fewer than `batch`.
KeyNodeSet prune_nodes(const KeyNodeSet& nodes, const InfluenceMap& infl,
                       const std::vector<double>& per_node_error, int batch);

/// Mean per-vertex error over the vertices a node influences with weight
/// > 0.01 (0 when it influences none).
std::vector<double> per_node_errors(const InfluenceMap& infl, int node_count,
                                    const std::vector<double>& per_vertex_error);

/// Adds up to `deficit` nodes at the highest-error vertices, skipping
/// candidates within `min_dist` of any existing or newly added node.
KeyNodeSet insert_nodes(const KeyNodeSet& nodes, const Mesh& mesh,
                        const std::vector<double>& per_vertex_error,
                        int deficit, double min_dist,
                        const SegmentationConfig& seg);

/// 2x the median nearest-neighbor spacing among the nodes (insertion
/// distance threshold). 0 for fewer than 2 nodes.
double default_min_insert_dist(const KeyNodeSet& nodes);

}  // namespace bmkn
