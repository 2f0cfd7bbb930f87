#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "bmkn/affine.hpp"
#include "bmkn/keynodes.hpp"
#include "bmkn/mesh.hpp"

namespace bmkn {

/// Per-node decomposed transforms aligned with a KeyNodeSet. Rigid nodes
/// always act under the RT mask; affine nodes under `affine_mask`.
struct NodeTransforms {
  std::vector<TransformParams> params;
  std::vector<NodeType> types;
  CombinationMask affine_mask = CombinationMask::full();

  static NodeTransforms identity(const KeyNodeSet& nodes,
                                 const CombinationMask& affine_mask);

  CombinationMask mask_for(size_t j) const {
    return types[j] == NodeType::Rigid ? CombinationMask::rigid() : affine_mask;
  }
  /// compose(mask_params(params[j], mask_for(j)))
  Mat3 effective_matrix(size_t j) const;
};

struct SolverConfig {
  double alpha_reg = 1.0;
  double alpha_orth = 0.1;
  int max_outer_iters = 10;
  int max_inner_iters = 50;
  double convergence_tol = 1e-6;
  bool seg_corr_enabled = true;

  void validate() const;
};

/// Q nearest valid nodes per vertex with normalized 1/d^2 weights. Valid
/// means same segmentation label when filtering applies; manual mode errors
/// on parts with no nodes, auto mode falls back to the unfiltered Q nearest.
InfluenceMap build_influence_map(const Mesh& mesh, const KeyNodeSet& nodes,
                                 const SegmentationConfig& seg, int q);

/// x'_i = sum_j w_j [A_j (x_i - n_j) + t_j + n_j] over the vertex's row.
Mesh deform_mesh(const Mesh& mesh, const KeyNodeSet& nodes,
                 const NodeTransforms& transforms, const InfluenceMap& infl);

/// Sum over affine nodes of the six squared column terms that vanish on
/// orthonormal matrices.
double orthogonality_loss(const NodeTransforms& transforms);

struct Correspondence {
  Vec3 point = Vec3::Zero();
  bool accepted = false;
};

/// Sum of squared distances over accepted correspondences.
double data_loss(const Mesh& deformed,
                 const std::vector<Correspondence>& corr);

/// Smoothness term: for every directed influence-graph edge (j, k),
/// || A_j (n_k - n_j) + n_j + t_j - (n_k + t_k) ||^2.
double reg_loss(const KeyNodeSet& nodes, const NodeTransforms& transforms,
                const InfluenceGraph& graph);

/// Per-part rigid offsets: target segment bounding-box centroid minus source
/// segment bounding-box centroid; zero for parts absent from either mesh.
std::array<Vec3, kBodyPartCount> seg_guided_prealign(const Mesh& source,
                                                     const Mesh& target);

/// Nearest-neighbor correspondences from `deformed` vertices (optionally
/// shifted by per-part offsets before the search) into the target vertex
/// set, with distances above 3x the median rejected.
std::vector<Correspondence> estimate_correspondences(
    const Mesh& deformed, const Mesh& target,
    const std::array<Vec3, kBodyPartCount>* prealign_offsets);

/// Differentiable total objective at fixed correspondences:
/// L_data + alpha_reg * L_reg + alpha_orth * L_orth, over the parameters the
/// per-node masks enable. Disabled components are excluded from the packed
/// vector entirely.
class FitObjective {
 public:
  FitObjective(const Mesh& source, const KeyNodeSet& nodes,
               const InfluenceMap& infl, const InfluenceGraph& graph,
               std::vector<Correspondence> corr,
               const CombinationMask& affine_mask, double alpha_reg,
               double alpha_orth);

  int param_count() const { return int(slots_.size()); }
  Eigen::VectorXd pack(const NodeTransforms& t) const;
  NodeTransforms unpack(const Eigen::VectorXd& x) const;

  double loss(const NodeTransforms& t) const;
  /// Analytic gradient with respect to the packed parameter vector.
  double loss_and_gradient(const NodeTransforms& t,
                           Eigen::VectorXd& grad) const;

  const std::vector<Correspondence>& correspondences() const { return corr_; }

 private:
  // slot ids: 0-2 euler, 3-5 translation, 6-8 scale residual, 9-11 shear
  struct Slot {
    int node;
    int comp;
  };

  double evaluate(const NodeTransforms& t, Eigen::VectorXd* grad) const;

  const Mesh& source_;
  const KeyNodeSet& nodes_;
  const InfluenceMap& infl_;
  const InfluenceGraph& graph_;
  std::vector<Correspondence> corr_;
  CombinationMask affine_mask_;
  double alpha_reg_;
  double alpha_orth_;
  std::vector<Slot> slots_;
};

struct FitResult {
  NodeTransforms transforms;
  double final_loss = 0.0;
  /// End-of-round objective per outer iteration; non-increasing.
  std::vector<double> loss_history;
  /// Distance from each final deformed vertex to its nearest target vertex.
  std::vector<double> per_vertex_error;
  double data_loss = 0.0;
};

/// Alternates correspondence estimation with gradient descent (backtracking
/// line search) over the enabled parameters. Deterministic; a round that
/// would increase the objective is reverted and terminates the loop.
/// Throws DivergenceError when the loss turns non-finite.
FitResult fit_transforms(const Mesh& source, const Mesh& target,
                         const KeyNodeSet& nodes, const CombinationMask& mask,
                         const SolverConfig& cfg, const SegmentationConfig& seg,
                         int q = 4);

/// Variant reusing a prebuilt influence map/graph (they depend only on
/// source and nodes).
FitResult fit_transforms(const Mesh& source, const Mesh& target,
                         const KeyNodeSet& nodes, const CombinationMask& mask,
                         const SolverConfig& cfg, const SegmentationConfig& seg,
                         const InfluenceMap& infl, const InfluenceGraph& graph);

}  // namespace bmkn
