#include "bmkn/deform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bmkn/spatial.hpp"

namespace bmkn {

namespace {
constexpr double kDistFloor = 1e-24;  // squared-distance floor for weights
}

NodeTransforms NodeTransforms::identity(const KeyNodeSet& nodes,
                                        const CombinationMask& affine_mask) {
  NodeTransforms t;
  t.params.assign(nodes.size(), TransformParams{});
  t.types = nodes.types;
  t.affine_mask = affine_mask;
  return t;
}

Mat3 NodeTransforms::effective_matrix(size_t j) const {
  return compose(mask_params(params[j], mask_for(j)));
}

void SolverConfig::validate() const {
  if (alpha_reg < 0 || alpha_orth < 0) {
    throw ConfigError("loss weights must be nonnegative");
  }
  if (max_outer_iters < 1 || max_inner_iters < 1) {
    throw ConfigError("iteration counts must be >= 1");
  }
}

// ---------------------------------------------------------------------------

InfluenceMap build_influence_map(const Mesh& mesh, const KeyNodeSet& nodes,
                                 const SegmentationConfig& seg, int q) {
  if (nodes.size() == 0) throw EmptyNodeSet("influence map needs >= 1 node");
  if (q < 1) throw ConfigError("Q must be >= 1");
  nodes.check_aligned();

  const bool filter = seg.mode != SegMode::Off && mesh.labels.has_value();
  const int n = int(nodes.size());

  InfluenceMap infl;
  infl.q = q;
  infl.rows.resize(mesh.vertex_count());

  std::vector<std::pair<double, int>> cand;  // (d^2, node)
  cand.reserve(nodes.size());
  for (size_t i = 0; i < mesh.vertex_count(); ++i) {
    const Vec3& x = mesh.vertices[i];
    cand.clear();
    if (filter) {
      const BodyPart label = (*mesh.labels)[i];
      for (int j = 0; j < n; ++j) {
        if (nodes.labels[j] == label) {
          cand.emplace_back((x - nodes.positions[j]).squaredNorm(), j);
        }
      }
      if (cand.empty()) {
        if (seg.mode == SegMode::Manual) {
          throw NoValidNodes(std::string("no nodes labeled ") +
                             body_part_name(label) + " for vertex " +
                             std::to_string(i));
        }
        // auto mode: fall back to the unfiltered nearest nodes
        for (int j = 0; j < n; ++j) {
          cand.emplace_back((x - nodes.positions[j]).squaredNorm(), j);
        }
      }
    } else {
      for (int j = 0; j < n; ++j) {
        cand.emplace_back((x - nodes.positions[j]).squaredNorm(), j);
      }
    }

    std::sort(cand.begin(), cand.end());
    const int m = int(cand.size());
    auto& row = infl.rows[i];
    row.reserve(q);
    if (m >= q) {
      for (int k = 0; k < q; ++k) {
        row.push_back({cand[k].second,
                       1.0 / std::max(cand[k].first, kDistFloor)});
      }
    } else {
      // Propagation from the available valid nodes: the closest one is
      // replicated to fill the row, the rest appear once.
      for (int k = 0; k < q - m + 1; ++k) {
        row.push_back({cand[0].second,
                       1.0 / std::max(cand[0].first, kDistFloor)});
      }
      for (int k = 1; k < m; ++k) {
        row.push_back({cand[k].second,
                       1.0 / std::max(cand[k].first, kDistFloor)});
      }
    }
    double sum = 0.0;
    for (const auto& e : row) sum += e.weight;
    for (auto& e : row) e.weight /= sum;
  }
  return infl;
}

Mesh deform_mesh(const Mesh& mesh, const KeyNodeSet& nodes,
                 const NodeTransforms& transforms, const InfluenceMap& infl) {
  if (transforms.params.size() != nodes.size() ||
      transforms.types.size() != nodes.size()) {
    throw AlignmentError("transforms not aligned with node set");
  }
  if (infl.rows.size() != mesh.vertex_count()) {
    throw AlignmentError("influence map not aligned with mesh");
  }
  std::vector<Mat3> mats(nodes.size());
  for (size_t j = 0; j < nodes.size(); ++j) {
    mats[j] = transforms.effective_matrix(j);
  }
  Mesh out = mesh;
  for (size_t i = 0; i < mesh.vertex_count(); ++i) {
    const Vec3& x = mesh.vertices[i];
    Vec3 acc = Vec3::Zero();
    for (const auto& e : infl.rows[i]) {
      const Vec3& nj = nodes.positions[e.node];
      acc += e.weight * (mats[e.node] * (x - nj) +
                         transforms.params[e.node].translation + nj);
    }
    out.vertices[i] = acc;
  }
  return out;
}

namespace {

double orth_term(const Mat3& a) {
  const Vec3 a1 = a.col(0), a2 = a.col(1), a3 = a.col(2);
  const double d12 = a1.dot(a2), d13 = a1.dot(a3), d23 = a2.dot(a3);
  const double n1 = 1.0 - a1.dot(a1);
  const double n2 = 1.0 - a2.dot(a2);
  const double n3 = 1.0 - a3.dot(a3);
  return d12 * d12 + d13 * d13 + d23 * d23 + n1 * n1 + n2 * n2 + n3 * n3;
}

// d(orth)/dA as a matrix of column gradients.
Mat3 orth_grad(const Mat3& a) {
  const Vec3 c[3] = {a.col(0), a.col(1), a.col(2)};
  Mat3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 gi = Vec3::Zero();
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      gi += 2.0 * c[i].dot(c[j]) * c[j];
    }
    gi -= 4.0 * (1.0 - c[i].dot(c[i])) * c[i];
    g.col(i) = gi;
  }
  return g;
}

}  // namespace

double orthogonality_loss(const NodeTransforms& transforms) {
  double sum = 0.0;
  for (size_t j = 0; j < transforms.params.size(); ++j) {
    if (transforms.types[j] != NodeType::Affine) continue;
    sum += orth_term(transforms.effective_matrix(j));
  }
  return sum;
}

double data_loss(const Mesh& deformed,
                 const std::vector<Correspondence>& corr) {
  if (corr.size() != deformed.vertex_count()) {
    throw AlignmentError("correspondences must cover all vertices");
  }
  double sum = 0.0;
  for (size_t i = 0; i < corr.size(); ++i) {
    if (!corr[i].accepted) continue;
    sum += (deformed.vertices[i] - corr[i].point).squaredNorm();
  }
  return sum;
}

double reg_loss(const KeyNodeSet& nodes, const NodeTransforms& transforms,
                const InfluenceGraph& graph) {
  std::vector<Mat3> mats(nodes.size());
  for (size_t j = 0; j < nodes.size(); ++j) {
    mats[j] = transforms.effective_matrix(j);
  }
  auto term = [&](int j, int k) {
    const Vec3 d = nodes.positions[k] - nodes.positions[j];
    const Vec3 rho = mats[j] * d + nodes.positions[j] +
                     transforms.params[j].translation - nodes.positions[k] -
                     transforms.params[k].translation;
    return rho.squaredNorm();
  };
  double sum = 0.0;
  for (const auto& [j, k] : graph.edges) sum += term(j, k) + term(k, j);
  return sum;
}

std::array<Vec3, kBodyPartCount> seg_guided_prealign(const Mesh& source,
                                                     const Mesh& target) {
  std::array<Vec3, kBodyPartCount> offsets;
  offsets.fill(Vec3::Zero());
  if (!source.labels || !target.labels) return offsets;

  struct Box {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
    bool any = false;
    void add(const Vec3& v) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
      any = true;
    }
    Vec3 centroid() const { return 0.5 * (lo + hi); }
  };
  std::array<Box, kBodyPartCount> sbox, tbox;
  for (size_t i = 0; i < source.vertex_count(); ++i) {
    sbox[size_t((*source.labels)[i])].add(source.vertices[i]);
  }
  for (size_t i = 0; i < target.vertex_count(); ++i) {
    tbox[size_t((*target.labels)[i])].add(target.vertices[i]);
  }
  for (int p = 0; p < kBodyPartCount; ++p) {
    if (sbox[p].any && tbox[p].any) {
      offsets[p] = tbox[p].centroid() - sbox[p].centroid();
    }
  }
  return offsets;
}

std::vector<Correspondence> estimate_correspondences(
    const Mesh& deformed, const Mesh& target,
    const std::array<Vec3, kBodyPartCount>* prealign_offsets) {
  const KdTree tree(target.vertices);
  const size_t n = deformed.vertex_count();
  std::vector<Correspondence> corr(n);
  std::vector<double> dist(n);
  for (size_t i = 0; i < n; ++i) {
    Vec3 query = deformed.vertices[i];
    if (prealign_offsets && deformed.labels) {
      query += (*prealign_offsets)[size_t((*deformed.labels)[i])];
    }
    const auto [idx, d2] = tree.nearest(query);
    corr[i].point = target.vertices[idx];
    dist[i] = (deformed.vertices[i] - corr[i].point).norm();
  }
  std::vector<double> sorted = dist;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.empty()
                            ? 0.0
                            : 0.5 * (sorted[(sorted.size() - 1) / 2] +
                                     sorted[sorted.size() / 2]);
  const double reject = 3.0 * median;
  for (size_t i = 0; i < n; ++i) corr[i].accepted = dist[i] <= reject;
  return corr;
}

// ---------------------------------------------------------------------------

FitObjective::FitObjective(const Mesh& source, const KeyNodeSet& nodes,
                           const InfluenceMap& infl,
                           const InfluenceGraph& graph,
                           std::vector<Correspondence> corr,
                           const CombinationMask& affine_mask,
                           double alpha_reg, double alpha_orth)
    : source_(source),
      nodes_(nodes),
      infl_(infl),
      graph_(graph),
      corr_(std::move(corr)),
      affine_mask_(affine_mask),
      alpha_reg_(alpha_reg),
      alpha_orth_(alpha_orth) {
  for (int j = 0; j < int(nodes_.size()); ++j) {
    const CombinationMask m = nodes_.types[size_t(j)] == NodeType::Rigid
                                  ? CombinationMask::rigid()
                                  : affine_mask_;
    if (m.r_on) for (int c = 0; c < 3; ++c) slots_.push_back({j, c});
    if (m.t_on) for (int c = 3; c < 6; ++c) slots_.push_back({j, c});
    if (m.s_on) for (int c = 6; c < 9; ++c) slots_.push_back({j, c});
    if (m.h_on) for (int c = 9; c < 12; ++c) slots_.push_back({j, c});
  }
}

Eigen::VectorXd FitObjective::pack(const NodeTransforms& t) const {
  Eigen::VectorXd x(param_count());
  for (size_t s = 0; s < slots_.size(); ++s) {
    const auto [j, c] = slots_[s];
    const TransformParams& p = t.params[size_t(j)];
    if (c < 3) x[long(s)] = p.euler[c];
    else if (c < 6) x[long(s)] = p.translation[c - 3];
    else if (c < 9) x[long(s)] = p.scale_resid[c - 6];
    else x[long(s)] = p.shear[c - 9];
  }
  return x;
}

NodeTransforms FitObjective::unpack(const Eigen::VectorXd& x) const {
  NodeTransforms t = NodeTransforms::identity(nodes_, affine_mask_);
  for (size_t s = 0; s < slots_.size(); ++s) {
    const auto [j, c] = slots_[s];
    TransformParams& p = t.params[size_t(j)];
    if (c < 3) p.euler[c] = x[long(s)];
    else if (c < 6) p.translation[c - 3] = x[long(s)];
    else if (c < 9) p.scale_resid[c - 6] = x[long(s)];
    else p.shear[c - 9] = x[long(s)];
  }
  return t;
}

double FitObjective::loss(const NodeTransforms& t) const {
  return evaluate(t, nullptr);
}

double FitObjective::loss_and_gradient(const NodeTransforms& t,
                                       Eigen::VectorXd& grad) const {
  grad.resize(param_count());
  return evaluate(t, &grad);
}

double FitObjective::evaluate(const NodeTransforms& t,
                              Eigen::VectorXd* grad) const {
  const int n = int(nodes_.size());
  std::vector<Mat3> mats(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) mats[size_t(j)] = t.effective_matrix(size_t(j));

  std::vector<Mat3> mgrad;       // dL/dA_j accumulators
  std::vector<Vec3> tgrad;       // dL/dt_j accumulators
  if (grad) {
    mgrad.assign(size_t(n), Mat3::Zero());
    tgrad.assign(size_t(n), Vec3::Zero());
  }

  double loss_data = 0.0;
  for (size_t i = 0; i < source_.vertex_count(); ++i) {
    if (!corr_[i].accepted) continue;
    const Vec3& x = source_.vertices[i];
    Vec3 acc = Vec3::Zero();
    for (const auto& e : infl_.rows[i]) {
      const Vec3& nj = nodes_.positions[size_t(e.node)];
      acc += e.weight * (mats[size_t(e.node)] * (x - nj) +
                         t.params[size_t(e.node)].translation + nj);
    }
    const Vec3 r = acc - corr_[i].point;
    loss_data += r.squaredNorm();
    if (grad) {
      for (const auto& e : infl_.rows[i]) {
        const Vec3& nj = nodes_.positions[size_t(e.node)];
        mgrad[size_t(e.node)] += (2.0 * e.weight) * r * (x - nj).transpose();
        tgrad[size_t(e.node)] += (2.0 * e.weight) * r;
      }
    }
  }

  double loss_reg = 0.0;
  if (alpha_reg_ > 0.0) {
    auto directed = [&](int j, int k) {
      const Vec3 d = nodes_.positions[size_t(k)] - nodes_.positions[size_t(j)];
      const Vec3 rho = mats[size_t(j)] * d + nodes_.positions[size_t(j)] +
                       t.params[size_t(j)].translation -
                       nodes_.positions[size_t(k)] -
                       t.params[size_t(k)].translation;
      loss_reg += rho.squaredNorm();
      if (grad) {
        mgrad[size_t(j)] += (2.0 * alpha_reg_) * rho * d.transpose();
        tgrad[size_t(j)] += (2.0 * alpha_reg_) * rho;
        tgrad[size_t(k)] -= (2.0 * alpha_reg_) * rho;
      }
    };
    for (const auto& [j, k] : graph_.edges) {
      directed(j, k);
      directed(k, j);
    }
  }

  double loss_orth = 0.0;
  if (alpha_orth_ > 0.0) {
    for (int j = 0; j < n; ++j) {
      if (nodes_.types[size_t(j)] != NodeType::Affine) continue;
      loss_orth += orth_term(mats[size_t(j)]);
      if (grad) mgrad[size_t(j)] += alpha_orth_ * orth_grad(mats[size_t(j)]);
    }
  }

  const double total =
      loss_data + alpha_reg_ * loss_reg + alpha_orth_ * loss_orth;
  if (!grad) return total;

  // Chain the per-node matrix gradients through dA/dparam.
  for (size_t s = 0; s < slots_.size(); ++s) {
    const auto [j, c] = slots_[s];
    if (c >= 3 && c < 6) {
      (*grad)[long(s)] = tgrad[size_t(j)][c - 3];
      continue;
    }
    const TransformParams p = mask_params(t.params[size_t(j)],
                                          t.mask_for(size_t(j)));
    const double cx = std::cos(p.euler.x()), sx = std::sin(p.euler.x());
    const double cy = std::cos(p.euler.y()), sy = std::sin(p.euler.y());
    const double cz = std::cos(p.euler.z()), sz = std::sin(p.euler.z());
    Mat3 rx, ry, rz;
    rx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
    ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
    rz << cz, -sz, 0, sz, cz, 0, 0, 0, 1;
    Mat3 smat = Mat3::Identity();
    smat(0, 0) = 1.0 + p.scale_resid.x();
    smat(1, 1) = 1.0 + p.scale_resid.y();
    smat(2, 2) = 1.0 + p.scale_resid.z();
    Mat3 hmat = Mat3::Identity();
    hmat(0, 1) = p.shear.x();
    hmat(0, 2) = p.shear.y();
    hmat(1, 2) = p.shear.z();

    Mat3 da;
    if (c < 3) {
      Mat3 dr;
      if (c == 0) {
        dr << 0, 0, 0, 0, -sx, -cx, 0, cx, -sx;
        da = rz * ry * dr;
      } else if (c == 1) {
        dr << -sy, 0, cy, 0, 0, 0, -cy, 0, -sy;
        da = rz * dr * rx;
      } else {
        dr << -sz, -cz, 0, cz, -sz, 0, 0, 0, 0;
        da = dr * ry * rx;
      }
      da = da * smat * hmat;
    } else if (c < 9) {
      const int axis = c - 6;
      const Mat3 r = rz * ry * rx;
      da = Mat3::Zero();
      // d(R S H)/ds_axis = R e_axis e_axis^T H = R.col(axis) * H.row(axis)
      da += r.col(axis) * hmat.row(axis);
    } else {
      const Mat3 rs = (rz * ry * rx) * smat;
      da = Mat3::Zero();
      if (c == 9) da.col(1) = rs.col(0);        // h_xy
      else if (c == 10) da.col(2) = rs.col(0);  // h_xz
      else da.col(2) = rs.col(1);               // h_yz
    }
    (*grad)[long(s)] = mgrad[size_t(j)].cwiseProduct(da).sum();
  }
  return total;
}

// ---------------------------------------------------------------------------

namespace {

// Gradient descent with a Barzilai-Borwein trial step, safeguarded by
// Armijo backtracking. Deterministic.
void minimize(const FitObjective& obj, Eigen::VectorXd& x,
              const SolverConfig& cfg) {
  if (obj.param_count() == 0) return;
  double step = 1.0;
  Eigen::VectorXd grad, prev_x, prev_grad;
  bool have_prev = false;
  for (int it = 0; it < cfg.max_inner_iters; ++it) {
    const double fx = obj.loss_and_gradient(obj.unpack(x), grad);
    if (!std::isfinite(fx)) throw DivergenceError("objective is not finite");
    const double g2 = grad.squaredNorm();
    if (g2 < 1e-24) break;

    if (have_prev) {
      const Eigen::VectorXd s = x - prev_x;
      const Eigen::VectorXd y = grad - prev_grad;
      const double sy = s.dot(y);
      if (sy > 1e-30) step = std::clamp(s.squaredNorm() / sy, 1e-12, 1e6);
    }
    prev_x = x;
    prev_grad = grad;

    double t = step;
    bool accepted = false;
    double fc = fx;
    Eigen::VectorXd cand;
    for (int ls = 0; ls < 48; ++ls) {
      cand = x - t * grad;
      fc = obj.loss(obj.unpack(cand));
      if (std::isfinite(fc) && fc <= fx - 1e-4 * t * g2) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    x = cand;
    have_prev = true;
    if (std::abs(fx - fc) <= cfg.convergence_tol * std::max(fx, 1e-30)) break;
  }
}

}  // namespace

FitResult fit_transforms(const Mesh& source, const Mesh& target,
                         const KeyNodeSet& nodes, const CombinationMask& mask,
                         const SolverConfig& cfg, const SegmentationConfig& seg,
                         int q) {
  const InfluenceMap infl = build_influence_map(source, nodes, seg, q);
  const InfluenceGraph graph = build_influence_graph(infl, int(nodes.size()));
  return fit_transforms(source, target, nodes, mask, cfg, seg, infl, graph);
}

FitResult fit_transforms(const Mesh& source, const Mesh& target,
                         const KeyNodeSet& nodes, const CombinationMask& mask,
                         const SolverConfig& cfg,
                         const SegmentationConfig& /*seg*/,
                         const InfluenceMap& infl, const InfluenceGraph& graph) {
  cfg.validate();
  if (!mask.t_on) throw ConfigError("combination mask must enable T");

  FitResult result;
  result.transforms = NodeTransforms::identity(nodes, mask);

  const bool prealign = cfg.seg_corr_enabled && source.labels.has_value() &&
                        target.labels.has_value();

  double prev_end = std::numeric_limits<double>::infinity();
  NodeTransforms prev_transforms = result.transforms;
  std::vector<Correspondence> corr;

  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    Mesh deformed = deform_mesh(source, nodes, result.transforms, infl);
    std::array<Vec3, kBodyPartCount> offsets;
    if (prealign) {
      deformed.labels = source.labels;
      offsets = seg_guided_prealign(deformed, target);
    }
    corr = estimate_correspondences(deformed, target,
                                    prealign ? &offsets : nullptr);

    FitObjective obj(source, nodes, infl, graph, corr, mask, cfg.alpha_reg,
                     cfg.alpha_orth);
    Eigen::VectorXd x = obj.pack(result.transforms);
    minimize(obj, x, cfg);
    NodeTransforms cand = obj.unpack(x);
    const double end_loss = obj.loss(cand);
    if (!std::isfinite(end_loss)) {
      throw DivergenceError("fit loss is not finite");
    }

    if (end_loss > prev_end) {
      // The correspondence update made things worse; keep the previous round.
      result.transforms = prev_transforms;
      break;
    }
    result.transforms = cand;
    prev_transforms = cand;
    result.loss_history.push_back(end_loss);
    const bool converged =
        std::isfinite(prev_end) &&
        std::abs(prev_end - end_loss) <=
            cfg.convergence_tol * std::max(prev_end, 1e-30);
    prev_end = end_loss;
    if (converged) break;
  }

  result.final_loss = result.loss_history.empty() ? 0.0
                                                  : result.loss_history.back();

  const Mesh final_mesh = deform_mesh(source, nodes, result.transforms, infl);
  const KdTree tree(target.vertices);
  result.per_vertex_error.resize(final_mesh.vertex_count());
  for (size_t i = 0; i < final_mesh.vertex_count(); ++i) {
    result.per_vertex_error[i] =
        std::sqrt(tree.nearest(final_mesh.vertices[i]).second);
  }
  std::vector<Correspondence> final_corr = estimate_correspondences(
      final_mesh, target, nullptr);
  result.data_loss = data_loss(final_mesh, final_corr);
  return result;
}

}  // namespace bmkn
