#include <doctest.h>

#include <cmath>

#include "bmkn/deform.hpp"
#include "oracles.hpp"

using namespace bmkn;

namespace {

NodeTransforms random_transforms(oracle::Rng& rng, const KeyNodeSet& nodes,
                                 const CombinationMask& mask,
                                 double angle = 0.6, double trans = 0.3) {
  NodeTransforms t = NodeTransforms::identity(nodes, mask);
  for (size_t j = 0; j < nodes.size(); ++j) {
    t.params[j] = mask_params(oracle::random_params(rng, angle, trans),
                              t.mask_for(j));
  }
  return t;
}

}  // namespace

TEST_CASE("influence map weights and replication") {
  SegmentationConfig seg;
  seg.mode = SegMode::Off;

  // single node: the whole row collapses onto it with weight 1
  Mesh mesh;
  mesh.vertices = {{0, 0, 0}, {0.5, 0.5, 0.5}};
  oracle::Rng seed_rng(1);
  KeyNodeSet one = oracle::random_nodes(seed_rng, 1);
  one.positions[0] = {1, 1, 1};
  const InfluenceMap m1 = build_influence_map(mesh, one, seg, 4);
  for (const auto& row : m1.rows) {
    REQUIRE(row.size() == 4);
    double sum = 0;
    for (const auto& e : row) {
      CHECK(e.node == 0);
      sum += e.weight;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }

  // equidistant two nodes, Q=2 -> 0.5 / 0.5
  KeyNodeSet two;
  two.positions = {{-1, 0, 0}, {1, 0, 0}};
  two.labels.assign(2, BodyPart::Torso);
  two.types.assign(2, NodeType::Rigid);
  Mesh center;
  center.vertices = {{0, 0, 0}};
  const InfluenceMap m2 = build_influence_map(center, two, seg, 2);
  REQUIRE(m2.rows[0].size() == 2);
  CHECK(m2.rows[0][0].weight == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m2.rows[0][1].weight == doctest::Approx(0.5).epsilon(1e-12));

  // random instance matches the exhaustive kNN oracle exactly
  oracle::Rng rng(404);
  const Mesh rmesh = oracle::random_mesh(rng, 50);
  const KeyNodeSet rnodes = oracle::random_nodes(rng, 8);
  const InfluenceMap got = build_influence_map(rmesh, rnodes, seg, 4);
  for (size_t i = 0; i < rmesh.vertex_count(); ++i) {
    const auto want = oracle::knn_row(rmesh.vertices[i], rnodes.positions, 4);
    REQUIRE(got.rows[i].size() == want.size());
    for (size_t k = 0; k < want.size(); ++k) {
      CHECK(got.rows[i][k].node == want[k].node);
      CHECK(got.rows[i][k].weight == want[k].weight);
    }
  }

  CHECK_THROWS_AS(
      (void)build_influence_map(rmesh, KeyNodeSet{}, seg, 4), EmptyNodeSet);
}

TEST_CASE("influence filtering by segmentation label") {
  Mesh mesh;
  mesh.vertices = {{0, 0, 0}, {10, 0, 0}};
  mesh.labels = std::vector<BodyPart>{BodyPart::Torso, BodyPart::Head};

  KeyNodeSet nodes;
  nodes.positions = {{0.5, 0, 0}, {1.5, 0, 0}, {9, 0, 0}};
  nodes.labels = {BodyPart::Torso, BodyPart::Torso, BodyPart::Head};
  nodes.types.assign(3, NodeType::Rigid);

  SegmentationConfig manual;
  manual.mode = SegMode::Manual;
  const InfluenceMap m = build_influence_map(mesh, nodes, manual, 2);
  // torso vertex only sees torso nodes; head vertex only the head node
  for (const auto& e : m.rows[0]) CHECK(e.node != 2);
  for (const auto& e : m.rows[1]) CHECK(e.node == 2);

  // manual mode with a part that has no nodes -> error
  Mesh foot = mesh;
  (*foot.labels)[1] = BodyPart::LeftFoot;
  CHECK_THROWS_AS((void)build_influence_map(foot, nodes, manual, 2),
                  NoValidNodes);

  // auto mode falls back to the unfiltered nearest nodes
  SegmentationConfig autoseg;
  autoseg.mode = SegMode::Auto;
  const InfluenceMap fallback = build_influence_map(foot, nodes, autoseg, 2);
  CHECK(fallback.rows[1][0].node == 2);  // nearest regardless of label
}

TEST_CASE("deform_mesh matches a direct equation oracle") {
  SegmentationConfig seg;
  seg.mode = SegMode::Off;
  oracle::Rng rng(555);

  // identity transforms reproduce the input bit-exactly is checked over the
  // full acceptance run; here: equality within fp on random instances.
  for (int iter = 0; iter < 20; ++iter) {
    const Mesh mesh = oracle::random_mesh(rng, 40);
    const KeyNodeSet nodes = oracle::random_nodes(rng, rng.geti(2, 6));
    const InfluenceMap infl = build_influence_map(mesh, nodes, seg, 3);

    NodeTransforms id = NodeTransforms::identity(nodes, CombinationMask::full());
    const Mesh same = deform_mesh(mesh, nodes, id, infl);
    for (size_t i = 0; i < mesh.vertex_count(); ++i) {
      CHECK((same.vertices[i] - mesh.vertices[i]).norm() < 1e-12);
    }

    const NodeTransforms t =
        random_transforms(rng, nodes, CombinationMask::full());
    const Mesh got = deform_mesh(mesh, nodes, t, infl);

    std::vector<oracle::M33> mats;
    std::vector<oracle::V3> trans;
    for (size_t j = 0; j < nodes.size(); ++j) {
      mats.push_back(oracle::compose(t.params[j], t.mask_for(j)));
      trans.push_back(oracle::to_v3(t.params[j].translation));
    }
    for (size_t i = 0; i < mesh.vertex_count(); ++i) {
      const oracle::V3 want = oracle::deform_vertex(
          oracle::to_v3(mesh.vertices[i]), nodes, mats, trans, infl.rows[i]);
      for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(got.vertices[i][c] - want[size_t(c)]) < 1e-12);
      }
    }
  }

  // single node, A = I, pure translation moves every vertex by t
  const Mesh mesh = oracle::random_mesh(rng, 10);
  KeyNodeSet one = oracle::random_nodes(rng, 1);
  NodeTransforms t = NodeTransforms::identity(one, CombinationMask::full());
  t.params[0].translation = {1, 2, 3};
  const InfluenceMap infl = build_influence_map(mesh, one, seg, 4);
  const Mesh moved = deform_mesh(mesh, one, t, infl);
  for (size_t i = 0; i < mesh.vertex_count(); ++i) {
    CHECK((moved.vertices[i] - mesh.vertices[i] - Vec3(1, 2, 3)).norm() < 1e-12);
  }
}

TEST_CASE("loss terms match brute-force recomputation") {
  oracle::Rng rng(808);

  SUBCASE("orthogonality") {
    KeyNodeSet nodes = oracle::random_nodes(rng, 3);
    nodes.types = {NodeType::Affine, NodeType::Affine, NodeType::Affine};

    NodeTransforms ortho = NodeTransforms::identity(nodes, CombinationMask::rigid());
    ortho.types = nodes.types;
    for (auto& p : ortho.params) p.euler = rng.vec(-1, 1);
    CHECK(orthogonality_loss(ortho) < 1e-24);

    // single node, A = 2I -> 27
    KeyNodeSet one = oracle::random_nodes(rng, 1);
    one.types = {NodeType::Affine};
    NodeTransforms twice = NodeTransforms::identity(one, CombinationMask::full());
    twice.params[0].scale_resid = {1, 1, 1};
    CHECK(orthogonality_loss(twice) == doctest::Approx(27.0).epsilon(1e-12));

    // random: term-by-term recomputation
    NodeTransforms t = random_transforms(rng, nodes, CombinationMask::full());
    double want = 0;
    for (size_t j = 0; j < nodes.size(); ++j) {
      const oracle::M33 a = oracle::compose(t.params[j], t.affine_mask);
      oracle::V3 col[3];
      for (int c = 0; c < 3; ++c) {
        col[c] = {a[0][size_t(c)], a[1][size_t(c)], a[2][size_t(c)]};
      }
      auto dot = [](const oracle::V3& u, const oracle::V3& v) {
        return u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
      };
      want += std::pow(dot(col[0], col[1]), 2) + std::pow(dot(col[0], col[2]), 2) +
              std::pow(dot(col[1], col[2]), 2) + std::pow(1 - dot(col[0], col[0]), 2) +
              std::pow(1 - dot(col[1], col[1]), 2) + std::pow(1 - dot(col[2], col[2]), 2);
    }
    CHECK(orthogonality_loss(t) == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("data loss") {
    const Mesh mesh = oracle::random_mesh(rng, 30);
    std::vector<Correspondence> corr(mesh.vertex_count());
    for (auto& c : corr) {
      c.point = rng.vec(-1, 1);
      c.accepted = true;
    }
    double want = 0;
    for (size_t i = 0; i < corr.size(); ++i) {
      want += (mesh.vertices[i] - corr[i].point).squaredNorm();
    }
    CHECK(data_loss(mesh, corr) == doctest::Approx(want).epsilon(1e-12));

    // one vertex off by d -> d^2
    Mesh two;
    two.vertices = {{0, 0, 0}};
    std::vector<Correspondence> c2 = {{Vec3(0.3, 0, 0), true}};
    CHECK(data_loss(two, c2) == doctest::Approx(0.09).epsilon(1e-12));
  }

  SUBCASE("reg loss") {
    KeyNodeSet nodes = oracle::random_nodes(rng, 4);
    InfluenceGraph graph;
    graph.node_count = 4;
    graph.edges = {{0, 1}, {1, 2}, {2, 3}};

    // consistent pure translation -> 0
    NodeTransforms t = NodeTransforms::identity(nodes, CombinationMask::full());
    for (auto& p : t.params) p.translation = {0.2, -0.1, 0.3};
    CHECK(reg_loss(nodes, t, graph) < 1e-24);

    // two connected nodes, translations differing by d, A = I
    KeyNodeSet pair = oracle::random_nodes(rng, 2);
    InfluenceGraph pg;
    pg.node_count = 2;
    pg.edges = {{0, 1}};
    NodeTransforms tp = NodeTransforms::identity(pair, CombinationMask::full());
    tp.params[1].translation = {0.5, 0, 0};
    CHECK(reg_loss(pair, tp, pg) == doctest::Approx(0.5).epsilon(1e-12));  // d^2 per direction

    // random transforms vs explicit edge loop
    NodeTransforms tr = random_transforms(rng, nodes, CombinationMask::full());
    double want = 0;
    for (const auto& [j, k] : graph.edges) {
      for (const auto& [a, b] : {std::pair{j, k}, std::pair{k, j}}) {
        const oracle::M33 m = oracle::compose(tr.params[size_t(a)], tr.mask_for(size_t(a)));
        const oracle::V3 d = oracle::to_v3(nodes.positions[size_t(b)] -
                                           nodes.positions[size_t(a)]);
        const oracle::V3 md = oracle::apply(m, d);
        Vec3 rho;
        for (int c = 0; c < 3; ++c) {
          rho[c] = md[size_t(c)] + nodes.positions[size_t(a)][c] +
                   tr.params[size_t(a)].translation[c] -
                   nodes.positions[size_t(b)][c] -
                   tr.params[size_t(b)].translation[c];
        }
        want += rho.squaredNorm();
      }
    }
    CHECK(reg_loss(nodes, tr, graph) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("segment prealign offsets") {
  oracle::Rng rng(9);
  Mesh source = oracle::random_mesh(rng, 60);
  std::vector<BodyPart> labels;
  for (size_t i = 0; i < source.vertex_count(); ++i) {
    labels.push_back(i % 2 == 0 ? BodyPart::Torso : BodyPart::Head);
  }
  source.labels = labels;

  // identical meshes -> all offsets zero
  const auto zero = seg_guided_prealign(source, source);
  for (const Vec3& v : zero) CHECK(v.norm() == 0.0);

  // shift the torso only
  Mesh target = source;
  for (size_t i = 0; i < target.vertex_count(); ++i) {
    if ((*target.labels)[i] == BodyPart::Torso) {
      target.vertices[i] += Vec3(0.3, 0, 0);
    }
  }
  const auto offsets = seg_guided_prealign(source, target);
  CHECK((offsets[size_t(BodyPart::Torso)] - Vec3(0.3, 0, 0)).norm() < 1e-12);
  CHECK(offsets[size_t(BodyPart::Head)].norm() < 1e-12);

  // independent centroid computation on a random labeled pair
  Mesh t2 = source;
  for (Vec3& v : t2.vertices) v += rng.vec(-0.2, 0.2);
  const auto got = seg_guided_prealign(source, t2);
  for (int part : {int(BodyPart::Torso), int(BodyPart::Head)}) {
    Vec3 slo = Vec3::Constant(1e300), shi = Vec3::Constant(-1e300);
    Vec3 tlo = Vec3::Constant(1e300), thi = Vec3::Constant(-1e300);
    for (size_t i = 0; i < source.vertex_count(); ++i) {
      if (int((*source.labels)[i]) != part) continue;
      slo = slo.cwiseMin(source.vertices[i]);
      shi = shi.cwiseMax(source.vertices[i]);
      tlo = tlo.cwiseMin(t2.vertices[i]);
      thi = thi.cwiseMax(t2.vertices[i]);
    }
    const Vec3 want = 0.5 * (tlo + thi) - 0.5 * (slo + shi);
    CHECK((got[size_t(part)] - want).norm() < 1e-12);
  }
}

TEST_CASE("analytic gradients match central differences") {
  oracle::Rng rng(2718);
  SegmentationConfig seg;
  seg.mode = SegMode::Off;

  for (const CombinationMask& mask : CombinationMask::legal_masks()) {
    const Mesh mesh = oracle::random_mesh(rng, 25);
    KeyNodeSet nodes = oracle::random_nodes(rng, 3);
    nodes.types = {NodeType::Affine, NodeType::Rigid, NodeType::Affine};
    const InfluenceMap infl = build_influence_map(mesh, nodes, seg, 3);
    const InfluenceGraph graph = build_influence_graph(infl, 3);

    std::vector<Correspondence> corr(mesh.vertex_count());
    for (auto& c : corr) {
      c.point = rng.vec(-1, 1);
      c.accepted = true;
    }
    const FitObjective obj(mesh, nodes, infl, graph, corr, mask, 1.0, 0.1);
    NodeTransforms t = random_transforms(rng, nodes, mask, 0.5, 0.2);

    Eigen::VectorXd analytic;
    obj.loss_and_gradient(t, analytic);

    const Eigen::VectorXd x = obj.pack(t);
    Eigen::VectorXd fd(x.size());
    const double h = 1e-5;
    for (long k = 0; k < x.size(); ++k) {
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      fd[k] = (obj.loss(obj.unpack(xp)) - obj.loss(obj.unpack(xm))) / (2 * h);
    }
    const double rel = (analytic - fd).norm() /
                       std::max({analytic.norm(), fd.norm(), 1e-8});
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("fit_transforms recovers simple motions") {
  oracle::Rng rng(1234);
  SegmentationConfig seg;
  seg.mode = SegMode::Off;
  SolverConfig cfg;
  cfg.seg_corr_enabled = false;

  const Mesh source = oracle::random_mesh(rng, 60);
  KeyNodeSet nodes = oracle::random_nodes(rng, 4);

  SUBCASE("zero motion fixed point") {
    const FitResult fit = fit_transforms(source, source, nodes,
                                         CombinationMask::rigid(), cfg, seg);
    Mesh deformed = deform_mesh(
        source, nodes, fit.transforms,
        build_influence_map(source, nodes, seg, 4));
    const auto corr = estimate_correspondences(deformed, source, nullptr);
    CHECK(data_loss(deformed, corr) < 1e-8);
    for (size_t h = 1; h < fit.loss_history.size(); ++h) {
      CHECK(fit.loss_history[h] <= fit.loss_history[h - 1]);
    }
  }

  SUBCASE("global translation, single node, T-only mask") {
    KeyNodeSet one = oracle::random_nodes(rng, 1);
    one.types[0] = NodeType::Affine;  // the T-only mask applies verbatim
    const Vec3 tstar(0.12, -0.05, 0.08);
    Mesh target = source;
    for (Vec3& v : target.vertices) v += tstar;
    const FitResult fit = fit_transforms(
        source, target, one, CombinationMask::translation_only(), cfg, seg);
    CHECK((fit.transforms.params[0].translation - tstar).norm() < 1e-6);
    // disabled components stay frozen at identity
    CHECK(fit.transforms.params[0].euler.norm() == 0.0);
    CHECK(fit.transforms.params[0].scale_resid.norm() == 0.0);
    CHECK(fit.transforms.params[0].shear.norm() == 0.0);

    Mesh deformed = deform_mesh(source, one, fit.transforms,
                                build_influence_map(source, one, seg, 4));
    const auto corr = estimate_correspondences(deformed, target, nullptr);
    CHECK(data_loss(deformed, corr) < 1e-10);
  }
}

TEST_CASE("scaling target favors a scale-enabled mask") {
  // cylindrical shell (torso analogue) scaled 1.2x along x
  SegmentationConfig seg;
  seg.mode = SegMode::Off;
  SolverConfig cfg;
  cfg.seg_corr_enabled = false;

  Mesh source;
  const int nseg = 24, nring = 12;
  for (int r = 0; r <= nring; ++r) {
    for (int s = 0; s < nseg; ++s) {
      const double a = 2.0 * M_PI * s / nseg;
      source.vertices.emplace_back(0.15 * std::cos(a), 0.5 * r / nring,
                                   0.15 * std::sin(a));
    }
  }
  Mesh target = source;
  for (Vec3& v : target.vertices) v.x() *= 1.2;

  KeyNodeSet nodes;
  nodes.positions = {{0.15, 0.05, 0}, {-0.15, 0.2, 0}, {0, 0.35, 0.15},
                     {0, 0.45, -0.15}};
  nodes.labels.assign(4, BodyPart::Torso);
  nodes.types.assign(4, NodeType::Affine);

  const FitResult rt = fit_transforms(source, target, nodes,
                                      CombinationMask::rigid(), cfg, seg);
  const FitResult rts = fit_transforms(
      source, target, nodes, CombinationMask::from_name("RTS"), cfg, seg);

  const InfluenceMap infl = build_influence_map(source, nodes, seg, 4);
  const Mesh pred_rt = deform_mesh(source, nodes, rt.transforms, infl);
  const Mesh pred_rts = deform_mesh(source, nodes, rts.transforms, infl);
  CHECK(rmse_distortion(pred_rts, target) < rmse_distortion(pred_rt, target));
}
