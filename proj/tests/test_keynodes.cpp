#include <doctest.h>

#include <map>
#include <numeric>
#include <set>

#include "bmkn/generator.hpp"
#include "bmkn/spatial.hpp"
#include "bmkn/synth.hpp"
#include "oracles.hpp"

using namespace bmkn;

namespace {

// Brute-force farthest point sampling with the same tie rule (max distance,
// then smallest index).
std::vector<int> fps_oracle(const Mesh& mesh, int count, uint64_t seed) {
  const size_t n = mesh.vertex_count();
  std::vector<int> chosen{int(seed % n)};
  std::vector<double> d2(n, 1e300);
  while (int(chosen.size()) < count) {
    for (size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (mesh.vertices[i] -
                               mesh.vertices[size_t(chosen.back())])
                                  .squaredNorm());
    }
    int best = 0;
    for (size_t i = 1; i < n; ++i) {
      if (d2[i] > d2[size_t(best)]) best = int(i);
    }
    chosen.push_back(best);
  }
  return chosen;
}

}  // namespace

TEST_CASE("init_nodes is farthest point sampling") {
  oracle::Rng rng(606);
  const Mesh mesh = oracle::random_mesh(rng, 60);
  SegmentationConfig seg;
  seg.mode = SegMode::Off;

  const KeyNodeSet one = init_nodes(mesh, 1, 13, seg);
  CHECK(one.positions[0] == mesh.vertices[13 % 60]);

  const KeyNodeSet all = init_nodes(mesh, 60, 0, seg);
  CHECK(all.size() == 60);
  std::set<int> seen;
  for (const Vec3& p : all.positions) {
    for (size_t i = 0; i < mesh.vertex_count(); ++i) {
      if (mesh.vertices[i] == p) seen.insert(int(i));
    }
  }
  CHECK(seen.size() == 60);

  const std::vector<int> want = fps_oracle(mesh, 8, 5);
  const KeyNodeSet got = init_nodes(mesh, 8, 5, seg);
  REQUIRE(got.size() == 8);
  for (size_t k = 0; k < 8; ++k) {
    CHECK(got.positions[k] == mesh.vertices[size_t(want[k])]);
  }

  CHECK_THROWS_AS((void)init_nodes(mesh, 61, 0, seg), TooFewVertices);
}

TEST_CASE("node labels and types follow the nearest vertex") {
  SynthConfig scfg;
  scfg.frames = 1;
  const Mesh body = synthesize(scfg).frames[0];
  SegmentationConfig seg;
  seg.mode = SegMode::Manual;
  seg.affine_parts = {BodyPart::Torso};

  const KeyNodeSet nodes = init_nodes(body, 30, 1, seg);
  const KdTree tree_check(body.vertices);
  for (size_t j = 0; j < nodes.size(); ++j) {
    const int nearest = tree_check.nearest(nodes.positions[j]).first;
    CHECK(nodes.labels[j] == (*body.labels)[size_t(nearest)]);
    CHECK((nodes.types[j] == NodeType::Affine) ==
          (nodes.labels[j] == BodyPart::Torso));
  }
}

TEST_CASE("prune_nodes honors the shared-vertex filter") {
  SegmentationConfig seg;
  seg.mode = SegMode::Off;

  // Two far-apart clusters: lowest-error nodes in different clusters can both
  // be removed; within one cluster only one of two co-influencing nodes can.
  Mesh mesh;
  mesh.vertices = {{0, 0, 0}, {10, 0, 0}};
  KeyNodeSet nodes;
  nodes.positions = {{0.4, 0, 0}, {-0.4, 0, 0}, {10.4, 0, 0}, {9.6, 0, 0}};
  nodes.labels.assign(4, BodyPart::Torso);
  nodes.types.assign(4, NodeType::Rigid);
  const InfluenceMap infl = build_influence_map(mesh, nodes, seg, 2);

  SUBCASE("disjoint pair removed together") {
    const std::vector<double> err = {0.0, 1.0, 0.0, 1.0};
    const KeyNodeSet pruned = prune_nodes(nodes, infl, err, 2);
    CHECK(pruned.size() == 2);  // nodes 0 and 2 (lowest error, no shared vertex)
    CHECK(pruned.positions[0] == Vec3(-0.4, 0, 0));
    CHECK(pruned.positions[1] == Vec3(9.6, 0, 0));
  }

  SUBCASE("co-influencing pair: only the lower-error node goes") {
    const std::vector<double> err = {0.0, 0.5, 1.0, 1.0};
    const KeyNodeSet pruned = prune_nodes(nodes, infl, err, 2);
    // 0 and 1 both control vertex 0 at weight ~0.5; only node 0 is removed,
    // and the filter then admits node 2 from the other cluster.
    CHECK(pruned.size() == 2);
    CHECK(pruned.positions[0] == Vec3(-0.4, 0, 0));
    CHECK(pruned.positions[1] == Vec3(9.6, 0, 0));
  }

  SUBCASE("random instance equals the greedy oracle") {
    oracle::Rng rng(55);
    const Mesh rmesh = oracle::random_mesh(rng, 40);
    KeyNodeSet rnodes = oracle::random_nodes(rng, 10);
    const InfluenceMap rinfl = build_influence_map(rmesh, rnodes, seg, 3);
    std::vector<double> err;
    for (int j = 0; j < 10; ++j) err.push_back(rng.uni(0, 1));

    // oracle: greedy ascending (error, index) with pairwise-disjoint
    // influenced-vertex sets (aggregate weight > 0.01)
    std::vector<std::set<int>> verts(10);
    for (size_t i = 0; i < rinfl.rows.size(); ++i) {
      std::map<int, double> w;
      for (const auto& e : rinfl.rows[i]) w[e.node] += e.weight;
      for (const auto& [node, weight] : w) {
        if (weight > 0.01) verts[size_t(node)].insert(int(i));
      }
    }
    std::vector<int> order(10);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return err[size_t(a)] != err[size_t(b)] ? err[size_t(a)] < err[size_t(b)]
                                              : a < b;
    });
    std::set<int> claimed, removed;
    for (int j : order) {
      if (int(removed.size()) == 4) break;
      bool conflict = false;
      for (int v : verts[size_t(j)]) conflict |= claimed.count(v) > 0;
      if (conflict) continue;
      for (int v : verts[size_t(j)]) claimed.insert(v);
      removed.insert(j);
    }

    const KeyNodeSet pruned = prune_nodes(rnodes, rinfl, err, 4);
    CHECK(pruned.size() == 10 - removed.size());
    size_t k = 0;
    for (int j = 0; j < 10; ++j) {
      if (removed.count(j)) continue;
      CHECK(pruned.positions[k] == rnodes.positions[size_t(j)]);
      ++k;
    }
  }
}

TEST_CASE("insert_nodes places high-error vertices with spacing") {
  SegmentationConfig seg;
  seg.mode = SegMode::Off;
  Mesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {5, 0, 0}};
  KeyNodeSet nodes;
  nodes.positions = {{1.9, 0, 0}};
  nodes.labels = {BodyPart::Torso};
  nodes.types = {NodeType::Rigid};

  // highest-error vertex far from nodes -> inserted there
  const KeyNodeSet far_case =
      insert_nodes(nodes, mesh, {0.1, 0.2, 0.3, 0.9}, 1, 0.5, seg);
  REQUIRE(far_case.size() == 2);
  CHECK(far_case.positions[1] == Vec3(5, 0, 0));

  // highest-error vertex within min_dist -> second-highest chosen
  const KeyNodeSet blocked =
      insert_nodes(nodes, mesh, {0.1, 0.2, 0.9, 0.8}, 1, 0.5, seg);
  REQUIRE(blocked.size() == 2);
  CHECK(blocked.positions[1] == Vec3(5, 0, 0));

  // brute-force greedy oracle on a random instance
  oracle::Rng rng(66);
  const Mesh rmesh = oracle::random_mesh(rng, 50);
  KeyNodeSet rnodes = oracle::random_nodes(rng, 5);
  std::vector<double> err;
  for (int i = 0; i < 50; ++i) err.push_back(rng.uni(0, 1));
  const double min_dist = 0.4;
  const KeyNodeSet got = insert_nodes(rnodes, rmesh, err, 3, min_dist, seg);

  std::vector<int> order(50);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return err[size_t(a)] != err[size_t(b)] ? err[size_t(a)] > err[size_t(b)]
                                            : a < b;
  });
  std::vector<Vec3> placed(rnodes.positions.begin(), rnodes.positions.end());
  std::vector<Vec3> added;
  for (int v : order) {
    if (added.size() == 3) break;
    bool near = false;
    for (const Vec3& p : placed) {
      near |= (p - rmesh.vertices[size_t(v)]).norm() < min_dist;
    }
    if (near) continue;
    placed.push_back(rmesh.vertices[size_t(v)]);
    added.push_back(rmesh.vertices[size_t(v)]);
  }
  REQUIRE(got.size() == 5 + added.size());
  for (size_t k = 0; k < added.size(); ++k) {
    CHECK(got.positions[5 + k] == added[k]);
  }
  // spacing invariant
  for (size_t a = 5; a < got.size(); ++a) {
    for (size_t b = 0; b < got.size(); ++b) {
      if (a == b) continue;
      CHECK((got.positions[a] - got.positions[b]).norm() >= min_dist);
    }
  }
}

TEST_CASE("influence graph is the exact co-influence edge set") {
  InfluenceMap infl;
  infl.q = 3;
  infl.rows = {{{1, 0.4}, {2, 0.3}, {3, 0.3}}};
  const InfluenceGraph g = build_influence_graph(infl, 5);
  CHECK(g.edges == std::vector<std::pair<int, int>>{{1, 2}, {1, 3}, {2, 3}});

  InfluenceMap disjoint;
  disjoint.q = 1;
  disjoint.rows = {{{0, 1.0}}, {{1, 1.0}}};
  CHECK(build_influence_graph(disjoint, 2).edges.empty());

  // random map vs brute-force pairwise scan
  oracle::Rng rng(77);
  InfluenceMap rmap;
  rmap.q = 3;
  std::set<std::pair<int, int>> want;
  for (int i = 0; i < 40; ++i) {
    std::vector<InfluenceMap::Entry> row;
    for (int k = 0; k < 3; ++k) row.push_back({rng.geti(0, 9), 1.0 / 3});
    rmap.rows.push_back(row);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const int u = row[size_t(a)].node, v = row[size_t(b)].node;
        if (u < v) want.insert({u, v});
      }
    }
  }
  const InfluenceGraph rg = build_influence_graph(rmap, 10);
  CHECK(std::set<std::pair<int, int>>(rg.edges.begin(), rg.edges.end()) == want);
}

TEST_CASE("manual filtering separates the torso component") {
  SynthConfig scfg;
  scfg.frames = 1;
  const Mesh body = synthesize(scfg).frames[0];
  SegmentationConfig seg;
  seg.mode = SegMode::Manual;

  const KeyNodeSet nodes = init_nodes(body, 40, 2, seg);
  const InfluenceMap infl = build_influence_map(body, nodes, seg, 4);
  const InfluenceGraph graph = build_influence_graph(infl, int(nodes.size()));
  for (const auto& [a, b] : graph.edges) {
    const bool ta = nodes.labels[size_t(a)] == BodyPart::Torso;
    const bool tb = nodes.labels[size_t(b)] == BodyPart::Torso;
    CHECK(ta == tb);  // no torso/non-torso edge
  }

  // manual-mode rows reference only same-label nodes
  for (size_t i = 0; i < infl.rows.size(); ++i) {
    for (const auto& e : infl.rows[i]) {
      CHECK(nodes.labels[size_t(e.node)] == (*body.labels)[i]);
    }
  }
}

TEST_CASE("generate refines toward the target count") {
  SynthConfig scfg;
  scfg.frames = 4;
  scfg.scenario = "walker";
  scfg.density = 6;
  const Sequence seq = synthesize(scfg);

  GeneratorConfig gen;
  gen.target_count = 10;
  gen.init_factor = 1.6;
  gen.seg.mode = SegMode::Auto;
  gen.solver.max_outer_iters = 3;
  gen.solver.max_inner_iters = 15;
  gen.seed = 4;

  // static pair: converges immediately at the target count
  GeneratorConfig static_gen = gen;
  static_gen.target_count = 4;
  static_gen.init_factor = 1.0;
  const KeyNodeSet static_nodes =
      generate(seq.frames[0], seq.frames[0], static_gen);
  CHECK(static_nodes.size() == 4);

  const KeyNodeSet nodes = generate(seq.frames[0], seq.frames[3], gen);
  CHECK(nodes.size() == 10);
  CHECK(nodes.labels.size() == 10);
  CHECK(nodes.types.size() == 10);

  // determinism
  const KeyNodeSet again = generate(seq.frames[0], seq.frames[3], gen);
  CHECK(again.positions == nodes.positions);
}
