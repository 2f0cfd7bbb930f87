#include "bmkn/generator.hpp"

#include <algorithm>
#include <cmath>

namespace bmkn {

KeyNodeSet generate(const Mesh& source, const Mesh& target,
                    const GeneratorConfig& cfg) {
  if (cfg.target_count < 1) throw ConfigError("target_count must be >= 1");
  const int init_count = std::min<int>(
      int(source.vertex_count()),
      std::max(cfg.target_count,
               int(std::lround(cfg.target_count * cfg.init_factor))));

  KeyNodeSet nodes = init_nodes(source, init_count, cfg.seed, cfg.seg);

  for (int round = 0; round < cfg.max_rounds; ++round) {
    const InfluenceMap infl =
        build_influence_map(source, nodes, cfg.seg, cfg.q);
    const InfluenceGraph graph =
        build_influence_graph(infl, int(nodes.size()));
    const FitResult fit = fit_transforms(source, target, nodes, cfg.fit_mask,
                                         cfg.solver, cfg.seg, infl, graph);

    const int count = int(nodes.size());
    if (count == cfg.target_count) break;

    if (count > cfg.target_count) {
      const std::vector<double> node_err =
          per_node_errors(infl, count, fit.per_vertex_error);
      const int batch = std::min(cfg.prune_batch, count - cfg.target_count);
      nodes = prune_nodes(nodes, infl, node_err, batch);
      nodes.assign_labels(source, cfg.seg);
    } else {
      const int deficit = cfg.target_count - count;
      double min_dist = default_min_insert_dist(nodes);
      KeyNodeSet grown = nodes;
      for (int attempt = 0; attempt < 4; ++attempt) {
        grown = insert_nodes(nodes, source, fit.per_vertex_error, deficit,
                             min_dist, cfg.seg);
        if (grown.size() > nodes.size()) break;
        min_dist *= 0.5;  // threshold starves insertion; relax it
      }
      if (grown.size() == nodes.size()) break;  // cannot grow further
      nodes = grown;
    }
  }
  nodes.assign_labels(source, cfg.seg);
  return nodes;
}

}  // namespace bmkn
