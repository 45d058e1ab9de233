#pragma once

// Small generated datasets for tests and smoke runs.

#include <cstdint>
#include <vector>

#include "skr/graph.hpp"
#include "skr/rng.hpp"

namespace skr {

inline Graph make_clique(std::size_t n, int label) {
  Graph g;
  g.num_nodes = n;
  g.label = label;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) g.edges.push_back({u, v});
  return g;
}

inline Graph make_path(std::size_t n, int label) {
  Graph g;
  g.num_nodes = n;
  g.label = label;
  for (std::size_t u = 0; u + 1 < n; ++u) g.edges.push_back({u, u + 1});
  return g;
}

/// Alternating dense cliques (label 0, 5-8 nodes) and long paths (label 1,
/// 10-16 nodes) with degree one-hot features.
inline Dataset make_clique_path_dataset(std::size_t count, std::uint64_t seed) {
  Rng rng(seed, {0xc11ceULL});
  std::vector<Graph> graphs;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % 2 == 0) graphs.push_back(make_clique(5 + rng.below(4), 0));
    else graphs.push_back(make_path(10 + rng.below(7), 1));
  }
  auto ds = Dataset::from_graphs("clique-path", std::move(graphs));
  return degree_onehot_features(std::move(ds), default_max_degree(ds));
}

/// Erdos-Renyi graphs with random Gaussian node features and random labels.
inline Dataset make_random_dataset(std::size_t count, std::size_t min_nodes, std::size_t max_nodes,
                                   std::size_t feature_dim, double edge_prob, std::uint64_t seed) {
  Rng rng(seed, {0x7a2dULL});
  std::vector<Graph> graphs;
  for (std::size_t i = 0; i < count; ++i) {
    Graph g;
    g.num_nodes = min_nodes + rng.below(max_nodes - min_nodes + 1);
    g.label = static_cast<int>(i % 2);
    for (std::size_t u = 0; u < g.num_nodes; ++u)
      for (std::size_t v = u + 1; v < g.num_nodes; ++v)
        if (rng.uniform() < edge_prob) g.edges.push_back({u, v});
    g.feature_dim = feature_dim;
    g.features.resize(g.num_nodes * feature_dim);
    for (auto& f : g.features) f = rng.normal();
    graphs.push_back(std::move(g));
  }
  return Dataset::from_graphs("random", std::move(graphs));
}

}  // namespace skr
