#pragma once

#include <vector>

#include "dpgraph/graph.hpp"
#include "dpgraph/rng.hpp"

namespace fixtures {

using dpgraph::Edge;
using dpgraph::Graph;
using dpgraph::NodeId;

inline Graph complete(std::size_t n) {
  std::vector<Edge> e;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) e.emplace_back(u, v);
  return Graph::from_edges(n, e);
}

inline Graph path(std::size_t n) {
  std::vector<Edge> e;
  for (NodeId v = 1; v < n; ++v) e.emplace_back(v - 1, v);
  return Graph::from_edges(n, e);
}

inline Graph cycle(std::size_t n) {
  std::vector<Edge> e;
  for (NodeId v = 0; v < n; ++v) e.emplace_back(v, static_cast<NodeId>((v + 1) % n));
  return Graph::simplify(n, e);
}

// Node 0 is the centre.
inline Graph star(std::size_t n) {
  std::vector<Edge> e;
  for (NodeId v = 1; v < n; ++v) e.emplace_back(0, v);
  return Graph::from_edges(n, e);
}

// Disjoint copies of K_k.
inline Graph cliques(std::size_t count, std::size_t k) {
  std::vector<Edge> e;
  for (NodeId c = 0; c < count; ++c)
    for (NodeId u = 0; u < k; ++u)
      for (NodeId v = u + 1; v < k; ++v) e.emplace_back(c * k + u, c * k + v);
  return Graph::from_edges(count * k, e);
}

inline Graph gnp(std::size_t n, double p, dpgraph::Rng& rng) {
  std::vector<Edge> e;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (rng.uniform() < p) e.emplace_back(u, v);
  return Graph::from_edges(n, e);
}

// Applies node permutation perm (old -> new).
inline Graph relabel(const Graph& g, const std::vector<NodeId>& perm) {
  std::vector<Edge> e;
  for (auto [u, v] : g.edges()) e.emplace_back(perm[u], perm[v]);
  return Graph::simplify(g.num_nodes(), e);
}

}  // namespace fixtures
