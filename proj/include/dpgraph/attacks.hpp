#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpgraph/error.hpp"
#include "dpgraph/graph.hpp"
#include "dpgraph/rng.hpp"

namespace dpgraph {

// Injective map from private-graph node ids to original-graph node ids.
class NodeMapping {
 public:
  NodeMapping(std::size_t private_nodes, std::size_t original_nodes)
      : to_original_(private_nodes, kNoNode), to_private_(original_nodes, kNoNode) {}

  static NodeMapping identity(std::size_t n) {
    NodeMapping f(n, n);
    for (NodeId v = 0; v < n; ++v) f.set(v, v);
    return f;
  }

  void set(NodeId private_node, NodeId original_node) {
    if (private_node >= to_original_.size() || original_node >= to_private_.size()) {
      throw std::invalid_argument("mapping node out of range");
    }
    if (to_original_[private_node] != kNoNode || to_private_[original_node] != kNoNode) {
      throw std::invalid_argument("mapping must be injective");
    }
    to_original_[private_node] = original_node;
    to_private_[original_node] = private_node;
  }

  NodeId original_of(NodeId private_node) const { return to_original_.at(private_node); }
  NodeId private_of(NodeId original_node) const { return to_private_.at(original_node); }
  std::size_t private_size() const { return to_original_.size(); }
  std::size_t original_size() const { return to_private_.size(); }
  std::size_t mapped() const {
    return static_cast<std::size_t>(std::count_if(to_original_.begin(), to_original_.end(),
                                                  [](NodeId v) { return v != kNoNode; }));
  }

 private:
  std::vector<NodeId> to_original_;
  std::vector<NodeId> to_private_;
};

struct AttackReport {
  std::string attack;
  std::string metric;
  double value = 0.0;
  double epsilon = 0.0;
  std::size_t trial = 0;
};

// ---------------------------------------------------------------------------
// Edge membership inference

struct LabeledPair {
  Edge pair;
  bool is_edge = false;
};

struct MembershipResult {
  double baseline_accuracy = 0.0;          // predict edge iff the pair is an edge of g_priv
  double common_neighbor_accuracy = 0.0;   // thresholded common-neighbour count in g_priv
  double threshold = 0.0;                  // predict edge iff score >= threshold
};

namespace detail {

inline void require_balanced(std::span<const LabeledPair> pairs, const char* what) {
  const auto positives = std::count_if(pairs.begin(), pairs.end(), [](const LabeledPair& p) { return p.is_edge; });
  if (pairs.empty() || 2 * static_cast<std::size_t>(positives) != pairs.size()) {
    throw std::invalid_argument(std::string(what) + " must hold equally many edges and non-edges");
  }
}

inline std::size_t common_neighbors(const Graph& g, NodeId u, NodeId v) {
  const auto a = g.neighbors(u);
  const auto b = g.neighbors(v);
  std::size_t count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

inline double accuracy_at(std::span<const double> scores, std::span<const LabeledPair> pairs, double threshold) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) correct += (scores[i] >= threshold) == pairs[i].is_edge;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

}  // namespace detail

// Both pair sets are labelled against the original graph, share node ids with
// g_priv, and must be balanced. The common-neighbour threshold is the
// calibration-optimal one (smallest among equals) and is then applied to the
// evaluation pairs.
inline MembershipResult membership_inference(const Graph& g_priv, std::span<const LabeledPair> eval_pairs,
                                             std::span<const LabeledPair> calibration_pairs) {
  detail::require_balanced(eval_pairs, "evaluation pairs");
  detail::require_balanced(calibration_pairs, "calibration pairs");
  const std::size_t n = g_priv.num_nodes();
  auto scores_of = [&](std::span<const LabeledPair> pairs) {
    std::vector<double> s;
    s.reserve(pairs.size());
    for (const auto& p : pairs) {
      if (p.pair.first >= n || p.pair.second >= n) throw std::invalid_argument("pair outside the private graph");
      s.push_back(static_cast<double>(detail::common_neighbors(g_priv, p.pair.first, p.pair.second)));
    }
    return s;
  };

  MembershipResult r;
  std::size_t correct = 0;
  for (const auto& p : eval_pairs) {
    if (p.pair.first >= n || p.pair.second >= n) throw std::invalid_argument("pair outside the private graph");
    correct += g_priv.has_edge(p.pair.first, p.pair.second) == p.is_edge;
  }
  r.baseline_accuracy = static_cast<double>(correct) / static_cast<double>(eval_pairs.size());

  const auto calib = scores_of(calibration_pairs);
  std::vector<double> candidates(calib);
  candidates.push_back(std::numeric_limits<double>::infinity());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best = -1.0;
  for (double t : candidates) {
    const double acc = detail::accuracy_at(calib, calibration_pairs, t);
    if (acc > best) {
      best = acc;
      r.threshold = t;
    }
  }
  r.common_neighbor_accuracy = detail::accuracy_at(scores_of(eval_pairs), eval_pairs, r.threshold);
  return r;
}

struct MembershipPairs {
  std::vector<LabeledPair> eval;
  std::vector<LabeledPair> calibration;
};

// Two disjoint balanced pair sets drawn from g: `per_class` edges and
// `per_class` non-edges each.
inline MembershipPairs sample_membership_pairs(const Graph& g, std::size_t per_class, Rng& rng) {
  const std::size_t n = g.num_nodes();
  const std::size_t m = g.num_edges();
  const double all_pairs = 0.5 * static_cast<double>(n) * (static_cast<double>(n) - 1.0);
  if (per_class == 0) throw std::invalid_argument("per_class must be positive");
  if (2 * per_class > m || static_cast<double>(2 * per_class) > all_pairs - static_cast<double>(m)) {
    throw DataError("graph too small for the requested membership pair sets");
  }
  std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  rng.shuffle(std::span<Edge>(edges));
  std::set<std::pair<NodeId, NodeId>> taken;
  std::vector<Edge> non_edges;
  while (non_edges.size() < 2 * per_class) {
    auto u = static_cast<NodeId>(rng.uniform_int(n));
    auto v = static_cast<NodeId>(rng.uniform_int(n));
    if (u == v || g.has_edge(u, v)) continue;
    if (u > v) std::swap(u, v);
    if (taken.emplace(u, v).second) non_edges.emplace_back(u, v);
  }
  MembershipPairs out;
  for (std::size_t i = 0; i < per_class; ++i) {
    out.eval.push_back({edges[i], true});
    out.eval.push_back({non_edges[i], false});
    out.calibration.push_back({edges[per_class + i], true});
    out.calibration.push_back({non_edges[per_class + i], false});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Edge-set reconstruction

// ||A1 - A2||_F / ||A1||_F. Each undirected edge is two adjacency entries,
// so this is sqrt(|E1 xor E2| / |E1|).
inline double reconstruction_rae(const Graph& original, const Graph& reconstructed) {
  if (original.num_nodes() != reconstructed.num_nodes()) {
    throw std::invalid_argument("reconstruction error needs graphs on the same node set");
  }
  if (original.num_edges() == 0) throw DataError("reconstruction error undefined for an edgeless original");
  const auto a = original.edges();
  const auto b = reconstructed.edges();
  std::vector<Edge> diff;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
  return std::sqrt(static_cast<double>(diff.size()) / static_cast<double>(a.size()));
}

// Takes the released edge set as the estimate.
inline Graph identity_reconstruction(const Graph& g_priv) { return g_priv; }

// ---------------------------------------------------------------------------
// Seed-free de-anonymization

namespace detail {

struct Signature {
  std::size_t degree;
  std::vector<std::size_t> neighbor_degrees;  // descending
  NodeId id;
};

inline std::vector<Signature> ranked_signatures(const Graph& g) {
  std::vector<Signature> sig(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    sig[v].degree = g.degree(v);
    sig[v].id = v;
    for (NodeId w : g.neighbors(v)) sig[v].neighbor_degrees.push_back(g.degree(w));
    std::sort(sig[v].neighbor_degrees.begin(), sig[v].neighbor_degrees.end(), std::greater<>());
  }
  std::sort(sig.begin(), sig.end(), [](const Signature& a, const Signature& b) {
    if (a.degree != b.degree) return a.degree > b.degree;
    if (a.neighbor_degrees != b.neighbor_degrees) return a.neighbor_degrees > b.neighbor_degrees;
    return a.id < b.id;
  });
  return sig;
}

}  // namespace detail

// Sorts both graphs' nodes by (degree, neighbour-degree multiset), largest
// first, and pairs them off rank by rank. Extra nodes on the longer side stay
// unmapped.
inline NodeMapping seedfree_deanonymize(const Graph& original, const Graph& g_priv) {
  if (original.num_nodes() == 0 || g_priv.num_nodes() == 0) {
    throw std::invalid_argument("de-anonymization needs non-empty graphs");
  }
  const auto a = detail::ranked_signatures(original);
  const auto b = detail::ranked_signatures(g_priv);
  NodeMapping f(g_priv.num_nodes(), original.num_nodes());
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) f.set(b[i].id, a[i].id);
  return f;
}

namespace detail {

// |f(E1) ∩ E2|: original edges whose endpoints both map to a private edge.
inline std::size_t conserved_edges(const Graph& original, const Graph& g_priv, const NodeMapping& f) {
  if (f.original_size() != original.num_nodes() || f.private_size() != g_priv.num_nodes()) {
    throw std::invalid_argument("mapping does not match the graphs");
  }
  std::size_t conserved = 0;
  for (auto [u, v] : original.edges()) {
    const NodeId pu = f.private_of(u), pv = f.private_of(v);
    if (pu != kNoNode && pv != kNoNode && g_priv.has_edge(pu, pv)) ++conserved;
  }
  return conserved;
}

}  // namespace detail

// Percentage of original edges preserved under f. 0 for an edgeless original.
inline double edge_correctness(const Graph& original, const Graph& g_priv, const NodeMapping& f) {
  const std::size_t conserved = detail::conserved_edges(original, g_priv, f);
  if (original.num_edges() == 0) return 0.0;
  return 100.0 * static_cast<double>(conserved) / static_cast<double>(original.num_edges());
}

// Symmetric substructure score: conserved edges over the union of the original
// edge set and the private edges induced on the mapped nodes, as a percentage.
inline double s3_score(const Graph& original, const Graph& g_priv, const NodeMapping& f) {
  const std::size_t conserved = detail::conserved_edges(original, g_priv, f);
  std::size_t induced = 0;
  for (auto [u, v] : g_priv.edges()) {
    if (f.original_of(u) != kNoNode && f.original_of(v) != kNoNode) ++induced;
  }
  const std::size_t denom = original.num_edges() + induced - conserved;
  if (denom == 0) throw DataError("S3 undefined: both edge sets are empty under the mapping");
  return 100.0 * static_cast<double>(conserved) / static_cast<double>(denom);
}

}  // namespace dpgraph
