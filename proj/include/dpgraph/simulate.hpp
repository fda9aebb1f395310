#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <queue>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "dpgraph/graph.hpp"
#include "dpgraph/metrics.hpp"
#include "dpgraph/rng.hpp"

namespace dpgraph {

// Independent-cascade settings. The activation probability is a declared
// setting: spread comparisons only mean something at a fixed value.
struct CascadeConfig {
  double edge_prob = 0.1;
  double seed_fraction = 0.01;
  std::size_t num_sims = 1000;

  void validate() const {
    if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) throw std::invalid_argument("edge_prob must lie in [0, 1]");
    if (!(seed_fraction > 0.0 && seed_fraction <= 1.0)) {
      throw std::invalid_argument("seed_fraction must lie in (0, 1]");
    }
    if (num_sims < 1) throw std::invalid_argument("num_sims must be at least 1");
  }
};

struct CascadeResult {
  double mean_fraction = 0.0;
  double std_error = 0.0;  // of the mean, across simulations
  std::size_t runs = 0;
};

// Mean fraction of nodes activated over cfg.num_sims independent runs. Each
// newly active node gets one chance to activate each inactive neighbour.
inline CascadeResult independent_cascade(const Graph& g, std::span<const NodeId> seeds,
                                         const CascadeConfig& cfg, Rng& rng) {
  cfg.validate();
  if (seeds.empty()) throw std::invalid_argument("independent cascade needs at least one seed");
  const std::size_t n = g.num_nodes();
  for (NodeId s : seeds) {
    if (s >= n) throw std::invalid_argument("seed out of range");
  }
  std::vector<std::uint32_t> stamp(n, 0);
  std::vector<NodeId> frontier;
  std::uint64_t activated = 0;
  double sum_sq = 0.0;
  for (std::uint32_t run = 1; run <= cfg.num_sims; ++run) {
    frontier.clear();
    for (NodeId s : seeds) {
      if (stamp[s] != run) {
        stamp[s] = run;
        frontier.push_back(s);
      }
    }
    for (std::size_t head = 0; head < frontier.size(); ++head) {
      const NodeId u = frontier[head];
      for (NodeId w : g.neighbors(u)) {
        if (stamp[w] != run && rng.uniform() < cfg.edge_prob) {
          stamp[w] = run;
          frontier.push_back(w);
        }
      }
    }
    activated += frontier.size();
    const double fraction = static_cast<double>(frontier.size()) / static_cast<double>(n);
    sum_sq += fraction * fraction;
  }
  CascadeResult out;
  out.runs = cfg.num_sims;
  const auto r = static_cast<double>(cfg.num_sims);
  out.mean_fraction = static_cast<double>(activated) / (r * static_cast<double>(n));
  if (cfg.num_sims > 1) {
    const double var = std::max(0.0, (sum_sq - r * out.mean_fraction * out.mean_fraction) / (r - 1.0));
    out.std_error = std::sqrt(var / r);
  }
  return out;
}

inline std::size_t seed_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must lie in (0, 1]");
  const double raw = fraction * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

// Lazy greedy (CELF) seed selection. Spread is estimated on cfg.num_sims
// sampled live-edge worlds shared by every candidate; on an undirected graph
// a world's reach from a seed set is the union of the seeds' components, so
// marginal gains are exact integer sums over uncovered components.
inline std::vector<NodeId> select_seeds(const Graph& g, double fraction, const CascadeConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = g.num_nodes();
  const std::size_t k = seed_count(n, fraction);
  const std::size_t worlds = cfg.num_sims;

  // component id per node per world, and component sizes
  std::vector<std::uint32_t> comp(worlds * n);
  std::vector<std::vector<std::uint32_t>> sizes(worlds);
  std::vector<std::uint32_t> parent(n);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t w = 0; w < worlds; ++w) {
    std::iota(parent.begin(), parent.end(), 0U);
    for (auto [u, v] : g.edges()) {
      if (rng.uniform() < cfg.edge_prob) {
        const auto a = find(u), b = find(v);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
    auto& sz = sizes[w];
    std::vector<std::uint32_t> label(n, UINT32_MAX);
    for (NodeId v = 0; v < n; ++v) {
      const auto root = find(v);
      if (label[root] == UINT32_MAX) {
        label[root] = static_cast<std::uint32_t>(sz.size());
        sz.push_back(0);
      }
      comp[w * n + v] = label[root];
      ++sz[label[root]];
    }
  }

  std::vector<std::vector<char>> covered(worlds);
  for (std::size_t w = 0; w < worlds; ++w) covered[w].assign(sizes[w].size(), 0);
  auto marginal = [&](NodeId v) {
    std::uint64_t total = 0;
    for (std::size_t w = 0; w < worlds; ++w) {
      const auto c = comp[w * n + v];
      if (!covered[w][c]) total += sizes[w][c];
    }
    return total;
  };

  // (gain, -id) max-heap; ties resolve to the smaller node id.
  using Entry = std::tuple<std::uint64_t, std::int64_t, std::size_t>;  // gain, -id, round
  std::priority_queue<Entry> heap;
  for (NodeId v = 0; v < n; ++v) heap.emplace(marginal(v), -static_cast<std::int64_t>(v), 0);

  std::vector<NodeId> seeds;
  while (seeds.size() < k) {
    auto [gain, neg_id, round] = heap.top();
    heap.pop();
    const auto v = static_cast<NodeId>(-neg_id);
    if (round == seeds.size()) {
      seeds.push_back(v);
      for (std::size_t w = 0; w < worlds; ++w) covered[w][comp[w * n + v]] = 1;
    } else {
      heap.emplace(marginal(v), neg_id, seeds.size());
    }
  }
  return seeds;
}

// Expected activated fraction from CELF-selected seeds. Seed selection draws
// from rng.split(1) and the cascade runs from rng.split(2).
inline double spread_fraction(const Graph& g, const CascadeConfig& cfg, const Rng& rng) {
  if (g.num_nodes() == 0) throw std::invalid_argument("spread needs a non-empty graph");
  Rng select_stream = rng.split(1);
  Rng run_stream = rng.split(2);
  const auto seeds = select_seeds(g, cfg.seed_fraction, cfg, select_stream);
  return independent_cascade(g, seeds, cfg, run_stream).mean_fraction;
}

// |spread(g) - spread(g_priv)| as a fraction of each graph's node count, with
// seeds chosen independently on each graph. Both sides draw from the same
// streams, so identical graphs give exactly zero.
inline double spread_error(const Graph& g, const Graph& g_priv, const CascadeConfig& cfg, const Rng& rng) {
  return std::abs(spread_fraction(g, cfg, rng) - spread_fraction(g_priv, cfg, rng));
}

// ---------------------------------------------------------------------------
// Rankings

struct RankedList {
  std::vector<NodeId> order;  // best first
  std::vector<double> scores;  // indexed by node id
};

// Descending score, ascending node id among equal scores.
inline RankedList rank_by_score(std::vector<double> scores) {
  RankedList r;
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), NodeId{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](NodeId a, NodeId b) { return scores[a] > scores[b]; });
  r.scores = std::move(scores);
  return r;
}

inline double dcg(std::span<const double> gains, std::span<const NodeId> order) {
  double total = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    total += gains[order[i]] / std::log2(static_cast<double>(i) + 2.0);
  }
  return total;
}

// DCG of `predicted` under the true gains, over DCG of the ideal order.
inline double ndcg(std::span<const double> true_gains, std::span<const NodeId> predicted) {
  if (predicted.size() != true_gains.size()) throw std::invalid_argument("ranking size mismatch");
  const RankedList ideal = rank_by_score(std::vector<double>(true_gains.begin(), true_gains.end()));
  const double best = dcg(true_gains, ideal.order);
  if (best == 0.0) throw std::invalid_argument("ndcg undefined for all-zero gains");
  return dcg(true_gains, predicted) / best;
}

inline double pagerank_ndcg(const Graph& g, const Graph& g_priv) {
  if (g.num_nodes() != g_priv.num_nodes()) {
    throw std::invalid_argument("pagerank NDCG needs graphs on the same node set");
  }
  const auto gains = pagerank(g);
  const RankedList predicted = rank_by_score(pagerank(g_priv));
  return ndcg(gains, predicted.order);
}

// ---------------------------------------------------------------------------

inline double predictive_error(double on_original, double on_private) {
  if (!(on_original >= 0.0 && on_original <= 1.0 && on_private >= 0.0 && on_private <= 1.0)) {
    throw std::invalid_argument("predictive scores must lie in [0, 1]");
  }
  return std::abs(on_original - on_private);
}

// Largest prediction advantage over a coin flip an eps-DP release allows when
// the prediction target is the protected record: (e^eps - 1) / 2.
inline double advantage_bound(double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
  return std::expm1(epsilon) / 2.0;
}

}  // namespace dpgraph
