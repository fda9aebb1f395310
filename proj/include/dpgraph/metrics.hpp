#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpgraph/graph.hpp"
#include "dpgraph/rng.hpp"

namespace dpgraph {

// ---------------------------------------------------------------------------
// Reports

enum class ErrorKind { raw, absolute, relative, wasserstein };

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::raw: return "raw";
    case ErrorKind::absolute: return "absolute";
    case ErrorKind::relative: return "relative";
    case ErrorKind::wasserstein: return "wasserstein";
  }
  return "?";
}

inline ErrorKind parse_error_kind(std::string_view s) {
  if (s == "raw") return ErrorKind::raw;
  if (s == "absolute") return ErrorKind::absolute;
  if (s == "relative") return ErrorKind::relative;
  if (s == "wasserstein") return ErrorKind::wasserstein;
  throw std::invalid_argument("unknown error kind '" + std::string(s) + "'");
}

struct MetricValue {
  double value = 0.0;
  ErrorKind kind = ErrorKind::raw;
};

class MetricReport {
 public:
  void add(std::string name, double value, ErrorKind kind) {
    if (kind != ErrorKind::raw && !(value >= 0.0)) {
      throw std::invalid_argument("error metric '" + name + "' must be non-negative");
    }
    entries_[std::move(name)] = {value, kind};
  }

  const std::map<std::string, MetricValue>& entries() const { return entries_; }
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const MetricValue& at(const std::string& name) const { return entries_.at(name); }

 private:
  std::map<std::string, MetricValue> entries_;
};

enum class ErrorType { absolute, relative };

inline double error(ErrorType kind, double y, double yhat) {
  const double diff = std::abs(y - yhat);
  if (kind == ErrorType::absolute) return diff;
  if (y == 0.0) throw std::invalid_argument("relative error undefined for a zero true value");
  return diff / std::abs(y);
}

// ---------------------------------------------------------------------------
// Traversal helpers

namespace detail {

// Unweighted single-source distances; -1 marks unreachable nodes.
inline void bfs_distances(const Graph& g, NodeId source, std::vector<int>& dist, std::vector<NodeId>& queue) {
  dist.assign(g.num_nodes(), -1);
  queue.clear();
  dist[source] = 0;
  queue.push_back(source);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const NodeId u = queue[head];
    for (NodeId w : g.neighbors(u)) {
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        queue.push_back(w);
      }
    }
  }
}

// Brandes dependency accumulation: delta[v] = sum_t sigma_st(v) / sigma_st.
struct BrandesWorkspace {
  std::vector<int> dist;
  std::vector<double> sigma;
  std::vector<double> delta;
  std::vector<NodeId> order;
};

inline void brandes_single_source(const Graph& g, NodeId s, BrandesWorkspace& ws) {
  const std::size_t n = g.num_nodes();
  ws.dist.assign(n, -1);
  ws.sigma.assign(n, 0.0);
  ws.delta.assign(n, 0.0);
  ws.order.clear();
  ws.dist[s] = 0;
  ws.sigma[s] = 1.0;
  ws.order.push_back(s);
  for (std::size_t head = 0; head < ws.order.size(); ++head) {
    const NodeId v = ws.order[head];
    for (NodeId w : g.neighbors(v)) {
      if (ws.dist[w] < 0) {
        ws.dist[w] = ws.dist[v] + 1;
        ws.order.push_back(w);
      }
      if (ws.dist[w] == ws.dist[v] + 1) ws.sigma[w] += ws.sigma[v];
    }
  }
  for (std::size_t i = ws.order.size(); i-- > 1;) {
    const NodeId w = ws.order[i];
    for (NodeId v : g.neighbors(w)) {
      if (ws.dist[v] == ws.dist[w] - 1) {
        ws.delta[v] += ws.sigma[v] / ws.sigma[w] * (1.0 + ws.delta[w]);
      }
    }
  }
  ws.delta[s] = 0.0;
}

inline std::vector<std::size_t> triangle_counts(const Graph& g) {
  std::vector<std::size_t> t(g.num_nodes(), 0);
  for (auto [u, v] : g.edges()) {
    const auto a = g.neighbors(u);
    const auto b = g.neighbors(v);
    std::size_t common = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
      if (*i < *j) {
        ++i;
      } else if (*j < *i) {
        ++j;
      } else {
        ++common;
        ++i;
        ++j;
      }
    }
    t[u] += common;
    t[v] += common;
  }
  for (auto& x : t) x /= 2;
  return t;
}

}  // namespace detail

// Component id per node, ids in order of smallest member.
inline std::vector<std::size_t> connected_components(const Graph& g) {
  std::vector<std::size_t> comp(g.num_nodes(), std::numeric_limits<std::size_t>::max());
  std::vector<NodeId> stack;
  std::size_t next = 0;
  for (NodeId s = 0; s < g.num_nodes(); ++s) {
    if (comp[s] != std::numeric_limits<std::size_t>::max()) continue;
    comp[s] = next;
    stack.assign(1, s);
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (NodeId w : g.neighbors(u)) {
        if (comp[w] == std::numeric_limits<std::size_t>::max()) {
          comp[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return comp;
}

// ---------------------------------------------------------------------------
// Global statistics

inline double density(const Graph& g) {
  const auto n = static_cast<double>(g.num_nodes());
  if (g.num_nodes() < 2) throw std::invalid_argument("density needs at least two nodes");
  return static_cast<double>(g.num_edges()) / (n * (n - 1.0) / 2.0);
}

// |SD| / sum of reciprocal distances over all unordered pairs. Unreachable
// pairs count in |SD| and add nothing to the reciprocal sum.
inline double harmonic_diameter(const Graph& g) {
  const std::size_t n = g.num_nodes();
  if (n < 2) throw std::invalid_argument("harmonic diameter needs at least two nodes");
  double reciprocal = 0.0;
  std::vector<int> dist;
  std::vector<NodeId> queue;
  for (NodeId s = 0; s < n; ++s) {
    detail::bfs_distances(g, s, dist, queue);
    for (NodeId t : queue) {
      if (t > s) reciprocal += 1.0 / dist[t];
    }
  }
  if (reciprocal == 0.0) throw std::invalid_argument("harmonic diameter undefined: no reachable pairs");
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return pairs / reciprocal;
}

// Pearson correlation of endpoint degrees over both orientations of every
// edge. nullopt when undefined (no edges, or all endpoints share one degree).
inline std::optional<double> assortativity(const Graph& g) {
  if (g.num_edges() == 0) return std::nullopt;
  double sum = 0.0, sum_sq = 0.0, sum_prod = 0.0;
  for (auto [u, v] : g.edges()) {
    const auto du = static_cast<double>(g.degree(u));
    const auto dv = static_cast<double>(g.degree(v));
    sum += du + dv;
    sum_sq += du * du + dv * dv;
    sum_prod += 2.0 * du * dv;
  }
  const double count = 2.0 * static_cast<double>(g.num_edges());
  const double mean = sum / count;
  const double variance = sum_sq / count - mean * mean;
  if (!(variance > 1e-12 * std::max(1.0, mean * mean))) return std::nullopt;
  return std::clamp((sum_prod / count - mean * mean) / variance, -1.0, 1.0);
}

inline double modularity(const Graph& g, const Partition& c) {
  if (c.size() != g.num_nodes()) throw std::invalid_argument("partition size does not match graph");
  if (g.num_edges() == 0) throw std::invalid_argument("modularity undefined without edges");
  const std::size_t k = c.num_communities();
  std::vector<std::uint64_t> internal(k, 0), degree_sum(k, 0);
  for (auto [u, v] : g.edges()) {
    if (c[u] == c[v]) ++internal[c[u]];
  }
  for (NodeId v = 0; v < g.num_nodes(); ++v) degree_sum[c[v]] += g.degree(v);
  const auto m = static_cast<double>(g.num_edges());
  double fraction_inside = 0.0;
  double expected = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    fraction_inside += static_cast<double>(internal[i]) / m;
    const double share = static_cast<double>(degree_sum[i]) / (2.0 * m);
    expected += share * share;
  }
  return fraction_inside - expected;
}

// ---------------------------------------------------------------------------
// Local statistics

inline std::vector<double> degree_values(const Graph& g) {
  std::vector<double> out(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) out[v] = static_cast<double>(g.degree(v));
  return out;
}

// 2 T(v) / (deg (deg - 1)); zero for nodes of degree below two.
inline std::vector<double> clustering_coefficients(const Graph& g) {
  const auto triangles = detail::triangle_counts(g);
  std::vector<double> out(g.num_nodes(), 0.0);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const auto d = static_cast<double>(g.degree(v));
    if (g.degree(v) >= 2) out[v] = 2.0 * static_cast<double>(triangles[v]) / (d * (d - 1.0));
  }
  return out;
}

enum class CentralityMethod { exact, sampled };

struct CentralityMode {
  CentralityMethod method = CentralityMethod::exact;
  double target_rel_error = 0.01;
  // Normal quantile used in the per-node stopping rule.
  double confidence_z = 4.0;
  std::size_t min_samples = 32;
  std::size_t batch = 16;

  static CentralityMode exact() { return {}; }
  static CentralityMode sampled(double target = 0.01) {
    CentralityMode m;
    m.method = CentralityMethod::sampled;
    m.target_rel_error = target;
    return m;
  }
};

struct CentralityEstimate {
  std::vector<double> values;
  CentralityMethod method = CentralityMethod::exact;
  double target_rel_error = 0.0;
  std::size_t samples_used = 0;
};

namespace detail {

inline void check_mode(const CentralityMode& mode) {
  if (mode.method == CentralityMethod::sampled && !(mode.target_rel_error > 0.0)) {
    throw std::invalid_argument("target relative error must be positive");
  }
}

// Running sums for a without-replacement sample mean with finite population
// correction.
struct SampleMoments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t nonzero = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    if (x != 0.0) ++nonzero;
  }

  // True when z * SE(mean) <= target * mean for k draws out of a population
  // of `population`.
  bool precise(std::size_t k, std::size_t population, double target, double z) const {
    if (k >= population) return true;
    if (k < 2 || sum <= 0.0) return false;
    const double kd = static_cast<double>(k);
    const double mean = sum / kd;
    const double var = std::max(0.0, (sum_sq - kd * mean * mean) / (kd - 1.0));
    const double fpc = static_cast<double>(population - k) / static_cast<double>(population - 1);
    const double se = std::sqrt(var / kd * fpc);
    return z * se <= target * mean;
  }
};

}  // namespace detail

// Betweenness over unordered pairs {s, t} with s, t != v.
//
// Sampled mode draws sources without replacement in batches and stops once
// every node that can carry betweenness (some pair of its neighbours is
// non-adjacent) has a relative standard error, scaled by confidence_z, under
// the target. Nodes whose neighbourhood is a clique have betweenness exactly
// zero and need no samples. When the rule never settles all sources get
// used and the result is exact.
inline CentralityEstimate betweenness(const Graph& g, const CentralityMode& mode = CentralityMode::exact(),
                                      Rng rng = Rng(0)) {
  detail::check_mode(mode);
  const std::size_t n = g.num_nodes();
  CentralityEstimate out;
  out.method = mode.method;
  out.target_rel_error = mode.method == CentralityMethod::sampled ? mode.target_rel_error : 0.0;
  out.values.assign(n, 0.0);
  detail::BrandesWorkspace ws;

  if (mode.method == CentralityMethod::exact) {
    for (NodeId s = 0; s < n; ++s) {
      detail::brandes_single_source(g, s, ws);
      for (NodeId v = 0; v < n; ++v) out.values[v] += ws.delta[v];
    }
    for (auto& x : out.values) x /= 2.0;
    out.samples_used = n;
    return out;
  }

  const auto triangles = detail::triangle_counts(g);
  std::vector<NodeId> carriers;
  for (NodeId v = 0; v < n; ++v) {
    const std::size_t d = g.degree(v);
    if (d >= 2 && triangles[v] < d * (d - 1) / 2) carriers.push_back(v);
  }
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  rng.shuffle(std::span<NodeId>(order));

  std::vector<detail::SampleMoments> moments(n);
  std::size_t k = 0;
  while (k < n) {
    const std::size_t stop = std::min(n, k + mode.batch);
    for (; k < stop; ++k) {
      detail::brandes_single_source(g, order[k], ws);
      for (NodeId v = 0; v < n; ++v) moments[v].add(ws.delta[v]);
    }
    if (k < std::min(n, mode.min_samples)) continue;
    const bool settled = std::all_of(carriers.begin(), carriers.end(), [&](NodeId v) {
      return moments[v].nonzero >= 10 &&
             moments[v].precise(k, n, mode.target_rel_error, mode.confidence_z);
    });
    if (settled) break;
  }
  const double scale = static_cast<double>(n) / static_cast<double>(k) / 2.0;
  for (NodeId v = 0; v < n; ++v) out.values[v] = moments[v].sum * scale;
  out.samples_used = k;
  return out;
}

// (r - 1) / sum of distances within the node's component of size r; zero for
// isolated nodes. Sampled mode estimates the distance sums from pivots drawn
// without replacement, with the same stopping rule as betweenness.
inline CentralityEstimate closeness(const Graph& g, const CentralityMode& mode = CentralityMode::exact(),
                                    Rng rng = Rng(0)) {
  detail::check_mode(mode);
  const std::size_t n = g.num_nodes();
  if (n < 2) throw std::invalid_argument("closeness needs at least two nodes");
  CentralityEstimate out;
  out.method = mode.method;
  out.target_rel_error = mode.method == CentralityMethod::sampled ? mode.target_rel_error : 0.0;
  out.values.assign(n, 0.0);

  const auto comp = connected_components(g);
  std::vector<std::size_t> comp_size(n, 0);
  for (auto c : comp) ++comp_size[c];

  std::vector<int> dist;
  std::vector<NodeId> queue;
  if (mode.method == CentralityMethod::exact) {
    for (NodeId v = 0; v < n; ++v) {
      const std::size_t r = comp_size[comp[v]];
      if (r < 2) continue;
      detail::bfs_distances(g, v, dist, queue);
      double total = 0.0;
      for (NodeId u : queue) total += dist[u];
      out.values[v] = static_cast<double>(r - 1) / total;
    }
    out.samples_used = n;
    return out;
  }

  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  rng.shuffle(std::span<NodeId>(order));
  std::vector<detail::SampleMoments> moments(n);
  std::vector<std::size_t> drawn(n, 0);  // pivots drawn per component id
  std::size_t k = 0;
  while (k < n) {
    const std::size_t stop = std::min(n, k + mode.batch);
    for (; k < stop; ++k) {
      const NodeId pivot = order[k];
      ++drawn[comp[pivot]];
      detail::bfs_distances(g, pivot, dist, queue);
      for (NodeId u : queue) moments[u].add(dist[u]);
    }
    if (k < std::min(n, mode.min_samples)) continue;
    bool settled = true;
    for (NodeId v = 0; v < n && settled; ++v) {
      const std::size_t r = comp_size[comp[v]];
      if (r < 2) continue;
      const std::size_t kc = drawn[comp[v]];
      settled = kc >= std::min(r, mode.min_samples) &&
                moments[v].precise(kc, r, mode.target_rel_error, mode.confidence_z);
    }
    if (settled) break;
  }
  for (NodeId v = 0; v < n; ++v) {
    const std::size_t r = comp_size[comp[v]];
    const std::size_t kc = drawn[comp[v]];
    if (r < 2 || kc == 0 || moments[v].sum == 0.0) continue;
    const double total = moments[v].sum / static_cast<double>(kc) * static_cast<double>(r);
    out.values[v] = static_cast<double>(r - 1) / total;
  }
  out.samples_used = k;
  return out;
}

// Power iteration; dangling mass is spread uniformly. Scores sum to 1.
inline std::vector<double> pagerank(const Graph& g, double damping = 0.85, double tol = 1e-10,
                                    std::size_t max_iterations = 10000) {
  if (!(damping > 0.0 && damping < 1.0)) throw std::invalid_argument("damping must lie in (0, 1)");
  const std::size_t n = g.num_nodes();
  if (n == 0) throw std::invalid_argument("pagerank needs at least one node");
  const double nd = static_cast<double>(n);
  std::vector<double> x(n, 1.0 / nd), next(n);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    double dangling = 0.0;
    for (NodeId v = 0; v < n; ++v) {
      if (g.degree(v) == 0) dangling += x[v];
    }
    const double base = (1.0 - damping) / nd + damping * dangling / nd;
    for (NodeId v = 0; v < n; ++v) {
      double incoming = 0.0;
      for (NodeId u : g.neighbors(v)) incoming += x[u] / static_cast<double>(g.degree(u));
      next[v] = base + damping * incoming;
    }
    double residual = 0.0;
    for (NodeId v = 0; v < n; ++v) residual += std::abs(next[v] - x[v]);
    x.swap(next);
    if (residual < tol) break;
  }
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  for (auto& s : x) s /= total;
  return x;
}

// ---------------------------------------------------------------------------
// Communities

namespace detail {

struct WeightedGraph {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;  // no self entries
  std::vector<double> self_loops;                                  // counted twice in strength
  double total_strength = 0.0;                                     // 2m

  std::size_t size() const { return adj.size(); }
  double strength(std::size_t i) const {
    double s = self_loops[i];
    for (const auto& [j, w] : adj[i]) s += w;
    return s;
  }
};

inline WeightedGraph to_weighted(const Graph& g) {
  WeightedGraph wg;
  wg.adj.resize(g.num_nodes());
  wg.self_loops.assign(g.num_nodes(), 0.0);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    for (NodeId u : g.neighbors(v)) wg.adj[v].emplace_back(u, 1.0);
  }
  wg.total_strength = 2.0 * static_cast<double>(g.num_edges());
  return wg;
}

// One round of local moves; returns true if any node changed community.
inline bool louvain_local_moves(const WeightedGraph& wg, std::vector<std::uint32_t>& community, Rng& rng) {
  const std::size_t n = wg.size();
  const double m2 = wg.total_strength;
  std::vector<double> strength(n), tot(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    strength[i] = wg.strength(i);
    tot[community[i]] += strength[i];
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0U);
  rng.shuffle(std::span<std::uint32_t>(order));

  std::vector<double> link(n, 0.0);
  std::vector<std::uint32_t> touched;
  bool any_move = false;
  for (int pass = 0; pass < 1000; ++pass) {
    bool moved = false;
    for (std::uint32_t i : order) {
      const std::uint32_t own = community[i];
      touched.clear();
      for (const auto& [j, w] : wg.adj[i]) {
        const std::uint32_t c = community[j];
        if (link[c] == 0.0) touched.push_back(c);
        link[c] += w;
      }
      tot[own] -= strength[i];
      const double ki = strength[i];
      std::uint32_t best = own;
      double best_gain = link[own] - tot[own] * ki / m2;
      for (std::uint32_t c : touched) {
        const double gain = link[c] - tot[c] * ki / m2;
        if (gain > best_gain + 1e-12) {
          best = c;
          best_gain = gain;
        }
      }
      tot[best] += ki;
      community[i] = best;
      if (best != own) moved = true;
      for (std::uint32_t c : touched) link[c] = 0.0;
    }
    if (!moved) break;
    any_move = true;
  }
  return any_move;
}

inline std::size_t renumber(std::vector<std::uint32_t>& community) {
  std::vector<std::uint32_t> remap(community.size(), std::numeric_limits<std::uint32_t>::max());
  std::uint32_t next = 0;
  for (auto& c : community) {
    if (remap[c] == std::numeric_limits<std::uint32_t>::max()) remap[c] = next++;
    c = remap[c];
  }
  return next;
}

inline WeightedGraph aggregate(const WeightedGraph& wg, const std::vector<std::uint32_t>& community,
                               std::size_t k) {
  WeightedGraph out;
  out.adj.resize(k);
  out.self_loops.assign(k, 0.0);
  out.total_strength = wg.total_strength;
  std::vector<std::map<std::uint32_t, double>> links(k);
  for (std::size_t i = 0; i < wg.size(); ++i) {
    const auto ci = community[i];
    out.self_loops[ci] += wg.self_loops[i];
    for (const auto& [j, w] : wg.adj[i]) {
      const auto cj = community[j];
      if (ci == cj) {
        out.self_loops[ci] += w;
      } else {
        links[ci][cj] += w;
      }
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (const auto& [d, w] : links[c]) out.adj[c].emplace_back(d, w);
  }
  return out;
}

}  // namespace detail

// Multi-level Louvain. Starts from `initial` when given, otherwise from
// singletons; every move strictly raises modularity, so the result never
// scores below the starting partition. Deterministic given the generator.
inline Partition louvain(const Graph& g, Rng& rng, const std::optional<Partition>& initial = std::nullopt) {
  const std::size_t n = g.num_nodes();
  if (g.num_edges() == 0) throw std::invalid_argument("louvain needs at least one edge");
  std::vector<std::uint32_t> membership(n);
  if (initial) {
    if (initial->size() != n) throw std::invalid_argument("initial partition size mismatch");
    for (std::size_t v = 0; v < n; ++v) membership[v] = (*initial)[v];
  } else {
    std::iota(membership.begin(), membership.end(), 0U);
  }

  detail::WeightedGraph level = detail::to_weighted(g);
  std::vector<std::uint32_t> community = membership;
  for (int depth = 0; depth < 64; ++depth) {
    const bool moved = detail::louvain_local_moves(level, community, rng);
    const std::size_t k = detail::renumber(community);
    if (depth == 0) {
      membership = community;
    } else {
      for (auto& m : membership) m = community[m];
    }
    if (k == level.size() || (depth > 0 && !moved)) break;
    level = detail::aggregate(level, community, k);
    community.resize(k);
    std::iota(community.begin(), community.end(), 0U);
  }
  std::vector<std::size_t> labels(membership.begin(), membership.end());
  return Partition::from_labels(std::span<const std::size_t>(labels));
}

// Adjusted Rand index. Returns 1 when both partitions are trivial in the same
// way (the chance-corrected ratio is 0/0).
inline double ari(const Partition& a, const Partition& b) {
  if (a.size() != b.size()) throw std::invalid_argument("partitions differ in size");
  const std::size_t n = a.size();
  auto choose2 = [](std::uint64_t x) { return x * (x - (x > 0 ? 1 : 0)) / 2; };
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> joint;
  std::vector<std::uint64_t> size_a(a.num_communities(), 0), size_b(b.num_communities(), 0);
  for (std::size_t v = 0; v < n; ++v) {
    ++joint[{a[v], b[v]}];
    ++size_a[a[v]];
    ++size_b[b[v]];
  }
  std::uint64_t index = 0, sum_a = 0, sum_b = 0;
  for (const auto& [key, count] : joint) index += choose2(count);
  for (auto s : size_a) sum_a += choose2(s);
  for (auto s : size_b) sum_b += choose2(s);
  const double pairs = static_cast<double>(choose2(n));
  const double expected = pairs > 0 ? static_cast<double>(sum_a) * static_cast<double>(sum_b) / pairs : 0.0;
  const double maximum = 0.5 * (static_cast<double>(sum_a) + static_cast<double>(sum_b));
  const double denominator = maximum - expected;
  if (denominator == 0.0) return 1.0;
  return (static_cast<double>(index) - expected) / denominator;
}

// ---------------------------------------------------------------------------
// Distribution distance

// W1 between two empirical distributions: the integral over t in (0, 1) of
// |Q_a(t) - Q_b(t)|. Breakpoints i/|a| and j/|b| are merged exactly in integer
// arithmetic, so unequal sizes are handled without resampling.
inline double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1 needs non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const std::uint64_t na = x.size();
  const std::uint64_t nb = y.size();
  const auto scale = static_cast<double>(na) * static_cast<double>(nb);
  // Position in units of 1/(na*nb).
  std::uint64_t pos = 0;
  std::size_t i = 0, j = 0;
  double total = 0.0;
  while (i < na && j < nb) {
    const std::uint64_t next_a = (i + 1) * nb;
    const std::uint64_t next_b = (j + 1) * na;
    const std::uint64_t next = std::min(next_a, next_b);
    total += static_cast<double>(next - pos) * std::abs(x[i] - y[j]);
    pos = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return total / scale;
}

}  // namespace dpgraph
