#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpgraph/dp.hpp"
#include "dpgraph/error.hpp"
#include "dpgraph/graph.hpp"
#include "dpgraph/rng.hpp"

namespace dpgraph {

enum class Transformation { perturbation, perturb_then_generate };

struct MechanismDescriptor {
  std::string id;
  PrivacyParams params;
  Transformation transformation;
  std::string notes;
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// log(e^x - 1) for x > 0, stable for large x.
inline double log_expm1(double x) {
  return x > 1.0 ? x + std::log1p(-std::exp(-x)) : std::log(std::expm1(x));
}

inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -INFINITY) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Edge randomized response (local model)

struct EdgeRrOptions {
  // Keep only a uniformly random subset of the noisy edges, sized to the
  // unbiased estimate of the true edge count. Off by default: the raw output
  // shows the density inflation this channel causes.
  bool project_density = false;
};

// Flips every unordered pair's adjacency bit with probability 1 / (1 + e^eps).
inline Graph edge_rr(const Graph& g, const PrivacyParams& params, Rng& rng,
                     const EdgeRrOptions& options = {}) {
  detail::require(params.target() == PrivacyTarget::edge, "edge_rr protects edges");
  detail::require(params.trust() == TrustModel::local, "edge_rr is a local-model mechanism");
  const std::size_t n = g.num_nodes();
  detail::require(n >= 2, "edge_rr needs at least two nodes");
  const double flip = rr_flip_prob(params.epsilon());

  std::vector<Edge> out;
  for (NodeId u = 0; u + 1 < n; ++u) {
    const auto nb = g.neighbors(u);
    auto it = std::upper_bound(nb.begin(), nb.end(), u);
    for (NodeId v = u + 1; v < n; ++v) {
      bool bit = false;
      if (it != nb.end() && *it == v) {
        bit = true;
        ++it;
      }
      if (rng.uniform() < flip) bit = !bit;
      if (bit) out.emplace_back(u, v);
    }
  }

  if (options.project_density && flip < 0.5) {
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    const double estimate =
        (static_cast<double>(out.size()) - pairs * flip) / (1.0 - 2.0 * flip);
    const auto keep = static_cast<std::size_t>(
        std::clamp(std::round(estimate), 0.0, static_cast<double>(out.size())));
    rng.shuffle(std::span<Edge>(out));
    out.resize(keep);
  }
  return Graph::from_edges(n, std::move(out));
}

// ---------------------------------------------------------------------------
// Laplace-noised degrees fed to Chung-Lu (central model)

// Degree sequence + Laplace(2/eps), clamped to [0, n-1] and rounded. This is
// the only step that reads the sensitive graph.
inline std::vector<double> noisy_degrees(const Graph& g, double epsilon, Rng& rng) {
  detail::require(epsilon > 0.0, "epsilon must be positive");
  const std::size_t n = g.num_nodes();
  const double scale = laplace_scale(kDegreeSequenceEdgeSensitivity, epsilon);
  std::vector<double> out(n);
  for (NodeId v = 0; v < n; ++v) {
    double d = static_cast<double>(g.degree(v));
    if (scale > 0.0) d += laplace_noise(scale, rng);
    out[v] = std::round(std::clamp(d, 0.0, static_cast<double>(n - 1)));
  }
  return out;
}

inline Graph degree_laplace_chunglu(const Graph& g, const PrivacyParams& params, Rng& rng) {
  detail::require(params.target() == PrivacyTarget::edge, "deg-lap-cl protects edges");
  detail::require(params.trust() == TrustModel::central, "deg-lap-cl is a central-model mechanism");
  detail::require(g.num_nodes() >= 2, "deg-lap-cl needs at least two nodes");
  const Rng base = rng.split(rng());  // advances the caller's stream
  Rng noise_stream = base.split(0);
  Rng generator_stream = base.split(1);
  const std::vector<double> released = noisy_degrees(g, params.epsilon(), noise_stream);
  // Post-processing only from here on.
  return chung_lu_sample(released, generator_stream);
}

// ---------------------------------------------------------------------------
// Vertex perturbation node-DP

struct PiVMinP {
  double p_min = 0.0;
  double subtrahend = 0.0;      // (e^eps - 1) / (2^n - 1)
  double log_subtrahend = 0.0;
  bool binding = true;          // false when e^eps >= 2^n
};

// Smallest removal probability the vertex-perturbation constraints allow:
// p >= 1 - (e^eps - 1) / (2^n - 1). The subtrahend is formed in log space;
// for realistic n, p_min itself rounds to 1 in double precision, so callers
// that need the gap should read `subtrahend`.
inline PiVMinP pi_v_min_p(double epsilon, std::size_t n) {
  detail::require(epsilon > 0.0, "epsilon must be positive");
  detail::require(n >= 1, "node count must be positive");
  const double log_pow = static_cast<double>(n) * std::log(2.0);
  const double log_denominator = log_pow + std::log1p(-std::exp(-log_pow));  // log(2^n - 1)
  PiVMinP out;
  out.log_subtrahend = detail::log_expm1(epsilon) - log_denominator;
  if (out.log_subtrahend >= 0.0) {
    out.binding = false;
    out.p_min = 0.0;
    out.subtrahend = std::exp(out.log_subtrahend);
    return out;
  }
  out.subtrahend = std::exp(out.log_subtrahend);
  out.p_min = -std::expm1(out.log_subtrahend);
  return out;
}

// Removal probability p and addition fraction q for vertex perturbation.
// p is stored as log(1 - p) because feasible values sit within 2^-n of 1.
class PiVParams {
 public:
  PiVParams(double p, double q, std::size_t n, double epsilon)
      : PiVParams(checked_log_keep(p), q, n, epsilon, Tag{}) {}

  static PiVParams from_log_keep(double log_keep, double q, std::size_t n, double epsilon) {
    return PiVParams(log_keep, q, n, epsilon, Tag{});
  }

  // The feasible parameters with the most surviving vertices.
  static PiVParams tightest(double epsilon, std::size_t n, double q) {
    detail::require(epsilon > 0.0, "epsilon must be positive");
    detail::require(q > 0.0 && q < 1.0, "q must lie in (0, 1)");
    detail::require(n >= 1, "node count must be positive");
    const double log_pow = static_cast<double>(n) * std::log(2.0);
    // keep <= (e^eps - 1) / (2^n / (1 - q) - 1)
    const double log_scaled = log_pow - std::log1p(-q);
    const double log_den = log_scaled + std::log1p(-std::exp(-log_scaled));
    const double from_addition = detail::log_expm1(epsilon) - log_den;
    // keep <= 1 - e^-eps  (from 1/p <= e^eps)
    const double from_removal = std::log(-std::expm1(-epsilon));
    double log_keep = std::min(from_addition, from_removal);
    log_keep -= 1e-9;  // stay strictly inside the region after rounding
    return PiVParams(log_keep, q, n, epsilon, Tag{});
  }

  double p() const { return -std::expm1(log_keep_); }
  double keep() const { return std::exp(log_keep_); }
  double log_keep() const { return log_keep_; }
  double q() const { return q_; }
  std::size_t n() const { return n_; }

  // Both constraints, evaluated in log space.
  static bool feasible(double log_keep, double q, std::size_t n, double epsilon) {
    const double keep = std::exp(log_keep);
    const double log_p = std::log1p(-keep);
    if (-log_p > epsilon) return false;  // 1/p <= e^eps
    const double lhs = log_keep + static_cast<double>(n) * std::log(2.0) - std::log1p(-q);
    const double rhs = detail::log_add_exp(detail::log_expm1(epsilon), log_keep);  // log(e^eps - p)
    return lhs <= rhs;
  }

  bool feasible_for(double epsilon) const { return feasible(log_keep_, q_, n_, epsilon); }

 private:
  struct Tag {};

  PiVParams(double log_keep, double q, std::size_t n, double epsilon, Tag)
      : log_keep_(log_keep), q_(q), n_(n) {
    detail::require(epsilon > 0.0, "epsilon must be positive");
    detail::require(n >= 1, "node count must be positive");
    if (!(q > 0.0 && q < 1.0)) throw InfeasibleParams("q must lie in (0, 1)");
    if (!(log_keep < 0.0) || !std::isfinite(log_keep)) throw InfeasibleParams("p must lie in (0, 1)");
    if (!feasible(log_keep, q, n, epsilon)) {
      throw InfeasibleParams("p = 1 - " + std::to_string(std::exp(log_keep)) + ", q = " +
                             std::to_string(q) + " violate the vertex-perturbation constraints for n = " +
                             std::to_string(n) + " at epsilon = " + std::to_string(epsilon));
    }
  }

  static double checked_log_keep(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InfeasibleParams("p must lie in (0, 1)");
    return std::log1p(-p);
  }

  double log_keep_;
  double q_;
  std::size_t n_;
};

// Removal stage: the subgraph induced by surviving vertices, attributes dropped.
inline Graph pi_v_remove(const Graph& g, std::span<const NodeId> survivors) {
  return induced_subgraph(g.without_attributes(), survivors).graph;
}

// Addition stage: `count` vertices appended one at a time, each wired to every
// vertex already present with probability 1/2.
inline Graph pi_v_add(const Graph& g, std::size_t count, Rng& rng) {
  const std::size_t n = g.num_nodes();
  std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  for (std::size_t k = 0; k < count; ++k) {
    const auto fresh = static_cast<NodeId>(n + k);
    for (NodeId v = 0; v < fresh; ++v) {
      if (rng.uniform() < 0.5) edges.emplace_back(v, fresh);
    }
  }
  return Graph::from_edges(n + count, std::move(edges));
}

inline Graph pi_v_node_dp(const Graph& g, const PrivacyParams& params, const PiVParams& pi, Rng& rng) {
  detail::require(params.target() == PrivacyTarget::node, "pi-v protects nodes");
  if (pi.n() != g.num_nodes()) {
    throw std::invalid_argument("pi-v parameters were derived for a different node count");
  }
  if (!pi.feasible_for(params.epsilon())) {
    throw InfeasibleParams("pi-v parameters infeasible for the requested epsilon");
  }
  const double keep = pi.keep();
  std::vector<NodeId> survivors;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (rng.uniform() < keep) survivors.push_back(v);
  }
  const Graph kept = pi_v_remove(g, survivors);
  const auto added = static_cast<std::size_t>(std::ceil(pi.q() * static_cast<double>(g.num_nodes())));
  const Graph grown = pi_v_add(kept, added, rng);

  // Fresh ids: no correspondence with the input is kept.
  std::vector<NodeId> relabel(grown.num_nodes());
  std::iota(relabel.begin(), relabel.end(), NodeId{0});
  rng.shuffle(std::span<NodeId>(relabel));
  std::vector<Edge> edges;
  edges.reserve(grown.num_edges());
  for (auto [u, v] : grown.edges()) edges.emplace_back(relabel[u], relabel[v]);
  return Graph::from_edges(grown.num_nodes(), std::move(edges));
}

// ---------------------------------------------------------------------------
// Attribute randomized response

// Flips feature bit j with probability 1 / (1 + e^{eps_j}), where the eps_j
// split the budget across the d bits of a vector (even split by default).
inline Graph attr_rr(const Graph& g, const PrivacyParams& params, Rng& rng,
                     std::span<const double> split_weights = {}) {
  detail::require(params.target() == PrivacyTarget::node_attribute, "attr-rr protects node attributes");
  if (!g.features()) throw std::invalid_argument("attr-rr needs node features");
  FeatureMatrix features = *g.features();
  const std::size_t d = features.cols();
  if (d == 0) return g;

  std::vector<double> flip(d);
  if (split_weights.empty()) {
    std::fill(flip.begin(), flip.end(), rr_flip_prob(params.epsilon() / static_cast<double>(d)));
  } else {
    if (split_weights.size() != d) throw std::invalid_argument("one split weight per feature");
    const double total = std::accumulate(split_weights.begin(), split_weights.end(), 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      if (!(split_weights[j] > 0.0)) throw std::invalid_argument("split weights must be positive");
      flip[j] = rr_flip_prob(params.epsilon() * split_weights[j] / total);
    }
  }
  for (std::size_t i = 0; i < features.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (rng.uniform() < flip[j]) features(i, j) ^= 1;
    }
  }
  return g.with_features(std::move(features));
}

// ---------------------------------------------------------------------------
// Registry

struct MechanismOptions {
  double delta = 0.0;
  bool project_density = false;       // edge-rr
  double pi_q = 0.5;                  // pi-v
  std::optional<double> pi_p;         // pi-v; tightest feasible p when unset
  std::vector<double> attr_weights;   // attr-rr
};

struct MechanismInfo {
  std::string_view id;
  PrivacyTarget target;
  TrustModel trust;
  Transformation transformation;
  bool aligned_ids;  // output node v is input node v
  std::string_view notes;
};

inline constexpr MechanismInfo kMechanisms[] = {
    {"edge-rr", PrivacyTarget::edge, TrustModel::local, Transformation::perturbation, true,
     "randomized response on every adjacency bit"},
    {"deg-lap-cl", PrivacyTarget::edge, TrustModel::central, Transformation::perturb_then_generate, true,
     "Laplace-noised degree sequence fed to a Chung-Lu generator"},
    {"pi-v", PrivacyTarget::node, TrustModel::central, Transformation::perturbation, false,
     "vertex removal with probability p, then random vertex addition"},
    {"attr-rr", PrivacyTarget::node_attribute, TrustModel::local, Transformation::perturbation, true,
     "randomized response on binary node features, structure untouched"},
};

inline const MechanismInfo& mechanism_info(std::string_view id) {
  for (const auto& m : kMechanisms) {
    if (m.id == id) return m;
  }
  throw std::invalid_argument("unknown mechanism '" + std::string(id) + "'");
}

inline MechanismDescriptor describe(std::string_view id, double epsilon, double delta = 0.0) {
  const auto& info = mechanism_info(id);
  return {std::string(info.id), PrivacyParams(epsilon, delta, info.target, info.trust),
          info.transformation, std::string(info.notes)};
}

inline Graph privatize(std::string_view id, const Graph& g, double epsilon, Rng& rng,
                       const MechanismOptions& options = {}) {
  const auto& info = mechanism_info(id);
  const PrivacyParams params(epsilon, options.delta, info.target, info.trust);
  if (id == "edge-rr") return edge_rr(g, params, rng, {options.project_density});
  if (id == "deg-lap-cl") return degree_laplace_chunglu(g, params, rng);
  if (id == "pi-v") {
    const PiVParams pi = options.pi_p ? PiVParams(*options.pi_p, options.pi_q, g.num_nodes(), epsilon)
                                      : PiVParams::tightest(epsilon, g.num_nodes(), options.pi_q);
    return pi_v_node_dp(g, params, pi, rng);
  }
  return attr_rr(g, params, rng, options.attr_weights);
}

}  // namespace dpgraph
