#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>

#include "dpgraph/rng.hpp"

namespace dpgraph {

enum class PrivacyTarget { edge, node, node_attribute };
enum class TrustModel { central, local };

inline std::string_view to_string(PrivacyTarget t) {
  switch (t) {
    case PrivacyTarget::edge: return "edge";
    case PrivacyTarget::node: return "node";
    case PrivacyTarget::node_attribute: return "node-attribute";
  }
  return "?";
}

inline std::string_view to_string(TrustModel t) {
  return t == TrustModel::central ? "central" : "local";
}

// (epsilon, delta) budget plus what is protected and who is trusted.
// delta == 0 is pure DP.
class PrivacyParams {
 public:
  PrivacyParams(double epsilon, double delta, PrivacyTarget target, TrustModel trust)
      : epsilon_(epsilon), delta_(delta), target_(target), trust_(trust) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in [0, 1)");
  }

  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }
  PrivacyTarget target() const { return target_; }
  TrustModel trust() const { return trust_; }
  bool pure() const { return delta_ == 0.0; }

  friend bool operator==(const PrivacyParams&, const PrivacyParams&) = default;

 private:
  double epsilon_;
  double delta_;
  PrivacyTarget target_;
  TrustModel trust_;
};

struct SensitivitySpec {
  int p_norm = 1;
  double value = 0.0;

  SensitivitySpec(int norm, double v) : p_norm(norm), value(v) {
    if (norm != 1 && norm != 2) throw std::invalid_argument("sensitivity norm must be 1 or 2");
    if (!(v >= 0.0)) throw std::invalid_argument("sensitivity must be non-negative");
  }
};

// Edge-neighbouring graphs differ in one edge, which moves two entries of the
// degree sequence by one each.
inline const SensitivitySpec kDegreeSequenceEdgeSensitivity{1, 2.0};

// Laplace(0, scale) by inverse CDF.
inline double laplace_noise(double scale, Rng& rng) {
  if (!(scale > 0.0)) throw std::invalid_argument("Laplace scale must be positive");
  const double u = rng.uniform_open() - 0.5;
  return -scale * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
}

// Laplace scale achieving epsilon-DP for a query with the given L1 sensitivity.
inline double laplace_scale(const SensitivitySpec& sensitivity, double epsilon) {
  if (sensitivity.p_norm != 1) throw std::invalid_argument("Laplace mechanism needs L1 sensitivity");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  return sensitivity.value / epsilon;
}

// Randomized-response flip probability f with (1 - f) / f = e^eps.
inline double rr_flip_prob(double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  return 1.0 / (1.0 + std::exp(epsilon));
}

// Basic sequential composition.
inline PrivacyParams compose_sequential(std::span<const PrivacyParams> budgets) {
  if (budgets.empty()) throw std::invalid_argument("nothing to compose");
  const auto target = budgets.front().target();
  const auto trust = budgets.front().trust();
  double eps = 0.0;
  double delta = 0.0;
  for (const auto& b : budgets) {
    if (b.target() != target || b.trust() != trust) {
      throw std::invalid_argument("cannot compose budgets with different targets or trust models");
    }
    eps += b.epsilon();
    delta += b.delta();
  }
  if (delta >= 1.0) throw std::invalid_argument("composed delta reaches 1");
  return PrivacyParams(eps, delta, target, trust);
}

inline PrivacyParams compose_sequential(std::initializer_list<PrivacyParams> budgets) {
  return compose_sequential(std::span<const PrivacyParams>(budgets.begin(), budgets.size()));
}

// Group privacy: an eps-DP mechanism is (k eps)-DP for groups of k records.
inline double effective_group_epsilon(double epsilon, long long k) {
  if (k < 1) throw std::invalid_argument("group size must be at least 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  return static_cast<double>(k) * epsilon;
}

// ---------------------------------------------------------------------------
// Empirical ratio check

struct DpRatioOptions {
  double slack = 0.1;
  // Outcomes seen fewer times than this under both inputs are not compared.
  double min_count = 100.0;
  std::size_t max_alphabet = 4096;
};

struct DpRatioReport {
  bool pass = false;
  double max_ratio = 0.0;  // +inf when some outcome never occurs under one input
  double bound = 0.0;      // e^eps * (1 + slack)
  std::size_t outcomes_compared = 0;
  std::size_t alphabet_size = 0;
};

// Runs the mechanism `samples` times on each input and compares outcome
// frequencies. Outcomes must be ordered (operator<) and the observed alphabet
// small enough to tabulate.
template <typename Input, typename Mechanism>
DpRatioReport dp_ratio_test(Mechanism&& mechanism, const Input& x, const Input& x_neighbor,
                            double epsilon, std::size_t samples, Rng& rng,
                            const DpRatioOptions& options = {}) {
  using Outcome = std::decay_t<std::invoke_result_t<Mechanism&, const Input&, Rng&>>;
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (samples < 10000) throw std::invalid_argument("dp_ratio_test needs at least 1e4 samples");

  std::map<Outcome, std::pair<std::size_t, std::size_t>> counts;
  auto record = [&](Outcome o, bool neighbor) {
    auto& c = counts[std::move(o)];
    (neighbor ? c.second : c.first) += 1;
    if (counts.size() > options.max_alphabet) {
      throw std::invalid_argument("output alphabet too large to tabulate");
    }
  };
  const Rng base = rng.split(rng());
  Rng stream_x = base.split(1);
  Rng stream_y = base.split(2);
  for (std::size_t i = 0; i < samples; ++i) record(std::invoke(mechanism, x, stream_x), false);
  for (std::size_t i = 0; i < samples; ++i) record(std::invoke(mechanism, x_neighbor, stream_y), true);

  DpRatioReport report;
  report.alphabet_size = counts.size();
  report.bound = std::exp(epsilon) * (1.0 + options.slack);
  for (const auto& [outcome, c] : counts) {
    const auto [cx, cy] = c;
    if (static_cast<double>(std::max(cx, cy)) < options.min_count) continue;
    ++report.outcomes_compared;
    double ratio = std::numeric_limits<double>::infinity();
    if (cx > 0 && cy > 0) {
      ratio = std::max(static_cast<double>(cx) / static_cast<double>(cy),
                       static_cast<double>(cy) / static_cast<double>(cx));
    }
    report.max_ratio = std::max(report.max_ratio, ratio);
  }
  report.pass = report.outcomes_compared > 0 && report.max_ratio <= report.bound;
  return report;
}

}  // namespace dpgraph
