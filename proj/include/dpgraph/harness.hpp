#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dpgraph/attacks.hpp"
#include "dpgraph/error.hpp"
#include "dpgraph/gcn.hpp"
#include "dpgraph/graph.hpp"
#include "dpgraph/mechanisms.hpp"
#include "dpgraph/metrics.hpp"
#include "dpgraph/rng.hpp"
#include "dpgraph/simulate.hpp"

namespace dpgraph {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Formatting and files

// Shortest decimal form that reads back to the same double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw DataError("bad number '" + std::string(s) + "' in " + what);
  }
  return x;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

// Writes to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Synthetic datasets

namespace detail {

template <typename T>
T json_get(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw std::invalid_argument(std::string("bad value for '") + key + "'");
  }
}

inline void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, const char* where) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument(std::string("unknown key '") + key + "' in " + where);
    }
  }
}

inline std::vector<Edge> bernoulli_pairs(std::size_t n, Rng& rng, auto&& prob) {
  std::vector<Edge> edges;
  for (NodeId u = 0; u + 1 < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      const double p = prob(u, v);
      if (p >= 1.0 || (p > 0.0 && rng.uniform() < p)) edges.emplace_back(u, v);
    }
  }
  return edges;
}

// Power-law expected degrees w_i ~ (i + 1)^(-1/(exponent - 1)) with the given
// mean, capped at sqrt(sum) so every pair probability stays below one.
inline std::vector<double> powerlaw_weights(std::size_t n, double exponent, double mean_degree) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::pow(static_cast<double>(i + 1), -1.0 / (exponent - 1.0));
  const double target = mean_degree * static_cast<double>(n);
  for (int round = 0; round < 100; ++round) {
    double capped_sum = 0.0, free_sum = 0.0;
    const double cap = std::sqrt(target);
    for (double x : w) (x >= cap ? capped_sum : free_sum) += x >= cap ? cap : x;
    const double scale = (target - capped_sum) / free_sum;
    bool changed = false;
    for (double& x : w) {
      if (x >= cap) {
        x = cap;
      } else {
        x *= scale;
        if (x > cap) changed = true;
      }
    }
    if (!changed && std::abs(scale - 1.0) < 1e-12) break;
  }
  return w;
}

}  // namespace detail

// Generators:
//   {"generator": "er", "n", "p"}
//   {"generator": "planted-partition", "n", "p_in", "p_out", "blocks" = 2,
//    "features" = 0, "feature_noise" = 0.1}   block ids become labels
//   {"generator": "chung-lu-powerlaw", "n", "exponent" = 2.5, "mean_degree" = 10}
inline Graph synth_dataset(const Json& spec, Rng& rng) {
  if (!spec.is_object() || !spec.contains("generator")) throw std::invalid_argument("synthetic spec needs a generator");
  const auto id = detail::json_get<std::string>(spec, "generator", "");
  const auto n = detail::json_get<std::size_t>(spec, "n", 0);
  if (n < 2) throw std::invalid_argument("synthetic graphs need n >= 2");
  auto probability = [&](const char* key, double fallback) {
    const double p = detail::json_get<double>(spec, key, fallback);
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(key) + " must lie in [0, 1]");
    return p;
  };

  if (id == "er") {
    detail::check_keys(spec, {"generator", "n", "p"}, "er spec");
    const double p = probability("p", 0.01);
    return Graph::from_edges(n, detail::bernoulli_pairs(n, rng, [&](NodeId, NodeId) { return p; }));
  }
  if (id == "planted-partition") {
    detail::check_keys(spec, {"generator", "n", "p_in", "p_out", "blocks", "features", "feature_noise"},
                       "planted-partition spec");
    const double p_in = probability("p_in", 0.1);
    const double p_out = probability("p_out", 0.01);
    const double noise = probability("feature_noise", 0.1);
    const auto blocks = detail::json_get<std::size_t>(spec, "blocks", 2);
    const auto d = detail::json_get<std::size_t>(spec, "features", 0);
    if (blocks < 1 || blocks > n) throw std::invalid_argument("blocks must lie in [1, n]");
    if (d > kMaxFeatures) throw std::invalid_argument("too many features");
    std::vector<int> block(n);
    for (std::size_t v = 0; v < n; ++v) block[v] = static_cast<int>(v * blocks / n);
    const Rng base = rng.split(rng());
    Rng edge_stream = base.split(0);
    Rng feature_stream = base.split(1);
    Graph g = Graph::from_edges(
        n, detail::bernoulli_pairs(n, edge_stream, [&](NodeId u, NodeId v) { return block[u] == block[v] ? p_in : p_out; }));
    if (d > 0) {
      FeatureMatrix f(n, d);
      for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t j = 0; j < d; ++j) {
          const bool on = j % blocks == static_cast<std::size_t>(block[v]);
          f(v, j) = static_cast<std::uint8_t>(on != (feature_stream.uniform() < noise));
        }
      }
      g = g.with_features(std::move(f));
    }
    return g.with_labels(std::move(block));
  }
  if (id == "chung-lu-powerlaw") {
    detail::check_keys(spec, {"generator", "n", "exponent", "mean_degree"}, "chung-lu-powerlaw spec");
    const double exponent = detail::json_get<double>(spec, "exponent", 2.5);
    const double mean = detail::json_get<double>(spec, "mean_degree", 10.0);
    if (!(exponent > 2.0)) throw std::invalid_argument("exponent must exceed 2");
    if (!(mean > 0.0 && mean < static_cast<double>(n - 1))) throw std::invalid_argument("mean_degree must lie in (0, n-1)");
    const auto w = detail::powerlaw_weights(n, exponent, mean);
    return chung_lu_sample(w, rng);
  }
  throw std::invalid_argument("unsupported generator '" + id + "'");
}

// ---------------------------------------------------------------------------
// Metric and attack catalogue

struct MetricSpec {
  std::string_view name;
  ErrorKind kind;
  bool needs_aligned_ids;
  bool higher_is_better;
};

inline constexpr MetricSpec kMetricCatalogue[] = {
    {"num_nodes", ErrorKind::relative, false, false},
    {"num_edges", ErrorKind::relative, false, false},
    {"density", ErrorKind::absolute, false, false},
    {"harmonic_diameter", ErrorKind::relative, false, false},
    {"assortativity", ErrorKind::absolute, false, false},
    {"modularity", ErrorKind::absolute, false, false},
    {"degree_w1", ErrorKind::wasserstein, false, false},
    {"clustering_w1", ErrorKind::wasserstein, false, false},
    {"betweenness_w1", ErrorKind::wasserstein, false, false},
    {"closeness_w1", ErrorKind::wasserstein, false, false},
    {"ari", ErrorKind::raw, true, true},
    {"pagerank_ndcg", ErrorKind::raw, true, true},
    {"spread", ErrorKind::absolute, false, false},
    {"lp_auroc", ErrorKind::absolute, true, false},
    {"nc_f1", ErrorKind::absolute, true, false},
};

inline constexpr std::string_view kDescriptiveMetrics[] = {
    "num_nodes", "num_edges", "density", "harmonic_diameter", "assortativity", "modularity",
    "degree_w1", "clustering_w1", "betweenness_w1", "closeness_w1", "ari", "pagerank_ndcg"};

struct AttackSpec {
  std::string_view id;
  bool needs_aligned_ids;
  std::vector<std::string_view> metrics;
};

inline const std::vector<AttackSpec>& attack_catalogue() {
  static const std::vector<AttackSpec> specs = {
      {"membership", true, {"membership_baseline_accuracy", "membership_cn_accuracy"}},
      {"reconstruction", true, {"reconstruction_rae"}},
      {"deanonymize", false, {"edge_correctness", "s3"}},
  };
  return specs;
}

inline const AttackSpec& attack_spec(std::string_view id) {
  for (const auto& a : attack_catalogue()) {
    if (a.id == id) return a;
  }
  throw std::invalid_argument("unknown attack '" + std::string(id) + "'");
}

inline const MetricSpec& metric_spec(std::string_view name) {
  for (const auto& m : kMetricCatalogue) {
    if (m.name == name) return m;
  }
  throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

// Whether a larger value is the better outcome for the data publisher. Utility
// errors and attack success rates are better small; reconstruction error is
// better large.
inline bool higher_is_better(std::string_view metric) {
  for (const auto& m : kMetricCatalogue) {
    if (m.name == metric) return m.higher_is_better;
  }
  return metric == "reconstruction_rae";
}

// Attacks matching a mechanism's protection target.
inline std::vector<std::string> default_attacks(PrivacyTarget target) {
  switch (target) {
    case PrivacyTarget::edge: return {"membership", "reconstruction"};
    case PrivacyTarget::node: return {"deanonymize"};
    case PrivacyTarget::node_attribute: return {};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Configuration

enum class CentralityChoice { automatic, exact, sampled };

struct DatasetSpec {
  std::string name;
  std::string edges_path;  // empty when synthetic
  std::string features_path;
  std::string labels_path;
  Json synthetic;  // generator spec when no path is given
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::string mechanism = "edge-rr";
  MechanismOptions mechanism_options;
  std::vector<double> epsilons = {0.5, 0.75, 1, 1.5, 2, 3, 4.5, 6.5, 9, 12, 16, 20};
  std::size_t trials = 10;
  std::uint64_t base_seed = 0;
  std::vector<std::string> metrics{std::begin(kDescriptiveMetrics), std::end(kDescriptiveMetrics)};
  std::optional<std::vector<std::string>> attacks;  // default: by mechanism target
  std::optional<std::vector<double>> attack_epsilons;  // default: {1, 3, 9} ∩ epsilons
  std::size_t attack_pairs = 500;  // per class, per membership pair set
  CascadeConfig cascade;
  GcnConfig gcn;
  CentralityChoice centrality = CentralityChoice::automatic;
  std::size_t exact_centrality_limit = 5000;  // automatic: exact up to this many nodes
  std::size_t threads = 0;                    // 0: hardware concurrency
  bool save_graphs = false;
  std::string output_dir;

  std::vector<std::string> resolved_attacks() const {
    return attacks ? *attacks : default_attacks(mechanism_info(mechanism).target);
  }

  std::vector<double> resolved_attack_epsilons() const {
    if (attack_epsilons) return *attack_epsilons;
    std::vector<double> out;
    for (double e : {1.0, 3.0, 9.0}) {
      if (std::find(epsilons.begin(), epsilons.end(), e) != epsilons.end()) out.push_back(e);
    }
    return out;
  }

  void validate() const {
    mechanism_info(mechanism);
    if (epsilons.empty()) throw std::invalid_argument("epsilons must not be empty");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
      if (!(epsilons[i] > 0.0) || !std::isfinite(epsilons[i])) throw std::invalid_argument("epsilons must be positive");
      if (i > 0 && !(epsilons[i] > epsilons[i - 1])) throw std::invalid_argument("epsilons must be strictly increasing");
    }
    if (trials < 1) throw std::invalid_argument("trials must be at least 1");
    std::set<std::string> seen;
    for (const auto& m : metrics) {
      metric_spec(m);
      if (!seen.insert(m).second) throw std::invalid_argument("metric '" + m + "' listed twice");
    }
    seen.clear();
    for (const auto& a : resolved_attacks()) {
      attack_spec(a);
      if (!seen.insert(a).second) throw std::invalid_argument("attack '" + a + "' listed twice");
    }
    for (double e : resolved_attack_epsilons()) {
      if (std::find(epsilons.begin(), epsilons.end(), e) == epsilons.end()) {
        throw std::invalid_argument("attack epsilons must be a subset of epsilons");
      }
    }
    if (attack_pairs < 1) throw std::invalid_argument("attack_pairs must be at least 1");
    if (dataset.edges_path.empty() && dataset.synthetic.is_null()) {
      throw std::invalid_argument("dataset needs an edge list path or a synthetic spec");
    }
    cascade.validate();
    gcn.validate();
  }
};

namespace detail {

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

}  // namespace detail

// Reads an ExperimentConfig from JSON. Field names mirror the struct; relative
// dataset paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const Json& j, const std::filesystem::path& base_dir = {}) {
  using detail::json_get;
  detail::check_keys(j,
                     {"dataset", "mechanism", "epsilons", "trials", "base_seed", "metrics", "attacks",
                      "attack_pairs", "cascade", "gcn", "centrality", "exact_centrality_limit", "threads",
                      "save_graphs", "output_dir"},
                     "config");
  ExperimentConfig cfg;

  if (!j.contains("dataset")) throw std::invalid_argument("config needs a dataset");
  const Json& d = j.at("dataset");
  if (d.is_string()) {
    cfg.dataset.edges_path = detail::resolve_path(d.get<std::string>(), base_dir);
  } else {
    detail::check_keys(d, {"name", "edges", "features", "labels", "synthetic"}, "dataset");
    cfg.dataset.edges_path = detail::resolve_path(json_get<std::string>(d, "edges", ""), base_dir);
    cfg.dataset.features_path = detail::resolve_path(json_get<std::string>(d, "features", ""), base_dir);
    cfg.dataset.labels_path = detail::resolve_path(json_get<std::string>(d, "labels", ""), base_dir);
    cfg.dataset.name = json_get<std::string>(d, "name", "");
    if (d.contains("synthetic")) cfg.dataset.synthetic = d.at("synthetic");
    if (!cfg.dataset.edges_path.empty() && !cfg.dataset.synthetic.is_null()) {
      throw std::invalid_argument("dataset is either a path or a synthetic spec, not both");
    }
  }
  if (cfg.dataset.name.empty()) {
    cfg.dataset.name = cfg.dataset.edges_path.empty()
                           ? json_get<std::string>(cfg.dataset.synthetic, "generator", "synthetic")
                           : std::filesystem::path(cfg.dataset.edges_path).stem().string();
  }

  if (j.contains("mechanism")) {
    const Json& m = j.at("mechanism");
    if (m.is_string()) {
      cfg.mechanism = m.get<std::string>();
    } else {
      detail::check_keys(m, {"id", "params"}, "mechanism");
      cfg.mechanism = json_get<std::string>(m, "id", cfg.mechanism);
      if (m.contains("params")) {
        const Json& p = m.at("params");
        detail::check_keys(p, {"delta", "project_density", "q", "p", "attr_weights"}, "mechanism params");
        auto& o = cfg.mechanism_options;
        o.delta = json_get<double>(p, "delta", o.delta);
        o.project_density = json_get<bool>(p, "project_density", o.project_density);
        o.pi_q = json_get<double>(p, "q", o.pi_q);
        if (p.contains("p")) o.pi_p = json_get<double>(p, "p", 0.0);
        o.attr_weights = json_get<std::vector<double>>(p, "attr_weights", o.attr_weights);
      }
    }
  }
  cfg.epsilons = json_get<std::vector<double>>(j, "epsilons", cfg.epsilons);
  cfg.trials = json_get<std::size_t>(j, "trials", cfg.trials);
  cfg.base_seed = json_get<std::uint64_t>(j, "base_seed", cfg.base_seed);
  cfg.metrics = json_get<std::vector<std::string>>(j, "metrics", cfg.metrics);
  if (j.contains("attacks")) {
    const Json& a = j.at("attacks");
    detail::check_keys(a, {"ids", "epsilons", "pairs"}, "attacks");
    if (a.contains("ids")) cfg.attacks = json_get<std::vector<std::string>>(a, "ids", {});
    if (a.contains("epsilons")) cfg.attack_epsilons = json_get<std::vector<double>>(a, "epsilons", {});
    cfg.attack_pairs = json_get<std::size_t>(a, "pairs", cfg.attack_pairs);
  }
  if (j.contains("cascade")) {
    const Json& c = j.at("cascade");
    detail::check_keys(c, {"edge_prob", "seed_fraction", "num_sims"}, "cascade");
    cfg.cascade.edge_prob = json_get<double>(c, "edge_prob", cfg.cascade.edge_prob);
    cfg.cascade.seed_fraction = json_get<double>(c, "seed_fraction", cfg.cascade.seed_fraction);
    cfg.cascade.num_sims = json_get<std::size_t>(c, "num_sims", cfg.cascade.num_sims);
  }
  if (j.contains("gcn")) {
    const Json& g = j.at("gcn");
    detail::check_keys(g,
                       {"hidden_dim", "embedding_dim", "dropout", "learning_rate", "epochs", "patience",
                        "train_fraction", "val_fraction", "test_fraction", "degree_buckets"},
                       "gcn");
    auto& c = cfg.gcn;
    c.hidden_dim = json_get<std::size_t>(g, "hidden_dim", c.hidden_dim);
    c.embedding_dim = json_get<std::size_t>(g, "embedding_dim", c.embedding_dim);
    c.dropout = json_get<double>(g, "dropout", c.dropout);
    c.learning_rate = json_get<double>(g, "learning_rate", c.learning_rate);
    c.epochs = json_get<std::size_t>(g, "epochs", c.epochs);
    c.patience = json_get<std::size_t>(g, "patience", c.patience);
    c.train_fraction = json_get<double>(g, "train_fraction", c.train_fraction);
    c.val_fraction = json_get<double>(g, "val_fraction", c.val_fraction);
    c.test_fraction = json_get<double>(g, "test_fraction", c.test_fraction);
    c.degree_buckets = json_get<std::size_t>(g, "degree_buckets", c.degree_buckets);
  }
  const auto centrality = json_get<std::string>(j, "centrality", "auto");
  if (centrality == "auto") {
    cfg.centrality = CentralityChoice::automatic;
  } else if (centrality == "exact") {
    cfg.centrality = CentralityChoice::exact;
  } else if (centrality == "sampled") {
    cfg.centrality = CentralityChoice::sampled;
  } else {
    throw std::invalid_argument("centrality must be auto, exact or sampled");
  }
  cfg.exact_centrality_limit = json_get<std::size_t>(j, "exact_centrality_limit", cfg.exact_centrality_limit);
  cfg.threads = json_get<std::size_t>(j, "threads", cfg.threads);
  cfg.save_graphs = json_get<bool>(j, "save_graphs", cfg.save_graphs);
  cfg.output_dir = detail::resolve_path(json_get<std::string>(j, "output_dir", ""), base_dir);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError("config " + path + ": " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Results

struct ResultRow {
  std::string dataset;
  std::string mechanism;
  double epsilon = 0.0;
  std::size_t trial = 0;
  std::string metric;
  double value = 0.0;
  ErrorKind kind = ErrorKind::raw;
};

struct SkipRecord {
  double epsilon = 0.0;
  std::size_t trial = 0;
  std::string metric;
  std::string reason;
};

struct AggregateCell {
  double epsilon = 0.0;
  double mean = 0.0;
  std::optional<double> stdev;  // sample stdev; absent for a single value
  std::size_t count = 0;
};

struct ExperimentResult {
  std::string dataset;
  std::string mechanism;
  std::vector<ResultRow> rows;
  std::vector<SkipRecord> skipped;
  std::size_t private_graphs = 0;
  std::size_t expected_rows = 0;  // rows + skipped, by construction
};

inline constexpr std::string_view kResultsHeader = "dataset,mechanism,epsilon,trial,metric,value,error_kind";

inline std::string results_csv(std::span<const ResultRow> rows) {
  std::string out(kResultsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += csv_field(r.dataset) + ',' + csv_field(r.mechanism) + ',' + format_double(r.epsilon) + ',' +
           std::to_string(r.trial) + ',' + csv_field(r.metric) + ',' + format_double(r.value) + ',' +
           std::string(to_string(r.kind)) + '\n';
  }
  return out;
}

inline std::vector<ResultRow> read_results_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty results file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw ParseError(source, 1, "unexpected header");
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = parse_csv_line(line);
    if (f.size() != 7) throw ParseError(source, line_no, "expected 7 fields");
    try {
      ResultRow r;
      r.dataset = f[0];
      r.mechanism = f[1];
      r.epsilon = parse_double(f[2], source);
      r.trial = static_cast<std::size_t>(std::stoull(f[3]));
      r.metric = f[4];
      r.value = parse_double(f[5], source);
      r.kind = parse_error_kind(f[6]);
      rows.push_back(std::move(r));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return rows;
}

inline std::vector<ResultRow> load_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_results_csv(in, path);
}

// Mean and sample stdev per metric per epsilon, summing in row order.
inline std::map<std::string, std::vector<AggregateCell>> aggregate(std::span<const ResultRow> rows) {
  std::map<std::string, std::map<double, std::vector<double>>> grouped;
  for (const auto& r : rows) grouped[r.metric][r.epsilon].push_back(r.value);
  std::map<std::string, std::vector<AggregateCell>> out;
  for (const auto& [metric, by_eps] : grouped) {
    for (const auto& [eps, values] : by_eps) {
      AggregateCell c;
      c.epsilon = eps;
      c.count = values.size();
      double sum = 0.0;
      for (double v : values) sum += v;
      c.mean = sum / static_cast<double>(values.size());
      if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - c.mean) * (v - c.mean);
        c.stdev = std::sqrt(ss / static_cast<double>(values.size() - 1));
      }
      out[metric].push_back(c);
    }
  }
  return out;
}

inline Json aggregate_json(const ExperimentResult& result) {
  Json metrics = Json::object();
  std::map<std::string, ErrorKind> kinds;
  for (const auto& r : result.rows) kinds[r.metric] = r.kind;
  for (const auto& [metric, cells] : aggregate(result.rows)) {
    Json list = Json::array();
    for (const auto& c : cells) {
      list.push_back({{"epsilon", c.epsilon},
                      {"mean", c.mean},
                      {"stdev", c.stdev ? Json(*c.stdev) : Json(nullptr)},
                      {"count", c.count}});
    }
    metrics[metric] = {{"error_kind", std::string(to_string(kinds[metric]))}, {"by_epsilon", std::move(list)}};
  }
  return {{"dataset", result.dataset}, {"mechanism", result.mechanism}, {"metrics", std::move(metrics)}};
}

inline std::string skipped_csv(const ExperimentResult& result) {
  std::string out = "dataset,mechanism,epsilon,trial,metric,reason\n";
  for (const auto& s : result.skipped) {
    out += csv_field(result.dataset) + ',' + csv_field(result.mechanism) + ',' + format_double(s.epsilon) + ',' +
           std::to_string(s.trial) + ',' + csv_field(s.metric) + ',' + csv_field(s.reason) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment runner

namespace detail {

// Stream ids under the base seed. Randomized statistics (Louvain, sampled
// centrality, cascades, GCN) draw from one analysis stream for the original
// and every private graph alike, so equal graphs get equal statistics and
// trials differ only through the mechanism.
inline constexpr std::uint64_t kTrialStreams = 0;
inline constexpr std::uint64_t kDatasetStream = 1;
inline constexpr std::uint64_t kAnalysisStream = 2;
inline constexpr std::uint64_t kAttackPairStream = 3;

struct Outcome {
  std::optional<double> value;
  std::string reason;

  static Outcome ok(double v) { return {v, {}}; }
  static Outcome skip(std::string why) { return {std::nullopt, std::move(why)}; }
};

inline CentralityMode centrality_mode(const ExperimentConfig& cfg, std::size_t n) {
  switch (cfg.centrality) {
    case CentralityChoice::exact: return CentralityMode::exact();
    case CentralityChoice::sampled: return CentralityMode::sampled();
    case CentralityChoice::automatic: break;
  }
  return n <= cfg.exact_centrality_limit ? CentralityMode::exact() : CentralityMode::sampled();
}

inline std::uint64_t metric_index(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kMetricCatalogue); ++i) {
    if (kMetricCatalogue[i].name == name) return i;
  }
  throw std::invalid_argument("unknown metric");
}

// Statistics of one graph, computed on first use. `stream` feeds the
// randomized ones (Louvain, sampled centrality, cascades, GCN).
class GraphStats {
 public:
  GraphStats(const Graph& g, const ExperimentConfig& cfg, Rng stream) : g_(g), cfg_(cfg), stream_(stream) {}

  const Graph& graph() const { return g_; }

  const Partition& communities() {
    if (!communities_) {
      Rng r = stream(metric_index("modularity"));
      communities_ = louvain(g_, r);
    }
    return *communities_;
  }
  const std::vector<double>& betweenness_values() {
    if (!betweenness_) betweenness_ = betweenness(g_, centrality_mode(cfg_, g_.num_nodes()), stream(metric_index("betweenness_w1"))).values;
    return *betweenness_;
  }
  const std::vector<double>& closeness_values() {
    if (!closeness_) closeness_ = closeness(g_, centrality_mode(cfg_, g_.num_nodes()), stream(metric_index("closeness_w1"))).values;
    return *closeness_;
  }
  const std::vector<double>& pagerank_values() {
    if (!pagerank_) pagerank_ = pagerank(g_);
    return *pagerank_;
  }
  double spread() {
    if (!spread_) spread_ = spread_fraction(g_, cfg_.cascade, stream(metric_index("spread")));
    return *spread_;
  }
  Rng stream(std::uint64_t id) const { return stream_.split(id); }

 private:
  const Graph& g_;
  const ExperimentConfig& cfg_;
  Rng stream_;
  std::optional<Partition> communities_;
  std::optional<std::vector<double>> betweenness_, closeness_, pagerank_;
  std::optional<double> spread_;
};

struct Reference {
  Graph graph;
  std::optional<GraphStats> stats;
  std::optional<double> density, harmonic_diameter, modularity;
  std::optional<double> assortativity;
  std::optional<GcnResult> lp, nc;
  std::string lp_skip, nc_skip;
  std::optional<MembershipPairs> pairs;
  std::string pairs_skip;
};

inline Outcome wasserstein_outcome(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return Outcome::skip("empty_graph");
  return Outcome::ok(wasserstein1(a, b));
}

inline Outcome relative_outcome(double truth, double estimate) {
  if (truth == 0.0) return Outcome::skip("zero_reference");
  return Outcome::ok(error(ErrorType::relative, truth, estimate));
}

inline GcnConfig gcn_config(const ExperimentConfig& cfg, const Rng& stream) {
  GcnConfig c = cfg.gcn;
  Rng r = stream;
  c.seed = r();
  return c;
}

inline Outcome evaluate_metric(std::string_view name, Reference& ref, GraphStats& priv, bool aligned,
                               const ExperimentConfig& cfg) {
  const Graph& g = ref.graph;
  const Graph& h = priv.graph();
  const MetricSpec& spec = metric_spec(name);
  if (spec.needs_aligned_ids && (!aligned || g.num_nodes() != h.num_nodes())) return Outcome::skip("node_ids_not_aligned");
  if (h.num_nodes() == 0) return Outcome::skip("empty_graph");

  if (name == "num_nodes") {
    return relative_outcome(static_cast<double>(g.num_nodes()), static_cast<double>(h.num_nodes()));
  }
  if (name == "num_edges") {
    return relative_outcome(static_cast<double>(g.num_edges()), static_cast<double>(h.num_edges()));
  }
  if (name == "density") {
    if (!ref.density || h.num_nodes() < 2) return Outcome::skip("too_few_nodes");
    return Outcome::ok(error(ErrorType::absolute, *ref.density, density(h)));
  }
  if (name == "harmonic_diameter") {
    if (!ref.harmonic_diameter) return Outcome::skip("reference_undefined");
    if (h.num_nodes() < 2 || h.num_edges() == 0) return Outcome::skip("no_edges");
    return relative_outcome(*ref.harmonic_diameter, harmonic_diameter(h));
  }
  if (name == "assortativity") {
    const auto a = assortativity(h);
    if (!ref.assortativity || !a) return Outcome::skip("undefined_assortativity");
    return Outcome::ok(error(ErrorType::absolute, *ref.assortativity, *a));
  }
  if (name == "modularity") {
    if (!ref.modularity) return Outcome::skip("reference_undefined");
    if (h.num_edges() == 0) return Outcome::skip("no_edges");
    return Outcome::ok(error(ErrorType::absolute, *ref.modularity, modularity(h, priv.communities())));
  }
  if (name == "degree_w1") return wasserstein_outcome(degree_values(g), degree_values(h));
  if (name == "clustering_w1") return wasserstein_outcome(clustering_coefficients(g), clustering_coefficients(h));
  if (name == "betweenness_w1") return wasserstein_outcome(ref.stats->betweenness_values(), priv.betweenness_values());
  if (name == "closeness_w1") return wasserstein_outcome(ref.stats->closeness_values(), priv.closeness_values());
  if (name == "ari") return Outcome::ok(ari(ref.stats->communities(), priv.communities()));
  if (name == "pagerank_ndcg") {
    const auto gains = ref.stats->pagerank_values();
    return Outcome::ok(ndcg(gains, rank_by_score(priv.pagerank_values()).order));
  }
  if (name == "spread") return Outcome::ok(std::abs(ref.stats->spread() - priv.spread()));
  if (name == "lp_auroc" || name == "nc_f1") {
    const bool lp = name == "lp_auroc";
    const auto& reference = lp ? ref.lp : ref.nc;
    if (!reference) return Outcome::skip(lp ? ref.lp_skip : ref.nc_skip);
    Graph input = h;
    if (!lp && !input.labels()) return Outcome::skip("no_labels");
    try {
      const auto c = gcn_config(cfg, priv.stream(metric_index(name)));
      const auto r = gcn_train_eval(input, lp ? GcnTask::link_prediction : GcnTask::node_classification, c,
                                    reference->test_set);
      return Outcome::ok(predictive_error(reference->metric, r.metric));
    } catch (const DataError& e) {
      return Outcome::skip(std::string("gcn_failed: ") + e.what());
    }
  }
  throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

inline void prepare_reference(Reference& ref, const ExperimentConfig& cfg, const Rng& base) {
  const Graph& g = ref.graph;
  ref.stats.emplace(g, cfg, base.split(kAnalysisStream));
  const auto wants = [&](std::string_view m) {
    return std::find(cfg.metrics.begin(), cfg.metrics.end(), m) != cfg.metrics.end();
  };
  if (g.num_nodes() >= 2) ref.density = density(g);
  if (g.num_edges() > 0 && wants("harmonic_diameter")) ref.harmonic_diameter = harmonic_diameter(g);
  if (g.num_edges() > 0 && wants("modularity")) ref.modularity = modularity(g, ref.stats->communities());
  ref.assortativity = assortativity(g);
  if (wants("lp_auroc")) {
    try {
      ref.lp = gcn_train_eval(g, GcnTask::link_prediction,
                              gcn_config(cfg, ref.stats->stream(metric_index("lp_auroc"))));
    } catch (const DataError& e) {
      ref.lp_skip = std::string("reference_gcn_failed: ") + e.what();
    }
  }
  if (wants("nc_f1")) {
    if (!g.labels()) {
      ref.nc_skip = "no_labels";
    } else {
      try {
        ref.nc = gcn_train_eval(g, GcnTask::node_classification,
                                gcn_config(cfg, ref.stats->stream(metric_index("nc_f1"))));
      } catch (const DataError& e) {
        ref.nc_skip = std::string("reference_gcn_failed: ") + e.what();
      }
    }
  }
  const auto attacks = cfg.resolved_attacks();
  if (std::find(attacks.begin(), attacks.end(), "membership") != attacks.end()) {
    const std::size_t per_class = std::min(cfg.attack_pairs, g.num_edges() / 2);
    try {
      if (per_class == 0) throw DataError("too few edges");
      Rng r = base.split(kAttackPairStream);
      ref.pairs = sample_membership_pairs(g, per_class, r);
    } catch (const DataError& e) {
      ref.pairs_skip = std::string("no_pairs: ") + e.what();
    }
  }
}

struct CellOutput {
  std::vector<ResultRow> rows;
  std::vector<SkipRecord> skipped;
};

inline void run_attack(std::string_view id, Reference& ref, const Graph& h, bool aligned, double eps,
                       std::size_t trial, const std::string& dataset, const std::string& mechanism,
                       CellOutput& out) {
  const AttackSpec& spec = attack_spec(id);
  const Graph& g = ref.graph;
  auto emit = [&](std::string_view metric, double value) {
    out.rows.push_back({dataset, mechanism, eps, trial, std::string(metric), value, ErrorKind::raw});
  };
  auto skip_all = [&](const std::string& reason) {
    for (auto m : spec.metrics) out.skipped.push_back({eps, trial, std::string(m), reason});
  };
  if (spec.needs_aligned_ids && (!aligned || g.num_nodes() != h.num_nodes())) return skip_all("node_ids_not_aligned");

  if (id == "membership") {
    if (!ref.pairs) return skip_all(ref.pairs_skip);
    const auto r = membership_inference(h, ref.pairs->eval, ref.pairs->calibration);
    emit("membership_baseline_accuracy", r.baseline_accuracy);
    emit("membership_cn_accuracy", r.common_neighbor_accuracy);
  } else if (id == "reconstruction") {
    if (g.num_edges() == 0) return skip_all("no_edges");
    emit("reconstruction_rae", reconstruction_rae(g, identity_reconstruction(h)));
  } else if (id == "deanonymize") {
    if (h.num_nodes() == 0) return skip_all("empty_graph");
    const NodeMapping f = seedfree_deanonymize(g, h);
    emit("edge_correctness", edge_correctness(g, h, f));
    try {
      emit("s3", s3_score(g, h, f));
    } catch (const DataError&) {
      out.skipped.push_back({eps, trial, "s3", "no_edges"});
    }
  }
}

inline Graph load_dataset(const ExperimentConfig& cfg, const Rng& base) {
  if (!cfg.dataset.edges_path.empty()) {
    return load_graph(cfg.dataset.edges_path, cfg.dataset.features_path, cfg.dataset.labels_path).graph;
  }
  Rng r = base.split(kDatasetStream);
  return synth_dataset(cfg.dataset.synthetic, r);
}

}  // namespace detail

// Runs every (epsilon, trial) cell, in parallel when threads allow, and
// assembles rows in (epsilon, trial, metric) order. Each cell draws from
// base_seed split by (epsilon index, trial index), so the output does not
// depend on scheduling. Writes results.csv, skipped.csv, aggregate.json and
// manifest.json into output_dir when it is set.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Rng base(cfg.base_seed);
  const MechanismInfo& info = mechanism_info(cfg.mechanism);

  detail::Reference ref;
  ref.graph = detail::load_dataset(cfg, base);
  detail::prepare_reference(ref, cfg, base);

  const auto attacks = cfg.resolved_attacks();
  const auto attack_eps = cfg.resolved_attack_epsilons();
  const std::size_t cells = cfg.epsilons.size() * cfg.trials;
  std::vector<detail::CellOutput> outputs(cells);
  std::vector<std::exception_ptr> errors(cells);
  std::vector<std::string> saved(cells);

  auto run_cell = [&](std::size_t index) {
    const std::size_t ei = index / cfg.trials;
    const std::size_t trial = index % cfg.trials;
    const double eps = cfg.epsilons[ei];
    Rng mech_stream = base.split(detail::kTrialStreams, ei, trial);
    Graph h = privatize(cfg.mechanism, ref.graph, eps, mech_stream, cfg.mechanism_options);
    if (info.aligned_ids && h.num_nodes() == ref.graph.num_nodes()) {
      // Edge mechanisms release structure; carry the original attributes over.
      if (ref.graph.features() && !h.features()) h = h.with_features(*ref.graph.features());
      if (ref.graph.labels() && !h.labels()) h = h.with_labels(*ref.graph.labels());
    }
    if (cfg.save_graphs) {
      std::ostringstream os;
      write_edge_list(os, h);
      saved[index] = os.str();
    }
    detail::GraphStats stats(h, cfg, base.split(detail::kAnalysisStream));
    auto& out = outputs[index];
    for (const auto& m : cfg.metrics) {
      auto o = detail::evaluate_metric(m, ref, stats, info.aligned_ids, cfg);
      if (o.value) {
        out.rows.push_back({cfg.dataset.name, cfg.mechanism, eps, trial, m, *o.value,
                            metric_spec(m).kind});
      } else {
        out.skipped.push_back({eps, trial, m, o.reason});
      }
    }
    if (std::find(attack_eps.begin(), attack_eps.end(), eps) != attack_eps.end()) {
      for (const auto& a : attacks) {
        detail::run_attack(a, ref, h, info.aligned_ids, eps, trial, cfg.dataset.name, cfg.mechanism, out);
      }
    }
  };

  std::size_t threads = cfg.threads ? cfg.threads : std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells; i = next++) {
      try {
        run_cell(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult result;
  result.dataset = cfg.dataset.name;
  result.mechanism = cfg.mechanism;
  result.private_graphs = cells;
  std::size_t attack_metrics = 0;
  for (const auto& a : attacks) attack_metrics += attack_spec(a).metrics.size();
  result.expected_rows =
      cells * cfg.metrics.size() + attack_metrics * cfg.trials * attack_eps.size();
  for (auto& o : outputs) {
    result.rows.insert(result.rows.end(), std::make_move_iterator(o.rows.begin()), std::make_move_iterator(o.rows.end()));
    result.skipped.insert(result.skipped.end(), o.skipped.begin(), o.skipped.end());
  }
  if (result.rows.size() + result.skipped.size() != result.expected_rows) {
    throw std::logic_error("row accounting mismatch");
  }

  if (!cfg.output_dir.empty()) {
    const std::filesystem::path dir(cfg.output_dir);
    write_file_atomic(dir / "results.csv", results_csv(result.rows));
    write_file_atomic(dir / "skipped.csv", skipped_csv(result));
    write_file_atomic(dir / "aggregate.json", aggregate_json(result).dump(2) + "\n");
    Json manifest = {{"dataset", result.dataset},
                     {"mechanism", result.mechanism},
                     {"epsilons", cfg.epsilons},
                     {"trials", cfg.trials},
                     {"base_seed", cfg.base_seed},
                     {"private_graphs", result.private_graphs},
                     {"rows", result.rows.size()},
                     {"skipped", result.skipped.size()},
                     {"expected_rows", result.expected_rows},
                     {"original_nodes", ref.graph.num_nodes()},
                     {"original_edges", ref.graph.num_edges()}};
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    if (cfg.save_graphs) {
      for (std::size_t i = 0; i < cells; ++i) {
        const auto name = "eps" + std::to_string(i / cfg.trials) + "_trial" + std::to_string(i % cfg.trials) + ".edges";
        write_file_atomic(dir / "graphs" / name, saved[i]);
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Comparison

struct CompareRow {
  std::string metric;
  double epsilon = 0.0;
  std::string mechanism;
  double mean = 0.0;
  std::optional<double> stdev;
  std::size_t count = 0;
  bool best = false;
  bool tie = false;  // this mechanism shares the best mean with another
};

// One result set per entry. A mechanism id seen in an earlier set is suffixed
// "@k" (k = position) so identical inputs stay distinguishable.
inline std::vector<CompareRow> compare_report(const std::vector<std::vector<ResultRow>>& result_sets) {
  if (result_sets.empty()) throw std::invalid_argument("nothing to compare");
  std::vector<std::string> labels;
  std::vector<std::set<double>> grids;
  // metric -> epsilon -> label -> cell
  std::map<std::string, std::map<double, std::map<std::string, AggregateCell>>> table;
  for (std::size_t k = 0; k < result_sets.size(); ++k) {
    const auto& rows = result_sets[k];
    if (rows.empty()) throw DataError("result set " + std::to_string(k + 1) + " has no rows");
    std::string label = rows.front().mechanism;
    for (const auto& r : rows) {
      if (r.mechanism != label) throw DataError("result set mixes mechanisms");
    }
    if (std::find(labels.begin(), labels.end(), label) != labels.end()) label += "@" + std::to_string(k + 1);
    labels.push_back(label);
    std::set<double> grid;
    for (const auto& r : rows) grid.insert(r.epsilon);
    grids.push_back(std::move(grid));
    for (const auto& [metric, cells] : aggregate(rows)) {
      for (const auto& c : cells) table[metric][c.epsilon][label] = c;
    }
  }
  for (std::size_t a = 0; a < grids.size(); ++a) {
    for (std::size_t b = a + 1; b < grids.size(); ++b) {
      std::vector<double> common;
      std::set_intersection(grids[a].begin(), grids[a].end(), grids[b].begin(), grids[b].end(),
                            std::back_inserter(common));
      if (common.empty()) throw DataError("result sets have disjoint epsilon grids");
    }
  }

  std::vector<CompareRow> out;
  for (const auto& [metric, by_eps] : table) {
    const bool up = higher_is_better(metric);
    for (const auto& [eps, by_label] : by_eps) {
      // std::map iterates labels in lexicographic order, so the first strict
      // improvement wins ties.
      const std::string* best_label = nullptr;
      double best_mean = 0.0;
      for (const auto& [label, c] : by_label) {
        if (!best_label || (up ? c.mean > best_mean : c.mean < best_mean)) {
          best_label = &label;
          best_mean = c.mean;
        }
      }
      std::size_t sharing = 0;
      for (const auto& [label, c] : by_label) sharing += c.mean == best_mean;
      for (const auto& [label, c] : by_label) {
        out.push_back({metric, eps, label, c.mean, c.stdev, c.count, &label == best_label,
                       sharing > 1 && c.mean == best_mean});
      }
    }
  }
  return out;
}

inline std::string compare_csv(std::span<const CompareRow> rows) {
  std::string out = "metric,epsilon,mechanism,mean,stdev,n,best,tie\n";
  for (const auto& r : rows) {
    out += csv_field(r.metric) + ',' + format_double(r.epsilon) + ',' + csv_field(r.mechanism) + ',' +
           format_double(r.mean) + ',' + (r.stdev ? format_double(*r.stdev) : std::string()) + ',' +
           std::to_string(r.count) + ',' + (r.best ? "1" : "0") + ',' + (r.tie ? "1" : "0") + '\n';
  }
  return out;
}

// One-shot utility comparison of two graphs on the same metric set the
// runner uses; `aligned` says whether node v of `b` is node v of `a`.
inline MetricReport compare_graphs(const Graph& a, const Graph& b, const std::vector<std::string>& metrics,
                                   bool aligned, std::uint64_t seed = 0, std::vector<SkipRecord>* skipped = nullptr) {
  ExperimentConfig cfg;
  cfg.metrics = metrics;
  cfg.attacks = std::vector<std::string>{};
  cfg.dataset.synthetic = Json::object();
  cfg.base_seed = seed;
  cfg.validate();
  const Rng base(seed);
  detail::Reference ref;
  ref.graph = a;
  detail::prepare_reference(ref, cfg, base);
  detail::GraphStats stats(b, cfg, base.split(detail::kAnalysisStream));
  MetricReport report;
  for (const auto& m : metrics) {
    auto o = detail::evaluate_metric(m, ref, stats, aligned, cfg);
    if (o.value) {
      report.add(m, *o.value, metric_spec(m).kind);
    } else if (skipped) {
      skipped->push_back({0.0, 0, m, o.reason});
    }
  }
  return report;
}

}  // namespace dpgraph
