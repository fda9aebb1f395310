// dpgraph: privatize graphs, measure utility loss and run baseline attacks.
//
//   dpgraph run --config exp.json [--epsilons 1 2 4] [--trials N] [--seed S] [--out DIR]
//   dpgraph metrics --graph A.edges --graph B.edges
//   dpgraph attack --original A.edges --private B.edges --attack deanonymize
//   dpgraph compare a/results.csv b/results.csv [--out table.csv]
//   dpgraph synth --spec '{"generator":"er","n":100,"p":0.1}' [--out prefix]
//   dpgraph privatize --graph A.edges --mechanism edge-rr --epsilon 1 [--out B.edges]
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "dpgraph/dpgraph.hpp"

namespace {

using namespace dpgraph;

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

// Re-expresses `other` in the id space of `reference` by matching node tokens.
// Returns nullopt when the two files do not name the same node set.
std::optional<Graph> align_to(const LoadedGraph& reference, const LoadedGraph& other) {
  if (reference.original_ids.size() != other.original_ids.size()) return std::nullopt;
  std::unordered_map<std::string, NodeId> index;
  for (std::size_t i = 0; i < reference.original_ids.size(); ++i) {
    index.emplace(reference.original_ids[i], static_cast<NodeId>(i));
  }
  std::vector<NodeId> to_ref(other.original_ids.size());
  for (std::size_t i = 0; i < other.original_ids.size(); ++i) {
    const auto it = index.find(other.original_ids[i]);
    if (it == index.end()) return std::nullopt;
    to_ref[i] = it->second;
  }
  std::vector<Edge> edges;
  for (auto [u, v] : other.graph.edges()) edges.emplace_back(to_ref[u], to_ref[v]);
  return Graph::simplify(reference.graph.num_nodes(), std::move(edges));
}

void write_output(const std::string& path, const std::string& contents) {
  if (path.empty() || path == "-") {
    std::cout << contents;
  } else {
    write_file_atomic(path, contents);
  }
}

Json read_json_arg(const std::string& arg) {
  std::string text = arg;
  if (std::filesystem::is_regular_file(arg)) {
    std::ifstream in(arg);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string("bad JSON: ") + e.what());
  }
}

int cmd_run(const std::string& config_path, const std::vector<double>& epsilons, std::optional<std::size_t> trials,
            std::optional<std::uint64_t> seed, const std::string& out, std::optional<std::size_t> threads) {
  ExperimentConfig cfg = load_config(config_path);
  if (!epsilons.empty()) cfg.epsilons = epsilons;
  if (trials) cfg.trials = *trials;
  if (seed) cfg.base_seed = *seed;
  if (!out.empty()) cfg.output_dir = out;
  if (threads) cfg.threads = *threads;
  if (cfg.output_dir.empty()) throw std::invalid_argument("no output directory: set output_dir or pass --out");
  const auto result = run_experiment(cfg);
  std::cerr << "dataset " << result.dataset << ", mechanism " << result.mechanism << ": " << result.private_graphs
            << " private graphs, " << result.rows.size() << " rows, " << result.skipped.size() << " skipped -> "
            << cfg.output_dir << "\n";
  return 0;
}

int cmd_metrics(const std::vector<std::string>& graphs, const std::vector<std::string>& metrics, std::uint64_t seed) {
  if (graphs.size() != 2) throw std::invalid_argument("metrics needs exactly two --graph arguments");
  const LoadedGraph a = load_edge_list(graphs[0]);
  const LoadedGraph b = load_edge_list(graphs[1]);
  const auto aligned = align_to(a, b);
  std::vector<std::string> selected = metrics;
  if (selected.empty()) selected.assign(std::begin(kDescriptiveMetrics), std::end(kDescriptiveMetrics));
  std::vector<SkipRecord> skipped;
  const MetricReport report =
      compare_graphs(a.graph, aligned ? *aligned : b.graph, selected, aligned.has_value(), seed, &skipped);
  std::string out = "metric,value,error_kind\n";
  for (const auto& [name, v] : report.entries()) {
    out += name + ',' + format_double(v.value) + ',' + std::string(to_string(v.kind)) + '\n';
  }
  std::cout << out;
  for (const auto& s : skipped) std::cerr << "skipped " << s.metric << ": " << s.reason << "\n";
  return 0;
}

int cmd_attack(const std::string& original_path, const std::string& private_path, const std::string& attack,
               std::size_t pairs, std::uint64_t seed) {
  const LoadedGraph a = load_edge_list(original_path);
  const LoadedGraph b = load_edge_list(private_path);
  const Graph& g = a.graph;
  std::string out = "metric,value\n";
  if (attack == "deanonymize") {
    const NodeMapping f = seedfree_deanonymize(g, b.graph);
    out += "edge_correctness," + format_double(edge_correctness(g, b.graph, f)) + '\n';
    out += "s3," + format_double(s3_score(g, b.graph, f)) + '\n';
  } else if (attack == "membership" || attack == "reconstruction") {
    const auto aligned = align_to(a, b);
    if (!aligned) throw DataError("graphs do not share a node set; " + attack + " needs aligned node ids");
    if (attack == "reconstruction") {
      out += "reconstruction_rae," + format_double(reconstruction_rae(g, identity_reconstruction(*aligned))) + '\n';
    } else {
      Rng rng(seed);
      const auto sets = sample_membership_pairs(g, std::min(pairs, g.num_edges() / 2), rng);
      const auto r = membership_inference(*aligned, sets.eval, sets.calibration);
      out += "membership_baseline_accuracy," + format_double(r.baseline_accuracy) + '\n';
      out += "membership_cn_accuracy," + format_double(r.common_neighbor_accuracy) + '\n';
    }
  } else {
    throw std::invalid_argument("unknown attack '" + attack + "'");
  }
  std::cout << out;
  return 0;
}

int cmd_compare(const std::vector<std::string>& files, const std::string& out) {
  std::vector<std::vector<ResultRow>> sets;
  for (const auto& f : files) {
    const auto path = std::filesystem::is_directory(f) ? (std::filesystem::path(f) / "results.csv").string() : f;
    sets.push_back(load_results_csv(path));
  }
  write_output(out, compare_csv(compare_report(sets)));
  return 0;
}

int cmd_synth(const std::string& spec, std::uint64_t seed, const std::string& out) {
  Rng rng(seed);
  const Graph g = synth_dataset(read_json_arg(spec), rng);
  std::ostringstream edges;
  write_edge_list(edges, g);
  if (out.empty() || out == "-") {
    std::cout << edges.str();
    return 0;
  }
  write_file_atomic(out + ".edges", edges.str());
  if (g.features()) {
    std::ostringstream f;
    write_features_csv(f, g);
    write_file_atomic(out + ".features.csv", f.str());
  }
  if (g.labels()) {
    std::ostringstream l;
    write_labels_csv(l, g);
    write_file_atomic(out + ".labels.csv", l.str());
  }
  std::cerr << "wrote " << g.num_nodes() << " nodes, " << g.num_edges() << " edges to " << out << ".edges\n";
  return 0;
}

int cmd_privatize(const std::string& graph, const std::string& mechanism, double epsilon, std::uint64_t seed,
                  const std::string& out) {
  const LoadedGraph loaded = load_edge_list(graph);
  Rng rng(seed);
  const Graph h = privatize(mechanism, loaded.graph, epsilon, rng);
  std::ostringstream os;
  write_edge_list(os, h);
  write_output(out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private graph publication benchmark"};
  app.require_subcommand(1);

  std::string config, out;
  std::vector<double> epsilons;
  std::optional<std::size_t> trials, threads;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("--config", config, "experiment config")->required();
  run->add_option("--epsilons", epsilons, "override the epsilon schedule");
  run->add_option("--trials", trials, "override the trial count");
  run->add_option("--seed", seed, "override the base seed");
  run->add_option("--out", out, "output directory");
  run->add_option("--threads", threads, "worker threads (0: all cores)");

  std::vector<std::string> graphs, metric_names;
  std::uint64_t plain_seed = 0;
  auto* metrics = app.add_subcommand("metrics", "compare two graphs on the utility metrics");
  metrics->add_option("--graph", graphs, "edge list (give twice: original, private)")->required();
  metrics->add_option("--metric", metric_names, "metric to report (default: descriptive set)");
  metrics->add_option("--seed", plain_seed, "seed for randomized metrics");

  std::string original, private_graph, attack_id;
  std::size_t pairs = 500;
  auto* attack = app.add_subcommand("attack", "run a baseline attack on a private graph");
  attack->add_option("--original", original, "original edge list")->required();
  attack->add_option("--private", private_graph, "private edge list")->required();
  attack->add_option("--attack", attack_id, "membership | reconstruction | deanonymize")->required();
  attack->add_option("--pairs", pairs, "membership pairs per class");
  attack->add_option("--seed", plain_seed, "seed for pair sampling");

  std::vector<std::string> results;
  auto* compare = app.add_subcommand("compare", "tabulate several result sets side by side");
  compare->add_option("results", results, "results.csv files or run directories")->required();
  compare->add_option("--out", out, "output file (default stdout)");

  std::string spec;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", spec, "generator spec: JSON text or a JSON file")->required();
  synth->add_option("--seed", plain_seed, "generator seed");
  synth->add_option("--out", out, "output prefix (default: edge list on stdout)");

  std::string mechanism;
  double epsilon = 1.0;
  std::string input;
  auto* priv = app.add_subcommand("privatize", "apply one mechanism to an edge list");
  priv->add_option("--graph", input, "input edge list")->required();
  priv->add_option("--mechanism", mechanism, "edge-rr | deg-lap-cl | pi-v | attr-rr")->required();
  priv->add_option("--epsilon", epsilon, "privacy budget")->required();
  priv->add_option("--seed", plain_seed, "mechanism seed");
  priv->add_option("--out", out, "output edge list (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*run) return cmd_run(config, epsilons, trials, seed, out, threads);
    if (*metrics) return cmd_metrics(graphs, metric_names, plain_seed);
    if (*attack) return cmd_attack(original, private_graph, attack_id, pairs, plain_seed);
    if (*compare) return cmd_compare(results, out);
    if (*synth) return cmd_synth(spec, plain_seed, out);
    if (*priv) return cmd_privatize(input, mechanism, epsilon, plain_seed, out);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}
