#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dpgraph/error.hpp"
#include "dpgraph/rng.hpp"

namespace dpgraph {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();
inline constexpr std::size_t kMaxFeatures = 50;

// Dense n x d binary matrix, row-major.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::uint8_t operator()(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c]; }
  std::uint8_t& operator()(std::size_t r, std::size_t c) { return bits_[r * cols_ + c]; }

  std::span<const std::uint8_t> row(std::size_t r) const {
    return {bits_.data() + r * cols_, cols_};
  }
  std::span<const std::uint8_t> data() const { return bits_; }
  std::span<std::uint8_t> data() { return bits_; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct SimplifyCounts {
  std::size_t self_loops = 0;
  std::size_t duplicates = 0;
};

// Undirected simple graph on nodes 0..n-1 with optional binary node features
// and class labels. Immutable once built; adjacency lists are sorted.
class Graph {
 public:
  Graph() = default;

  // Strict constructor: rejects self-loops, duplicates and out-of-range ids.
  static Graph from_edges(std::size_t n, std::vector<Edge> edges) {
    for (auto& [u, v] : edges) {
      if (u == v) {
        throw std::invalid_argument("self-loop on node " + std::to_string(u));
      }
      if (u >= n || v >= n) {
        throw std::invalid_argument("edge endpoint out of range");
      }
      if (u > v) std::swap(u, v);
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
      throw std::invalid_argument("duplicate edge");
    }
    return Graph(n, std::move(edges));
  }

  // Lenient constructor: drops self-loops and duplicate edges, counting them.
  // Out-of-range endpoints are still an error.
  static Graph simplify(std::size_t n, std::vector<Edge> edges, SimplifyCounts* counts = nullptr) {
    SimplifyCounts local;
    std::vector<Edge> kept;
    kept.reserve(edges.size());
    for (auto [u, v] : edges) {
      if (u >= n || v >= n) {
        throw std::invalid_argument("edge endpoint out of range");
      }
      if (u == v) {
        ++local.self_loops;
        continue;
      }
      if (u > v) std::swap(u, v);
      kept.emplace_back(u, v);
    }
    std::sort(kept.begin(), kept.end());
    const auto last = std::unique(kept.begin(), kept.end());
    local.duplicates = static_cast<std::size_t>(kept.end() - last);
    kept.erase(last, kept.end());
    if (counts) *counts = local;
    return Graph(n, std::move(kept));
  }

  static Graph empty(std::size_t n) { return Graph(n, {}); }

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }

  // Sorted, each pair (u, v) with u < v.
  std::span<const Edge> edges() const { return edges_; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }

  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }

  bool has_edge(NodeId u, NodeId v) const {
    if (u >= n_ || v >= n_ || u == v) return false;
    if (degree(u) > degree(v)) std::swap(u, v);
    const auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  const std::optional<FeatureMatrix>& features() const { return features_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }

  Graph with_features(FeatureMatrix features) const {
    if (features.rows() != n_) {
      throw std::invalid_argument("feature rows do not match node count");
    }
    if (features.cols() > kMaxFeatures) {
      throw std::invalid_argument("graphs carry at most 50 binary features; select columns first (got " +
                                  std::to_string(features.cols()) + ")");
    }
    for (auto bit : features.data()) {
      if (bit > 1) throw std::invalid_argument("features must be binary");
    }
    Graph g = *this;
    g.features_ = std::move(features);
    return g;
  }

  Graph with_labels(std::vector<int> labels) const {
    if (labels.size() != n_) {
      throw std::invalid_argument("label count does not match node count");
    }
    for (int l : labels) {
      if (l < 0) throw std::invalid_argument("labels must be non-negative class ids");
    }
    Graph g = *this;
    g.labels_ = std::move(labels);
    return g;
  }

  Graph without_attributes() const { return Graph(n_, edges_); }

  // Same node count and edge set; attributes are ignored.
  bool same_structure(const Graph& other) const {
    return n_ == other.n_ && edges_ == other.edges_;
  }

 private:
  Graph(std::size_t n, std::vector<Edge> sorted_edges) : n_(n), edges_(std::move(sorted_edges)) {
    if (n_ >= kNoNode) throw std::invalid_argument("too many nodes");
    offsets_.assign(n_ + 1, 0);
    for (auto [u, v] : edges_) {
      ++offsets_[u + 1];
      ++offsets_[v + 1];
    }
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
    adjacency_.resize(2 * edges_.size());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    // Edges are sorted by (u, v), so each list fills in ascending order for
    // the u side; the v side needs a final sort.
    for (auto [u, v] : edges_) {
      adjacency_[cursor[u]++] = v;
      adjacency_[cursor[v]++] = u;
    }
    for (std::size_t v = 0; v < n_; ++v) {
      std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
                adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]));
    }
  }

  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adjacency_;
  std::optional<FeatureMatrix> features_;
  std::optional<std::vector<int>> labels_;
};

struct DegreeSequence {
  std::vector<std::size_t> values;

  std::size_t total() const { return std::accumulate(values.begin(), values.end(), std::size_t{0}); }
};

inline DegreeSequence degree_sequence(const Graph& g) {
  DegreeSequence d;
  d.values.resize(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) d.values[v] = g.degree(v);
  return d;
}

// Community assignment with ids dense in 0..k-1.
class Partition {
 public:
  Partition() = default;

  // Relabels arbitrary ids densely, in order of first appearance.
  static Partition from_labels(std::span<const std::size_t> raw) {
    Partition p;
    p.labels_.resize(raw.size());
    std::unordered_map<std::size_t, std::uint32_t> remap;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      auto [it, inserted] = remap.try_emplace(raw[i], static_cast<std::uint32_t>(remap.size()));
      p.labels_[i] = it->second;
    }
    p.count_ = remap.size();
    return p;
  }

  static Partition from_labels(std::initializer_list<std::size_t> raw) {
    std::vector<std::size_t> v(raw);
    return from_labels(std::span<const std::size_t>(v));
  }

  static Partition singletons(std::size_t n) {
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    return from_labels(std::span<const std::size_t>(ids));
  }

  static Partition single_block(std::size_t n) {
    std::vector<std::size_t> ids(n, 0);
    return from_labels(std::span<const std::size_t>(ids));
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t num_communities() const { return count_; }
  std::uint32_t operator[](std::size_t v) const { return labels_[v]; }
  std::span<const std::uint32_t> labels() const { return labels_; }

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<std::uint32_t> labels_;
  std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Induced subgraphs

struct Subgraph {
  Graph graph;
  std::vector<NodeId> old_to_new;  // kNoNode for nodes outside the subset
  std::vector<NodeId> new_to_old;
};

// G[S] with S re-labelled in ascending order of original id. Features and
// labels follow their nodes.
inline Subgraph induced_subgraph(const Graph& g, std::span<const NodeId> subset) {
  Subgraph out;
  out.old_to_new.assign(g.num_nodes(), kNoNode);
  for (NodeId v : subset) {
    if (v >= g.num_nodes()) {
      throw std::invalid_argument("node id " + std::to_string(v) + " out of range");
    }
    out.old_to_new[v] = 0;  // mark
  }
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (out.old_to_new[v] != kNoNode) {
      out.old_to_new[v] = static_cast<NodeId>(out.new_to_old.size());
      out.new_to_old.push_back(v);
    }
  }
  std::vector<Edge> edges;
  for (auto [u, v] : g.edges()) {
    if (out.old_to_new[u] != kNoNode && out.old_to_new[v] != kNoNode) {
      edges.emplace_back(out.old_to_new[u], out.old_to_new[v]);
    }
  }
  out.graph = Graph::from_edges(out.new_to_old.size(), std::move(edges));
  if (g.features()) {
    const auto& src = *g.features();
    FeatureMatrix f(out.new_to_old.size(), src.cols());
    for (std::size_t i = 0; i < out.new_to_old.size(); ++i) {
      for (std::size_t j = 0; j < src.cols(); ++j) f(i, j) = src(out.new_to_old[i], j);
    }
    out.graph = out.graph.with_features(std::move(f));
  }
  if (g.labels()) {
    std::vector<int> labels;
    labels.reserve(out.new_to_old.size());
    for (NodeId old : out.new_to_old) labels.push_back((*g.labels())[old]);
    out.graph = out.graph.with_labels(std::move(labels));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chung-Lu

// Each pair u < v is an edge independently with probability
// min(1, w_u * w_v / sum(w)).
inline Graph chung_lu_sample(std::span<const double> expected_degrees, Rng& rng) {
  const std::size_t n = expected_degrees.size();
  if (n < 2) throw std::invalid_argument("chung_lu_sample needs at least two nodes");
  double total = 0.0;
  for (double w : expected_degrees) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("expected degrees must be finite and non-negative");
    }
    total += w;
  }
  if (total == 0.0) return Graph::empty(n);

  std::vector<Edge> edges;
  for (NodeId u = 0; u + 1 < n; ++u) {
    const double wu = expected_degrees[u];
    if (wu == 0.0) continue;
    for (NodeId v = u + 1; v < n; ++v) {
      const double p = std::min(1.0, wu * expected_degrees[v] / total);
      if (p > 0.0 && rng.uniform() < p) edges.emplace_back(u, v);
    }
  }
  return Graph::from_edges(n, std::move(edges));
}

// ---------------------------------------------------------------------------
// Edge-list and attribute files

enum class EdgeListDialect { whitespace, comma, any };

struct LoadedGraph {
  Graph graph;
  std::vector<std::string> original_ids;  // compact id -> token in the file
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_dropped = 0;

  std::optional<NodeId> lookup(const std::string& original) const {
    for (std::size_t i = 0; i < original_ids.size(); ++i) {
      if (original_ids[i] == original) return static_cast<NodeId>(i);
    }
    return std::nullopt;
  }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, EdgeListDialect dialect) {
  std::vector<std::string_view> out;
  auto is_sep = [dialect](char c) {
    const bool ws = c == ' ' || c == '\t';
    switch (dialect) {
      case EdgeListDialect::whitespace: return ws;
      case EdgeListDialect::comma: return c == ',';
      case EdgeListDialect::any: return ws || c == ',';
    }
    return ws;
  };
  std::size_t i = 0;
  while (i < line.size()) {
    if (is_sep(line[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && !is_sep(line[j])) ++j;
    auto field = line.substr(i, j - i);
    // Trim blanks around comma-separated fields.
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    out.push_back(field);
    i = j;
  }
  return out;
}

inline std::string_view strip_line(std::string& raw) {
  if (!raw.empty() && raw.back() == '\r') raw.pop_back();
  std::string_view line(raw);
  while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
  while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
  return line;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

}  // namespace detail

// Reads "u v" lines; '#' starts a comment line. Node tokens are compacted to
// 0..n-1 in order of first appearance (self-loop lines still introduce their
// node). Self-loops and duplicate edges are dropped and counted.
inline LoadedGraph read_edge_list(std::istream& in, const std::string& source = "<stream>",
                                  EdgeListDialect dialect = EdgeListDialect::any) {
  LoadedGraph out;
  std::unordered_map<std::string, NodeId> ids;
  std::vector<Edge> edges;
  auto intern = [&](std::string_view token) {
    auto [it, inserted] = ids.try_emplace(std::string(token), static_cast<NodeId>(ids.size()));
    if (inserted) out.original_ids.emplace_back(token);
    return it->second;
  };

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::strip_line(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = detail::split_fields(line, dialect);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ParseError(source, line_no, "expected two node ids, got '" + std::string(line) + "'");
    }
    const NodeId u = intern(fields[0]);
    const NodeId v = intern(fields[1]);
    edges.emplace_back(u, v);
  }
  if (ids.empty()) throw DataError(source + ": no edges found");

  SimplifyCounts counts;
  out.graph = Graph::simplify(ids.size(), std::move(edges), &counts);
  out.self_loops_dropped = counts.self_loops;
  out.duplicates_dropped = counts.duplicates;
  return out;
}

inline LoadedGraph load_edge_list(const std::string& path,
                                  EdgeListDialect dialect = EdgeListDialect::any) {
  auto in = detail::open_input(path);
  return read_edge_list(in, path, dialect);
}

// Writes edges so that reading the output back reproduces the same ids and
// edge set. A node that no earlier line has introduced, and that cannot be
// introduced by an edge to an already-seen node, is emitted as a "v v" marker
// line; markers are dropped as self-loops on load but keep node order and
// isolated nodes intact.
inline void write_edge_list(std::ostream& out, const Graph& g) {
  const std::size_t n = g.num_nodes();
  out << "# nodes " << n << " edges " << g.num_edges() << '\n';
  std::vector<char> written_edge(g.num_edges(), 0);
  auto edge_index = [&](NodeId u, NodeId v) {
    const auto all = g.edges();
    const auto it = std::lower_bound(all.begin(), all.end(), Edge{u, v});
    return static_cast<std::size_t>(it - all.begin());
  };
  for (NodeId v = 0; v < n; ++v) {
    // Any neighbour u < v has already been introduced.
    const auto nb = g.neighbors(v);
    if (!nb.empty() && nb.front() < v) {
      out << nb.front() << ' ' << v << '\n';
      written_edge[edge_index(nb.front(), v)] = 1;
    } else {
      out << v << ' ' << v << '\n';
    }
  }
  const auto all = g.edges();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!written_edge[i]) out << all[i].first << ' ' << all[i].second << '\n';
  }
}

// "node,f0,...,f{d-1}" with a header row; node column holds the ids used in
// the edge-list file.
inline Graph read_features_csv(std::istream& in, const LoadedGraph& loaded,
                               const std::string& source = "<features>") {
  std::unordered_map<std::string, NodeId> index;
  for (std::size_t i = 0; i < loaded.original_ids.size(); ++i) {
    index.emplace(loaded.original_ids[i], static_cast<NodeId>(i));
  }
  std::string raw;
  std::size_t line_no = 0;
  std::size_t cols = 0;
  bool header_seen = false;
  FeatureMatrix features;
  std::vector<char> seen(loaded.graph.num_nodes(), 0);
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::strip_line(raw);
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line, EdgeListDialect::comma);
    if (!header_seen) {
      header_seen = true;
      if (fields.empty() || fields[0] != "node") {
        throw ParseError(source, line_no, "expected header starting with 'node'");
      }
      cols = fields.size() - 1;
      if (cols > kMaxFeatures) {
        throw ParseError(source, line_no,
                         std::to_string(cols) + " feature columns; at most 50 are supported, select columns first");
      }
      features = FeatureMatrix(loaded.graph.num_nodes(), cols);
      continue;
    }
    if (fields.size() != cols + 1) {
      throw ParseError(source, line_no, "expected " + std::to_string(cols + 1) + " fields");
    }
    const auto it = index.find(std::string(fields[0]));
    if (it == index.end()) {
      throw ParseError(source, line_no, "unknown node '" + std::string(fields[0]) + "'");
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (fields[j + 1] == "0") {
        features(it->second, j) = 0;
      } else if (fields[j + 1] == "1") {
        features(it->second, j) = 1;
      } else {
        throw ParseError(source, line_no, "feature values must be 0 or 1");
      }
    }
    seen[it->second] = 1;
  }
  if (!header_seen) throw DataError(source + ": empty feature file");
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw DataError(source + ": missing feature rows for some nodes");
  }
  return loaded.graph.with_features(std::move(features));
}

// "node,label" with a header row.
inline Graph read_labels_csv(std::istream& in, const LoadedGraph& loaded, const Graph& base,
                             const std::string& source = "<labels>") {
  std::unordered_map<std::string, NodeId> index;
  for (std::size_t i = 0; i < loaded.original_ids.size(); ++i) {
    index.emplace(loaded.original_ids[i], static_cast<NodeId>(i));
  }
  std::vector<int> labels(base.num_nodes(), -1);
  std::string raw;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::strip_line(raw);
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line, EdgeListDialect::comma);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() != 2 || fields[0] != "node") {
        throw ParseError(source, line_no, "expected header 'node,label'");
      }
      continue;
    }
    if (fields.size() != 2) throw ParseError(source, line_no, "expected two fields");
    const auto it = index.find(std::string(fields[0]));
    if (it == index.end()) {
      throw ParseError(source, line_no, "unknown node '" + std::string(fields[0]) + "'");
    }
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(std::string(fields[1]), &used);
      if (used != fields[1].size() || label < 0) throw std::invalid_argument("label");
    } catch (const std::exception&) {
      throw ParseError(source, line_no, "label must be a non-negative integer");
    }
    labels[it->second] = label;
  }
  if (std::find(labels.begin(), labels.end(), -1) != labels.end()) {
    throw DataError(source + ": missing labels for some nodes");
  }
  return base.with_labels(std::move(labels));
}

inline void write_features_csv(std::ostream& out, const Graph& g) {
  if (!g.features()) return;
  const auto& f = *g.features();
  out << "node";
  for (std::size_t j = 0; j < f.cols(); ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < f.rows(); ++i) {
    out << i;
    for (std::size_t j = 0; j < f.cols(); ++j) out << ',' << int(f(i, j));
    out << '\n';
  }
}

inline void write_labels_csv(std::ostream& out, const Graph& g) {
  if (!g.labels()) return;
  out << "node,label\n";
  for (std::size_t i = 0; i < g.labels()->size(); ++i) out << i << ',' << (*g.labels())[i] << '\n';
}

// Edge list plus optional attribute files resolved against its id map.
inline LoadedGraph load_graph(const std::string& edges_path, const std::string& features_path = {},
                              const std::string& labels_path = {}) {
  LoadedGraph loaded = load_edge_list(edges_path);
  if (!features_path.empty()) {
    auto in = detail::open_input(features_path);
    loaded.graph = read_features_csv(in, loaded, features_path);
  }
  if (!labels_path.empty()) {
    auto in = detail::open_input(labels_path);
    loaded.graph = read_labels_csv(in, loaded, loaded.graph, labels_path);
  }
  return loaded;
}

}  // namespace dpgraph
