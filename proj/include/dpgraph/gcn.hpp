#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dpgraph/error.hpp"
#include "dpgraph/graph.hpp"
#include "dpgraph/rng.hpp"

namespace dpgraph {

enum class GcnTask { link_prediction, node_classification };

struct GcnConfig {
  std::size_t hidden_dim = 256;
  std::size_t embedding_dim = 64;  // link prediction output width
  double dropout = 0.25;
  double learning_rate = 0.01;
  std::size_t epochs = 200;
  std::size_t patience = 50;  // epochs without validation gain before stopping
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::size_t degree_buckets = 16;
  std::uint64_t seed = 0;

  void validate() const {
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
      throw std::invalid_argument("split fractions must sum to 1");
    }
    if (!(train_fraction > 0.0 && val_fraction >= 0.0 && test_fraction > 0.0)) {
      throw std::invalid_argument("split fractions must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
    if (hidden_dim == 0 || embedding_dim == 0 || epochs == 0) {
      throw std::invalid_argument("dimensions and epochs must be positive");
    }
  }
};

// Held-out items. Built once on the original graph and reused verbatim when
// scoring private graphs.
struct GcnTestSet {
  GcnTask task = GcnTask::node_classification;
  std::vector<NodeId> val_nodes, test_nodes;
  std::vector<int> val_labels, test_labels;
  std::vector<Edge> val_pos, val_neg, test_pos, test_neg;
};

struct GcnResult {
  double metric = 0.0;  // AUROC or macro F1 on the test items
  GcnTestSet test_set;
  std::vector<double> loss_history;
  std::size_t epochs_run = 0;
};

struct GcnParams {
  Eigen::MatrixXd w1, w2;
  Eigen::RowVectorXd b1, b2;

  void set_zero_like(const GcnParams& other) {
    w1 = Eigen::MatrixXd::Zero(other.w1.rows(), other.w1.cols());
    w2 = Eigen::MatrixXd::Zero(other.w2.rows(), other.w2.cols());
    b1 = Eigen::RowVectorXd::Zero(other.b1.size());
    b2 = Eigen::RowVectorXd::Zero(other.b2.size());
  }

  // Visits (value, index) pairs of every parameter in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    for (Eigen::Index i = 0; i < w1.size(); ++i) f(w1.data()[i]);
    for (Eigen::Index i = 0; i < b1.size(); ++i) f(b1.data()[i]);
    for (Eigen::Index i = 0; i < w2.size(); ++i) f(w2.data()[i]);
    for (Eigen::Index i = 0; i < b2.size(); ++i) f(b2.data()[i]);
  }
};

// ---------------------------------------------------------------------------
// Scoring helpers

// Area under the ROC curve by the rank-sum statistic, ties at half credit.
inline double auroc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw DataError("AUROC needs positive and negative items");
  std::vector<std::pair<double, int>> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.emplace_back(s, 1);
  for (double s : negative) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (all[t].second) rank_sum += mid_rank;
    }
    i = j;
  }
  const auto np = static_cast<double>(positive.size());
  const auto nn = static_cast<double>(negative.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

// Unweighted mean of per-class F1 over classes present in truth or prediction.
inline double macro_f1(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size() || truth.empty()) throw DataError("macro F1 needs matching non-empty inputs");
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(predicted.begin(), predicted.end());
  double total = 0.0;
  for (int c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == c, p = predicted[i] == c;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  return total / static_cast<double>(classes.size());
}

// Supplied binary features followed by a one-hot log2 degree bucket.
inline Eigen::MatrixXd gcn_input_features(const Graph& g, std::size_t buckets) {
  const std::size_t n = g.num_nodes();
  const std::size_t d = g.features() ? g.features()->cols() : 0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d + buckets));
  for (NodeId v = 0; v < n; ++v) {
    for (std::size_t j = 0; j < d; ++j) x(v, static_cast<Eigen::Index>(j)) = (*g.features())(v, j);
    if (buckets > 0) {
      const auto b = std::min<std::size_t>(buckets - 1, static_cast<std::size_t>(std::log2(g.degree(v) + 1.0)));
      x(v, static_cast<Eigen::Index>(d + b)) = 1.0;
    }
  }
  return x;
}

// D^-1/2 (A + I) D^-1/2
inline Eigen::SparseMatrix<double> normalized_adjacency(std::size_t n, std::span<const Edge> edges) {
  std::vector<double> deg(n, 1.0);
  for (auto [u, v] : edges) {
    deg[u] += 1.0;
    deg[v] += 1.0;
  }
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(n + 2 * edges.size());
  for (std::size_t v = 0; v < n; ++v) {
    const auto i = static_cast<int>(v);
    entries.emplace_back(i, i, 1.0 / deg[v]);
  }
  for (auto [u, v] : edges) {
    const double w = 1.0 / std::sqrt(deg[u] * deg[v]);
    entries.emplace_back(static_cast<int>(u), static_cast<int>(v), w);
    entries.emplace_back(static_cast<int>(v), static_cast<int>(u), w);
  }
  Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

// ---------------------------------------------------------------------------
// Model

// Two graph-convolution layers:
//   H = relu(A X W1 + b1),  Z = A (H * mask) W2 + b2
// with hand-derived gradients. A is symmetric, so A^T = A in backprop.
class GcnModel {
 public:
  GcnModel(Eigen::SparseMatrix<double> adjacency, const Eigen::MatrixXd& features)
      : adjacency_(std::move(adjacency)), propagated_(adjacency_ * features) {}

  Eigen::Index num_nodes() const { return adjacency_.rows(); }
  Eigen::Index input_dim() const { return propagated_.cols(); }

  GcnParams init(std::size_t hidden, std::size_t out, Rng& rng) const {
    auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
      const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
      Eigen::MatrixXd m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform() - 1.0) * a;
      return m;
    };
    GcnParams p;
    p.w1 = glorot(input_dim(), static_cast<Eigen::Index>(hidden));
    p.b1 = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(hidden));
    p.w2 = glorot(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(out));
    p.b2 = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(out));
    return p;
  }

  // Inverted-dropout mask (entries 0 or 1/(1-rate)).
  Eigen::MatrixXd dropout_mask(std::size_t hidden, double rate, Rng& rng) const {
    Eigen::MatrixXd m(num_nodes(), static_cast<Eigen::Index>(hidden));
    const double keep_scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    return m;
  }

  Eigen::MatrixXd forward(const GcnParams& p, const Eigen::MatrixXd* mask = nullptr) const {
    Cache c;
    return forward(p, mask, c);
  }

  // Mean softmax cross-entropy over `nodes`.
  double classification_loss(const GcnParams& p, std::span<const NodeId> nodes, std::span<const int> labels,
                             const Eigen::MatrixXd* mask, GcnParams* grad) const {
    Cache c;
    const Eigen::MatrixXd logits = forward(p, mask, c);
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto row = logits.row(nodes[i]);
      const double peak = row.maxCoeff();
      const Eigen::RowVectorXd e = (row.array() - peak).exp();
      const double z = e.sum();
      loss -= (row(labels[i]) - peak - std::log(z)) * scale;
      Eigen::RowVectorXd soft = e / z;
      soft(labels[i]) -= 1.0;
      d_out.row(nodes[i]) += soft * scale;
    }
    if (grad) backward(p, mask, c, d_out, *grad);
    return loss;
  }

  // Mean binary cross-entropy of sigmoid(z_u . z_v) against `targets`.
  double link_loss(const GcnParams& p, std::span<const Edge> pairs, std::span<const double> targets,
                   const Eigen::MatrixXd* mask, GcnParams* grad) const {
    Cache c;
    const Eigen::MatrixXd z = forward(p, mask, c);
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(z.rows(), z.cols());
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto [u, v] = pairs[i];
      const double s = z.row(u).dot(z.row(v));
      // log(1 + e^s) - y s, stable form
      loss += (std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))) - targets[i] * s) * scale;
      const double g = (1.0 / (1.0 + std::exp(-s)) - targets[i]) * scale;
      d_out.row(u) += g * z.row(v);
      d_out.row(v) += g * z.row(u);
    }
    if (grad) backward(p, mask, c, d_out, *grad);
    return loss;
  }

 private:
  struct Cache {
    Eigen::MatrixXd pre;     // A X W1 + b1
    Eigen::MatrixXd hidden;  // relu(pre) * mask
    Eigen::MatrixXd mixed;   // A hidden
  };

  Eigen::MatrixXd forward(const GcnParams& p, const Eigen::MatrixXd* mask, Cache& c) const {
    c.pre = propagated_ * p.w1;
    c.pre.rowwise() += p.b1;
    c.hidden = c.pre.cwiseMax(0.0);
    if (mask) c.hidden = c.hidden.cwiseProduct(*mask);
    c.mixed = adjacency_ * c.hidden;
    Eigen::MatrixXd out = c.mixed * p.w2;
    out.rowwise() += p.b2;
    return out;
  }

  void backward(const GcnParams& p, const Eigen::MatrixXd* mask, const Cache& c, const Eigen::MatrixXd& d_out,
                GcnParams& grad) const {
    grad.w2 = c.mixed.transpose() * d_out;
    grad.b2 = d_out.colwise().sum();
    Eigen::MatrixXd d_hidden = adjacency_ * (d_out * p.w2.transpose());
    if (mask) d_hidden = d_hidden.cwiseProduct(*mask);
    const Eigen::MatrixXd d_pre = d_hidden.cwiseProduct((c.pre.array() > 0.0).cast<double>().matrix());
    grad.w1 = propagated_.transpose() * d_pre;
    grad.b1 = d_pre.colwise().sum();
  }

  Eigen::SparseMatrix<double> adjacency_;
  Eigen::MatrixXd propagated_;  // A X, fixed for a given graph
};

// Adam with the usual defaults.
class Adam {
 public:
  explicit Adam(double lr, const GcnParams& shape) : lr_(lr) {
    m_.set_zero_like(shape);
    v_.set_zero_like(shape);
  }

  void step(GcnParams& p, GcnParams& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    update(p.w1, g.w1, m_.w1, v_.w1, c1, c2);
    update(p.b1, g.b1, m_.b1, v_.b1, c1, c2);
    update(p.w2, g.w2, m_.w2, v_.w2, c1, c2);
    update(p.b2, g.b2, m_.b2, v_.b2, c1, c2);
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  template <typename M>
  void update(M& param, const M& grad, M& m, M& v, double c1, double c2) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
  }

  double lr_;
  std::size_t t_ = 0;
  GcnParams m_, v_;
};

// ---------------------------------------------------------------------------
// Training / evaluation

namespace detail {

inline std::uint64_t pair_key(NodeId u, NodeId v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | v;
}

inline std::vector<Edge> sample_non_edges(const Graph& g, std::size_t count, const std::set<std::uint64_t>& exclude,
                                          Rng& rng) {
  const std::size_t n = g.num_nodes();
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  if (static_cast<double>(g.num_edges() + exclude.size() + count) > pairs) {
    throw DataError("not enough non-edges to sample negatives");
  }
  std::set<std::uint64_t> taken;
  std::vector<Edge> out;
  while (out.size() < count) {
    auto u = static_cast<NodeId>(rng.uniform_int(n));
    auto v = static_cast<NodeId>(rng.uniform_int(n));
    if (u == v || g.has_edge(u, v)) continue;
    if (u > v) std::swap(u, v);
    const auto key = pair_key(u, v);
    if (exclude.count(key) || !taken.insert(key).second) continue;
    out.emplace_back(u, v);
  }
  return out;
}

inline std::vector<double> pair_scores(const Eigen::MatrixXd& z, std::span<const Edge> pairs) {
  std::vector<double> s;
  s.reserve(pairs.size());
  for (auto [u, v] : pairs) s.push_back(z.row(u).dot(z.row(v)));
  return s;
}

inline std::vector<int> predict_classes(const Eigen::MatrixXd& logits, std::span<const NodeId> nodes) {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (NodeId v : nodes) {
    Eigen::Index best = 0;
    logits.row(v).maxCoeff(&best);
    out.push_back(static_cast<int>(best));
  }
  return out;
}

inline GcnTestSet make_node_split(const Graph& g, const GcnConfig& cfg, Rng& rng) {
  const std::size_t n = g.num_nodes();
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  rng.shuffle(std::span<NodeId>(order));
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(cfg.test_fraction * n)));
  const auto n_val = static_cast<std::size_t>(std::round(cfg.val_fraction * n));
  if (n_test + n_val >= n) throw DataError("graph too small for the requested split");
  GcnTestSet t;
  t.task = GcnTask::node_classification;
  t.test_nodes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  t.val_nodes.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                     order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  for (NodeId v : t.test_nodes) t.test_labels.push_back((*g.labels())[v]);
  for (NodeId v : t.val_nodes) t.val_labels.push_back((*g.labels())[v]);
  return t;
}

inline GcnTestSet make_link_split(const Graph& g, const GcnConfig& cfg, Rng& rng) {
  std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  rng.shuffle(std::span<Edge>(edges));
  const std::size_t m = edges.size();
  const auto n_test = static_cast<std::size_t>(std::round(cfg.test_fraction * m));
  const auto n_val = static_cast<std::size_t>(std::round(cfg.val_fraction * m));
  if (n_test == 0 || n_test + n_val >= m) throw DataError("graph has too few edges for the requested split");
  GcnTestSet t;
  t.task = GcnTask::link_prediction;
  t.test_pos.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_test));
  t.val_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_test),
                   edges.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  const auto negatives = sample_non_edges(g, n_test + n_val, {}, rng);
  t.test_neg.assign(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(n_test));
  t.val_neg.assign(negatives.begin() + static_cast<std::ptrdiff_t>(n_test), negatives.end());
  return t;
}

}  // namespace detail

// Trains a two-layer GCN on `g` and scores the held-out items: AUROC for link
// prediction, macro F1 for node classification. With `fixed`, exactly those
// held-out items are used (labels included), otherwise a fresh split of `g`.
// Early stopping keeps the parameters with the best validation score.
inline GcnResult gcn_train_eval(const Graph& g, GcnTask task, const GcnConfig& cfg,
                                const std::optional<GcnTestSet>& fixed = std::nullopt) {
  cfg.validate();
  Rng rng(cfg.seed);
  Rng split_stream = rng.split(1);
  Rng init_stream = rng.split(2);
  Rng train_stream = rng.split(3);

  GcnResult result;
  if (fixed && fixed->task != task) throw std::invalid_argument("fixed test set is for another task");
  if (task == GcnTask::node_classification) {
    if (!g.labels()) throw DataError("node classification needs labels");
    result.test_set = fixed ? *fixed : detail::make_node_split(g, cfg, split_stream);
  } else {
    result.test_set = fixed ? *fixed : detail::make_link_split(g, cfg, split_stream);
  }
  const GcnTestSet& held = result.test_set;
  const std::size_t n = g.num_nodes();

  const Eigen::MatrixXd x = gcn_input_features(g, cfg.degree_buckets);
  std::optional<GcnModel> model;
  std::vector<NodeId> train_nodes;
  std::vector<int> train_labels;
  std::vector<Edge> train_edges;
  std::set<std::uint64_t> held_pairs;
  std::size_t out_dim = cfg.embedding_dim;

  if (task == GcnTask::node_classification) {
    if (held.test_nodes.empty()) throw DataError("no test nodes");
    std::vector<char> excluded(n, 0);
    for (NodeId v : held.test_nodes) {
      if (v >= n) throw DataError("test node out of range");
      excluded[v] = 1;
    }
    for (NodeId v : held.val_nodes) {
      if (v >= n) throw DataError("validation node out of range");
      excluded[v] = 1;
    }
    int max_label = 0;
    for (NodeId v = 0; v < n; ++v) {
      max_label = std::max(max_label, (*g.labels())[v]);
      if (!excluded[v]) {
        train_nodes.push_back(v);
        train_labels.push_back((*g.labels())[v]);
      }
    }
    for (int l : held.test_labels) max_label = std::max(max_label, l);
    for (int l : held.val_labels) max_label = std::max(max_label, l);
    if (train_nodes.empty()) throw DataError("no training nodes");
    out_dim = static_cast<std::size_t>(max_label) + 1;
    model.emplace(normalized_adjacency(n, g.edges()), x);
  } else {
    if (held.test_pos.empty() || held.test_neg.empty()) throw DataError("link prediction needs positive and negative test pairs");
    for (const auto* list : {&held.test_pos, &held.test_neg, &held.val_pos, &held.val_neg}) {
      for (auto [u, v] : *list) {
        if (u >= n || v >= n) throw DataError("held-out pair out of range");
        held_pairs.insert(detail::pair_key(u, v));
      }
    }
    for (auto e : g.edges()) {
      if (!held_pairs.count(detail::pair_key(e.first, e.second))) train_edges.push_back(e);
    }
    if (train_edges.empty()) throw DataError("no training edges left after holding out test pairs");
    model.emplace(normalized_adjacency(n, train_edges), x);
  }

  GcnParams params = model->init(cfg.hidden_dim, out_dim, init_stream);
  GcnParams grad;
  Adam adam(cfg.learning_rate, params);

  auto evaluate = [&](const GcnParams& p, bool on_test) {
    const Eigen::MatrixXd out = model->forward(p);
    if (task == GcnTask::node_classification) {
      const auto& nodes = on_test ? held.test_nodes : held.val_nodes;
      const auto& labels = on_test ? held.test_labels : held.val_labels;
      if (nodes.empty()) return 0.0;
      return macro_f1(labels, detail::predict_classes(out, nodes));
    }
    const auto& pos = on_test ? held.test_pos : held.val_pos;
    const auto& neg = on_test ? held.test_neg : held.val_neg;
    if (pos.empty() || neg.empty()) return 0.0;
    return auroc(detail::pair_scores(out, pos), detail::pair_scores(out, neg));
  };

  const bool has_val = task == GcnTask::node_classification ? !held.val_nodes.empty()
                                                            : !(held.val_pos.empty() || held.val_neg.empty());
  GcnParams best = params;
  double best_val = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<Edge> pairs;
  std::vector<double> targets;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Eigen::MatrixXd mask = model->dropout_mask(cfg.hidden_dim, cfg.dropout, train_stream);
    const Eigen::MatrixXd* mask_ptr = cfg.dropout > 0.0 ? &mask : nullptr;
    double loss = 0.0;
    if (task == GcnTask::node_classification) {
      loss = model->classification_loss(params, train_nodes, train_labels, mask_ptr, &grad);
    } else {
      const Graph structure = Graph::from_edges(n, train_edges);
      std::set<std::uint64_t> exclude = held_pairs;
      const auto negatives = detail::sample_non_edges(structure, train_edges.size(), exclude, train_stream);
      pairs.assign(train_edges.begin(), train_edges.end());
      pairs.insert(pairs.end(), negatives.begin(), negatives.end());
      targets.assign(train_edges.size(), 1.0);
      targets.resize(pairs.size(), 0.0);
      loss = model->link_loss(params, pairs, targets, mask_ptr, &grad);
    }
    result.loss_history.push_back(loss);
    adam.step(params, grad);
    result.epochs_run = epoch + 1;

    if (has_val) {
      const double val = evaluate(params, false);
      if (val > best_val) {
        best_val = val;
        best = params;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    } else {
      best = params;
    }
  }
  result.metric = evaluate(best, true);
  return result;
}

}  // namespace dpgraph
