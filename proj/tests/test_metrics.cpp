#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "dpgraph/metrics.hpp"
#include "fixtures.hpp"

using namespace dpgraph;

namespace {

constexpr int kInf = std::numeric_limits<int>::max() / 4;

// All-pairs distances and shortest-path counts by repeated relaxation.
struct PathTable {
  std::vector<std::vector<int>> dist;
  std::vector<std::vector<double>> count;
};

PathTable all_pairs(const Graph& g) {
  const std::size_t n = g.num_nodes();
  PathTable t{std::vector<std::vector<int>>(n, std::vector<int>(n, kInf)),
              std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0))};
  for (NodeId s = 0; s < n; ++s) {
    t.dist[s][s] = 0;
    t.count[s][s] = 1;
    for (int d = 1; d < static_cast<int>(n); ++d) {
      for (NodeId v = 0; v < n; ++v) {
        if (t.dist[s][v] != kInf) continue;
        double paths = 0;
        for (NodeId u = 0; u < n; ++u)
          if (g.has_edge(u, v) && t.dist[s][u] == d - 1) paths += t.count[s][u];
        if (paths > 0) {
          t.dist[s][v] = d;
          t.count[s][v] = paths;
        }
      }
    }
  }
  return t;
}

std::vector<double> betweenness_oracle(const Graph& g) {
  const std::size_t n = g.num_nodes();
  const auto t = all_pairs(g);
  std::vector<double> b(n, 0.0);
  for (NodeId s = 0; s < n; ++s)
    for (NodeId u = s + 1; u < n; ++u) {
      if (t.dist[s][u] == kInf) continue;
      for (NodeId v = 0; v < n; ++v) {
        if (v == s || v == u || t.dist[s][v] == kInf || t.dist[v][u] == kInf) continue;
        if (t.dist[s][v] + t.dist[v][u] == t.dist[s][u]) b[v] += t.count[s][v] * t.count[v][u] / t.count[s][u];
      }
    }
  return b;
}

std::vector<double> closeness_oracle(const Graph& g) {
  const std::size_t n = g.num_nodes();
  const auto t = all_pairs(g);
  std::vector<double> c(n, 0.0);
  for (NodeId v = 0; v < n; ++v) {
    double total = 0;
    std::size_t reach = 0;
    for (NodeId u = 0; u < n; ++u)
      if (u != v && t.dist[v][u] != kInf) {
        total += t.dist[v][u];
        ++reach;
      }
    if (reach > 0) c[v] = static_cast<double>(reach) / total;
  }
  return c;
}

double modularity_oracle(const Graph& g, const Partition& c) {
  const std::size_t n = g.num_nodes();
  const double two_m = 2.0 * static_cast<double>(g.num_edges());
  double q = 0.0;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = 0; j < n; ++j)
      if (c[i] == c[j])
        q += (g.has_edge(i, j) ? 1.0 : 0.0) -
             static_cast<double>(g.degree(i)) * static_cast<double>(g.degree(j)) / two_m;
  return q / two_m;
}

// Dense linear solve of x = (1-d)/n + d (M x + dangling x / n).
std::vector<double> pagerank_oracle(const Graph& g, double d) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index u = 0; u < n; ++u) {
    const auto deg = g.degree(static_cast<NodeId>(u));
    for (Eigen::Index v = 0; v < n; ++v) {
      if (deg == 0) {
        a(v, u) -= d / static_cast<double>(n);
      } else if (g.has_edge(static_cast<NodeId>(u), static_cast<NodeId>(v))) {
        a(v, u) -= d / static_cast<double>(deg);
      }
    }
  }
  const Eigen::VectorXd rhs = Eigen::VectorXd::Constant(n, (1 - d) / static_cast<double>(n));
  const Eigen::VectorXd x = a.partialPivLu().solve(rhs);
  return {x.data(), x.data() + n};
}

double ari_oracle(const Partition& a, const Partition& b) {
  const std::size_t n = a.size();
  double both = 0, in_a = 0, in_b = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      both += a[i] == a[j] && b[i] == b[j];
      in_a += a[i] == a[j];
      in_b += b[i] == b[j];
    }
  const double pairs = n * (n - 1) / 2.0;
  const double expected = in_a * in_b / pairs;
  return (both - expected) / (0.5 * (in_a + in_b) - expected);
}

// Equal-size reduction: repeat each sample so both sides have |a||b| points.
double w1_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> x, y;
  for (double v : a) x.insert(x.end(), b.size(), v);
  for (double v : b) y.insert(y.end(), a.size(), v);
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

Partition random_partition(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> l(n);
  for (auto& x : l) x = rng.uniform_int(k);
  return Partition::from_labels(std::span<const std::size_t>(l));
}

Graph k4_minus_edge() { return Graph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}}); }

}  // namespace

TEST(Error, Examples) {
  EXPECT_EQ(error(ErrorType::absolute, 3, 5), 2);
  EXPECT_EQ(error(ErrorType::relative, 4, 5), 0.25);
  EXPECT_EQ(error(ErrorType::absolute, 7.5, 7.5), 0);
  EXPECT_THROW(error(ErrorType::relative, 0, 1), std::invalid_argument);
  MetricReport r;
  EXPECT_THROW(r.add("x", -1, ErrorKind::absolute), std::invalid_argument);
  r.add("x", -1, ErrorKind::raw);
  EXPECT_EQ(parse_error_kind(to_string(ErrorKind::wasserstein)), ErrorKind::wasserstein);
}

TEST(Density, Examples) {
  EXPECT_EQ(density(fixtures::complete(3)), 1.0);
  EXPECT_EQ(density(Graph::empty(5)), 0.0);
  EXPECT_THROW(density(Graph::empty(1)), std::invalid_argument);
}

TEST(HarmonicDiameter, Examples) {
  EXPECT_DOUBLE_EQ(harmonic_diameter(fixtures::complete(3)), 1.0);
  EXPECT_DOUBLE_EQ(harmonic_diameter(fixtures::path(3)), 1.2);
  EXPECT_DOUBLE_EQ(harmonic_diameter(Graph::from_edges(4, {{0, 1}, {2, 3}})), 3.0);
  EXPECT_THROW(harmonic_diameter(Graph::empty(4)), std::invalid_argument);
  EXPECT_THROW(harmonic_diameter(Graph::empty(1)), std::invalid_argument);
}

TEST(HarmonicDiameter, MatchesDistanceOracle) {
  Rng rng(1);
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 2 + rng.uniform_int(14);
    const Graph g = fixtures::gnp(n, 0.3, rng);
    const auto t = all_pairs(g);
    double recip = 0;
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = u + 1; v < n; ++v)
        if (t.dist[u][v] != kInf) recip += 1.0 / t.dist[u][v];
    if (recip == 0) continue;
    EXPECT_NEAR(harmonic_diameter(g), n * (n - 1) / 2.0 / recip, 1e-12);
  }
}

TEST(Assortativity, Examples) {
  EXPECT_NEAR(*assortativity(fixtures::path(3)), -1.0, 1e-12);
  EXPECT_FALSE(assortativity(fixtures::complete(4)).has_value());
  EXPECT_FALSE(assortativity(Graph::empty(4)).has_value());
}

TEST(Assortativity, MatchesPearsonOracle) {
  Rng rng(2);
  for (int c = 0; c < 100; ++c) {
    const Graph g = fixtures::gnp(5 + rng.uniform_int(20), 0.3, rng);
    std::vector<double> x, y;
    for (auto [u, v] : g.edges()) {
      x.push_back(static_cast<double>(g.degree(u)));
      y.push_back(static_cast<double>(g.degree(v)));
      x.push_back(static_cast<double>(g.degree(v)));
      y.push_back(static_cast<double>(g.degree(u)));
    }
    const auto got = assortativity(g);
    if (x.empty()) {
      EXPECT_FALSE(got);
      continue;
    }
    const double k = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / k;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / k;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0) {
      EXPECT_FALSE(got);
      continue;
    }
    ASSERT_TRUE(got);
    EXPECT_NEAR(*got, sxy / std::sqrt(sxx * syy), 1e-9);
  }
}

TEST(Modularity, Examples) {
  const Graph two = fixtures::cliques(2, 3);
  EXPECT_DOUBLE_EQ(modularity(two, Partition::from_labels({0, 0, 0, 1, 1, 1})), 0.5);
  EXPECT_EQ(modularity(two, Partition::single_block(6)), 0.0);
  EXPECT_THROW(modularity(Graph::empty(3), Partition::single_block(3)), std::invalid_argument);
  EXPECT_THROW(modularity(two, Partition::single_block(5)), std::invalid_argument);
}

TEST(Modularity, MatchesOrderedPairOracle) {
  Rng rng(3);
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 3 + rng.uniform_int(20);
    const Graph g = fixtures::gnp(n, 0.3, rng);
    if (g.num_edges() == 0) continue;
    const Partition p = random_partition(n, 1 + rng.uniform_int(5), rng);
    EXPECT_NEAR(modularity(g, p), modularity_oracle(g, p), 1e-12);
    EXPECT_EQ(modularity(g, Partition::single_block(n)), 0.0);
  }
}

TEST(Clustering, Examples) {
  for (double c : clustering_coefficients(fixtures::complete(3))) EXPECT_EQ(c, 1.0);
  EXPECT_EQ(clustering_coefficients(fixtures::star(5))[0], 0.0);
  EXPECT_DOUBLE_EQ(clustering_coefficients(k4_minus_edge())[0], 2.0 / 3.0);
  EXPECT_EQ(clustering_coefficients(fixtures::path(2))[0], 0.0);
}

TEST(Clustering, MatchesTriangleEnumeration) {
  Rng rng(4);
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 3 + rng.uniform_int(15);
    const Graph g = fixtures::gnp(n, 0.4, rng);
    const auto got = clustering_coefficients(g);
    for (NodeId v = 0; v < n; ++v) {
      double tri = 0;
      for (NodeId a = 0; a < n; ++a)
        for (NodeId b = a + 1; b < n; ++b) tri += g.has_edge(v, a) && g.has_edge(v, b) && g.has_edge(a, b);
      const double d = static_cast<double>(g.degree(v));
      const double expect = d < 2 ? 0.0 : 2 * tri / (d * (d - 1));
      EXPECT_NEAR(got[v], expect, 1e-12);
      EXPECT_GE(got[v], 0.0);
      EXPECT_LE(got[v], 1.0);
    }
  }
}

TEST(Betweenness, Examples) {
  for (double b : betweenness(fixtures::complete(3)).values) EXPECT_EQ(b, 0.0);
  const auto p = betweenness(fixtures::path(3)).values;
  EXPECT_EQ(p, (std::vector<double>{0, 1, 0}));
  EXPECT_DOUBLE_EQ(betweenness(fixtures::star(5)).values[0], 6.0);
  EXPECT_THROW(betweenness(fixtures::path(3), CentralityMode::sampled(0.0)), std::invalid_argument);
}

TEST(Betweenness, MatchesPathCountingOracle) {
  Rng rng(5);
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 3 + rng.uniform_int(14);
    const Graph g = fixtures::gnp(n, 0.3, rng);
    const auto got = betweenness(g).values;
    const auto want = betweenness_oracle(g);
    for (NodeId v = 0; v < n; ++v) EXPECT_NEAR(got[v], want[v], 1e-9);
  }
}

TEST(Closeness, Examples) {
  const auto p = closeness(fixtures::path(3)).values;
  EXPECT_DOUBLE_EQ(p[1], 1.0);
  EXPECT_DOUBLE_EQ(p[0], 2.0 / 3.0);
  for (double c : closeness(fixtures::complete(4)).values) EXPECT_EQ(c, 1.0);
  const Graph with_isolated = Graph::from_edges(3, {{0, 1}});
  EXPECT_EQ(closeness(with_isolated).values[2], 0.0);
  EXPECT_EQ(closeness(with_isolated).values[0], 1.0);
}

TEST(Closeness, MatchesDistanceOracle) {
  Rng rng(6);
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 2 + rng.uniform_int(15);
    const Graph g = fixtures::gnp(n, 0.25, rng);
    const auto got = closeness(g).values;
    const auto want = closeness_oracle(g);
    for (NodeId v = 0; v < n; ++v) EXPECT_NEAR(got[v], want[v], 1e-12);
  }
}

// 50 random graphs with n <= 200: every node with non-zero centrality is
// estimated within 1%.
TEST(Centrality, SampledWithinOnePercentOfExact) {
  Rng rng(7);
  double worst_b = 0, worst_c = 0;
  std::size_t sampled_b = 0, total = 0;
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = 50 + rng.uniform_int(151);
    const double mean_degree = 3 + 5 * rng.uniform();
    const Graph g = fixtures::gnp(n, mean_degree / static_cast<double>(n - 1), rng);
    const auto eb = betweenness(g).values;
    const auto sb = betweenness(g, CentralityMode::sampled(), rng.split(c, 1));
    const auto ec = closeness(g).values;
    const auto sc = closeness(g, CentralityMode::sampled(), rng.split(c, 2));
    sampled_b += sb.samples_used;
    total += n;
    EXPECT_EQ(sb.target_rel_error, 0.01);
    for (NodeId v = 0; v < n; ++v) {
      if (eb[v] > 0) worst_b = std::max(worst_b, std::abs(sb.values[v] - eb[v]) / eb[v]);
      if (ec[v] > 0) worst_c = std::max(worst_c, std::abs(sc.values[v] - ec[v]) / ec[v]);
    }
  }
  EXPECT_LE(worst_b, 0.01);
  EXPECT_LE(worst_c, 0.01);
  RecordProperty("betweenness_sources_fraction", std::to_string(static_cast<double>(sampled_b) / total));
}

TEST(Centrality, SamplingSavesWorkOnLargerGraphs) {
  Rng rng(8);
  const Graph g = fixtures::gnp(2000, 10.0 / 1999, rng);
  const auto sc = closeness(g, CentralityMode::sampled(), rng);
  EXPECT_LT(sc.samples_used, g.num_nodes());
  const auto ec = closeness(g).values;
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    if (ec[v] > 0) {
      EXPECT_NEAR(sc.values[v], ec[v], 0.01 * ec[v]);
    }
}

TEST(PageRank, Examples) {
  for (double s : pagerank(fixtures::cycle(5))) EXPECT_NEAR(s, 0.2, 1e-12);
  const auto two = pagerank(fixtures::path(2));
  EXPECT_NEAR(two[0], 0.5, 1e-12);
  EXPECT_NEAR(two[1], 0.5, 1e-12);
  EXPECT_THROW(pagerank(fixtures::path(2), 1.0), std::invalid_argument);
  EXPECT_THROW(pagerank(fixtures::path(2), 0.0), std::invalid_argument);
}

TEST(PageRank, StarMatchesFixedPointOracle) {
  // Centre c and leaf l satisfy c = 0.15/4 + 0.85 * 3 l, l = 0.15/4 + 0.85 c / 3.
  double c = 0.25, l = 0.25;
  for (int it = 0; it < 2000; ++it) {
    const double nc = 0.15 / 4 + 0.85 * 3 * l;
    const double nl = 0.15 / 4 + 0.85 * c / 3;
    c = nc;
    l = nl;
  }
  const auto pr = pagerank(fixtures::star(4));
  EXPECT_NEAR(pr[0], c, 1e-8);
  EXPECT_NEAR(pr[1], l, 1e-8);
  EXPECT_NEAR(c, 0.133125 / 0.2775, 1e-12);
}

TEST(PageRank, MatchesLinearSolveWithDanglingNodes) {
  Rng rng(9);
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 1 + rng.uniform_int(25);
    const Graph g = fixtures::gnp(n, 0.15, rng);
    const auto got = pagerank(g);
    const auto want = pagerank_oracle(g, 0.85);
    EXPECT_NEAR(std::accumulate(got.begin(), got.end(), 0.0), 1.0, 1e-9);
    for (NodeId v = 0; v < n; ++v) EXPECT_NEAR(got[v], want[v], 1e-9);
  }
}

TEST(Louvain, TwoCliquesMatchBruteForceOptimum) {
  const Graph g = fixtures::cliques(2, 4);
  // Enumerate all set partitions of 8 nodes via restricted growth strings.
  std::vector<std::size_t> rgs(8, 0);
  double best = -1;
  Partition best_p = Partition::single_block(8);
  while (true) {
    const Partition p = Partition::from_labels(std::span<const std::size_t>(rgs));
    const double q = modularity_oracle(g, p);
    if (q > best + 1e-12) {
      best = q;
      best_p = p;
    }
    int i = 7;
    for (; i > 0; --i) {
      const std::size_t mx = *std::max_element(rgs.begin(), rgs.begin() + i);
      if (rgs[i] <= mx) {
        ++rgs[i];
        std::fill(rgs.begin() + i + 1, rgs.end(), 0);
        break;
      }
    }
    if (i == 0) break;
  }
  EXPECT_EQ(best_p, Partition::from_labels({0, 0, 0, 0, 1, 1, 1, 1}));
  Rng rng(10);
  const Partition found = louvain(g, rng);
  EXPECT_EQ(found, best_p);
  EXPECT_NEAR(modularity(g, found), best, 1e-12);
}

TEST(Louvain, SmallExamples) {
  Rng rng(11);
  EXPECT_EQ(louvain(fixtures::complete(3), rng).num_communities(), 1u);
  const Graph three = fixtures::cliques(3, 5);
  const Partition p = louvain(three, rng);
  EXPECT_EQ(p.num_communities(), 3u);
  EXPECT_EQ(ari(p, Partition::from_labels({0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2})), 1.0);
  EXPECT_THROW(louvain(Graph::empty(3), rng), std::invalid_argument);
}

TEST(Louvain, PropertiesOnRandomGraphs) {
  Rng rng(12);
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 5 + rng.uniform_int(60);
    const Graph g = fixtures::gnp(n, 4.0 / static_cast<double>(n), rng);
    if (g.num_edges() == 0) continue;
    Rng a = rng.split(c), b = rng.split(c);
    const Partition p = louvain(g, a);
    EXPECT_EQ(p, louvain(g, b));
    const double q = modularity(g, p);
    EXPECT_GE(q, modularity(g, Partition::singletons(n)) - 1e-12);
    Rng again = rng.split(c, 1);
    EXPECT_GE(modularity(g, louvain(g, again, p)), q - 1e-12);
  }
}

TEST(Ari, Examples) {
  const Partition p = Partition::from_labels({0, 0, 1, 1, 2, 2});
  EXPECT_EQ(ari(p, p), 1.0);
  EXPECT_EQ(ari(p, Partition::from_labels({7, 7, 3, 3, 5, 5})), 1.0);
  EXPECT_EQ(ari(Partition::singletons(6), Partition::single_block(6)), 0.0);
  EXPECT_THROW(ari(p, Partition::single_block(5)), std::invalid_argument);
}

TEST(Ari, MatchesPairCountingOracle) {
  Rng rng(13);
  for (int c = 0; c < 200; ++c) {
    const std::size_t n = 4 + rng.uniform_int(30);
    const Partition a = random_partition(n, 1 + rng.uniform_int(6), rng);
    const Partition b = random_partition(n, 1 + rng.uniform_int(6), rng);
    const double got = ari(a, b);
    EXPECT_LE(got, 1.0 + 1e-12);
    if (a.num_communities() == 1 && b.num_communities() == 1) continue;
    EXPECT_NEAR(got, ari_oracle(a, b), 1e-12);
    EXPECT_NEAR(got, ari(b, a), 1e-12);
  }
}

TEST(Wasserstein, Examples) {
  const std::vector<double> a{1, 5, 2};
  EXPECT_EQ(wasserstein1(a, a), 0.0);
  EXPECT_EQ(wasserstein1(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 1.0);
  EXPECT_THROW(wasserstein1(std::vector<double>{}, a), std::invalid_argument);
  // Same distribution, different sample sizes.
  EXPECT_EQ(wasserstein1(std::vector<double>{1, 2}, std::vector<double>{1, 1, 2, 2}), 0.0);
}

TEST(Wasserstein, Properties) {
  Rng rng(14);
  auto draw = [&](std::size_t k) {
    std::vector<double> v(k);
    for (auto& x : v) x = rng.normal() * 3 + static_cast<double>(rng.uniform_int(4));
    return v;
  };
  for (int c = 0; c < 200; ++c) {
    const std::size_t k = 1 + rng.uniform_int(40);
    const auto a = draw(k), b = draw(k), x = draw(1 + rng.uniform_int(40)), y = draw(1 + rng.uniform_int(40));
    std::vector<double> sa(a), sb(b);
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double mean = 0;
    for (std::size_t i = 0; i < k; ++i) mean += std::abs(sa[i] - sb[i]);
    EXPECT_NEAR(wasserstein1(a, b), mean / static_cast<double>(k), 1e-12);
    EXPECT_NEAR(wasserstein1(a, x), w1_oracle(a, x), 1e-9);
    EXPECT_EQ(wasserstein1(x, y), wasserstein1(y, x));
    EXPECT_LE(wasserstein1(a, y), wasserstein1(a, x) + wasserstein1(x, y) + 1e-9);
    EXPECT_GT(wasserstein1(a, b), 0.0);
  }
}
