#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "dpgraph/dp.hpp"
#include "dpgraph/mechanisms.hpp"
#include "fixtures.hpp"

using namespace dpgraph;

namespace {

PrivacyParams edge_local(double eps) { return PrivacyParams(eps, 0, PrivacyTarget::edge, TrustModel::local); }
PrivacyParams edge_central(double eps) { return PrivacyParams(eps, 0, PrivacyTarget::edge, TrustModel::central); }
PrivacyParams node_central(double eps) { return PrivacyParams(eps, 0, PrivacyTarget::node, TrustModel::central); }
PrivacyParams attr_local(double eps) {
  return PrivacyParams(eps, 0, PrivacyTarget::node_attribute, TrustModel::local);
}

}  // namespace

TEST(EdgeRr, HugeEpsilonKeepsGraph) {
  Rng rng(1);
  const Graph g = fixtures::gnp(60, 0.1, rng);
  EXPECT_TRUE(edge_rr(g, edge_local(200), rng).same_structure(g));
}

TEST(EdgeRr, EmptyGraphExpectedEdges) {
  const double f = 1.0 / (1.0 + std::exp(1.0));
  const double pairs = 4950;
  ASSERT_NEAR(pairs * f, 1331.26, 0.01);
  Rng rng(2);
  const Graph g = Graph::empty(100);
  double sum = 0.0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) sum += static_cast<double>(edge_rr(g, edge_local(1), rng).num_edges());
  const double sigma_of_mean = std::sqrt(pairs * f * (1 - f) / trials);
  EXPECT_NEAR(sum / trials, pairs * f, 3 * sigma_of_mean);
}

TEST(EdgeRr, RetainedEdgesOfK4) {
  const double f = rr_flip_prob(1.0);
  ASSERT_NEAR(6 * (1 - f), 4.39, 0.01);
  Rng rng(3);
  const Graph k4 = fixtures::complete(4);
  const int trials = 20000;
  double kept = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Graph h = edge_rr(k4, edge_local(1), rng);
    for (auto [u, v] : k4.edges()) kept += h.has_edge(u, v);
  }
  EXPECT_NEAR(kept / trials, 6 * (1 - f), 3 * std::sqrt(6 * f * (1 - f) / trials));
}

TEST(EdgeRr, PerBitFlipFrequency) {
  Rng rng(4);
  const Graph g = fixtures::gnp(200, 0.2, rng);
  const double eps = 1.5, f = rr_flip_prob(eps);
  std::size_t flips = 0, bits = 0;
  while (bits < 1000000) {
    const Graph h = edge_rr(g, edge_local(eps), rng);
    for (NodeId u = 0; u < 200; ++u)
      for (NodeId v = u + 1; v < 200; ++v) flips += g.has_edge(u, v) != h.has_edge(u, v);
    bits += 199 * 100;
  }
  EXPECT_NEAR(static_cast<double>(flips) / static_cast<double>(bits), f, 0.005 * f);
}

TEST(EdgeRr, DeterministicAndValidatesModel) {
  const Graph g = fixtures::cycle(30);
  Rng a(5), b(5);
  EXPECT_TRUE(edge_rr(g, edge_local(1), a).same_structure(edge_rr(g, edge_local(1), b)));
  EXPECT_THROW(edge_rr(g, edge_central(1), a), std::invalid_argument);
  EXPECT_THROW(edge_rr(Graph::empty(1), edge_local(1), a), std::invalid_argument);
}

TEST(EdgeRr, DensityProjectionTargetsTrueEdgeCount) {
  Rng rng(6);
  const Graph g = fixtures::gnp(300, 0.02, rng);
  EdgeRrOptions opts;
  opts.project_density = true;
  double sum = 0.0;
  for (int t = 0; t < 20; ++t) sum += static_cast<double>(edge_rr(g, edge_local(2), rng, opts).num_edges());
  EXPECT_NEAR(sum / 20, static_cast<double>(g.num_edges()), 0.1 * static_cast<double>(g.num_edges()));
}

TEST(EdgeRr, PerBitChannelPassesRatioTest) {
  const Graph with_edge = Graph::from_edges(2, {{0, 1}});
  const Graph without = Graph::empty(2);
  auto channel = [](double eps) {
    return [eps](const Graph& g, Rng& rng) { return edge_rr(g, edge_local(eps), rng).has_edge(0, 1); };
  };
  for (double eps : {0.5, 1.0, 2.0}) {
    Rng rng(static_cast<std::uint64_t>(eps * 100));
    const auto r = dp_ratio_test(channel(eps), with_edge, without, eps, 100000, rng);
    EXPECT_TRUE(r.pass) << "eps " << eps << " ratio " << r.max_ratio;
  }
}

TEST(DegLapCl, NoiseFreeLimitMatchesChungLuExpectation) {
  const Graph g = fixtures::star(6);
  Rng rng(7);
  const auto noisy = noisy_degrees(g, 1e9, rng);
  for (NodeId v = 0; v < 6; ++v) EXPECT_EQ(noisy[v], static_cast<double>(g.degree(v)));

  // Star(6): degrees [5,1,1,1,1,1], sum 10. Expected degree of node u is
  // sum_{v != u} min(1, d_u d_v / 10).
  std::vector<double> expected(6, 0.0);
  for (int u = 0; u < 6; ++u)
    for (int v = 0; v < 6; ++v)
      if (u != v) expected[u] += std::min(1.0, noisy[u] * noisy[v] / 10.0);
  std::vector<double> total(6, 0.0);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    const Graph h = degree_laplace_chunglu(g, edge_central(1e9), rng);
    for (NodeId v = 0; v < 6; ++v) total[v] += static_cast<double>(h.degree(v));
  }
  for (int v = 0; v < 6; ++v) EXPECT_NEAR(total[v] / trials, expected[v], 0.03);
}

// One edge on two nodes: degrees [1, 1], pair probability min(1, 1/2).
TEST(DegLapCl, SingleEdgeAtLargeEpsilon) {
  const Graph g = Graph::from_edges(2, {{0, 1}});
  Rng rng(8);
  double sum = 0.0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) sum += static_cast<double>(degree_laplace_chunglu(g, edge_central(1000), rng).degree(0));
  EXPECT_NEAR(sum / trials, 0.5, 0.02);
}

TEST(DegLapCl, NoisyDegreesPassRatioTest) {
  const Graph path = fixtures::path(3);
  const Graph neighbour = Graph::from_edges(3, {{0, 1}});
  Rng rng(9);
  auto mech = [](const Graph& g, Rng& r) { return noisy_degrees(g, 1.0, r); };
  DpRatioOptions opts;
  opts.min_count = 1000;
  const auto rep = dp_ratio_test(mech, path, neighbour, 1.0, 100000, rng, opts);
  EXPECT_TRUE(rep.pass) << rep.max_ratio;
  EXPECT_GT(rep.outcomes_compared, 5u);
}

TEST(DegLapCl, ClampsIntoRange) {
  Rng rng(10);
  const Graph g = fixtures::complete(5);
  for (int t = 0; t < 100; ++t) {
    for (double d : noisy_degrees(g, 0.1, rng)) {
      EXPECT_GE(d, 0.0);
      EXPECT_LE(d, 4.0);
      EXPECT_EQ(d, std::round(d));
    }
  }
}

TEST(PiV, MinPExamples) {
  const auto a = pi_v_min_p(100, 200);
  EXPECT_NEAR(a.subtrahend, 1.673e-17, 0.005 * 1.673e-17);
  // Independent: (e^100 - 1) / (2^200 - 1) from logs of the exact pieces.
  EXPECT_NEAR(a.log_subtrahend, 100.0 + std::log1p(-std::exp(-100.0)) - 200 * std::log(2.0), 1e-12);
  EXPECT_TRUE(a.binding);

  const auto b = pi_v_min_p(std::log(2.0), 1);
  EXPECT_FALSE(b.binding);
  EXPECT_EQ(b.p_min, 0.0);

  EXPECT_NEAR(pi_v_min_p(1, 10).p_min, 1 - (std::exp(1.0) - 1) / 1023, 1e-15);
  EXPECT_NEAR(pi_v_min_p(1, 10).p_min, 0.99832, 1e-5);
}

TEST(PiV, MinPMonotone) {
  for (std::size_t n = 2; n < 40; ++n) {
    for (double eps = 0.1; eps < 20; eps += 0.5) {
      const auto here = pi_v_min_p(eps, n);
      EXPECT_LT(here.log_subtrahend, pi_v_min_p(eps + 0.5, n).log_subtrahend);
      EXPECT_GT(here.log_subtrahend, pi_v_min_p(eps, n + 1).log_subtrahend);
      EXPECT_LE(here.p_min, pi_v_min_p(eps, n + 1).p_min);
    }
  }
}

TEST(PiV, RejectsInfeasibleParameters) {
  EXPECT_THROW(PiVParams(0.5, 0.5, 20, 1.0), InfeasibleParams);
  EXPECT_THROW(PiVParams(0.999999, 0.5, 20, 1.0), InfeasibleParams);  // 3.1 > e
  EXPECT_NO_THROW(PiVParams(0.999999, 0.5, 20, 2.0));
  EXPECT_THROW(PiVParams(0.999, 0.0, 5, 2.0), InfeasibleParams);
  EXPECT_THROW(PiVParams(1.0, 0.5, 5, 2.0), InfeasibleParams);
  // 1/p <= e^eps binds when n is tiny.
  EXPECT_THROW(PiVParams(0.2, 0.01, 1, 1.0), InfeasibleParams);

  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const double eps = 0.1 + 5 * rng.uniform();
    const std::size_t n = 1 + rng.uniform_int(30);
    const double q = 0.05 + 0.9 * rng.uniform();
    const double p = rng.uniform();
    const bool ok = 1 / p <= std::exp(eps) && p + (1 - p) * std::pow(2.0, n) / (1 - q) <= std::exp(eps);
    if (p <= 0.0) continue;
    if (ok) {
      EXPECT_NO_THROW(PiVParams(p, q, n, eps));
    } else {
      EXPECT_THROW(PiVParams(p, q, n, eps), InfeasibleParams);
    }
  }
}

TEST(PiV, TightestIsFeasibleAndNearBoundary) {
  for (std::size_t n : {1u, 5u, 20u, 200u, 4039u}) {
    for (double eps : {0.5, 1.0, 5.0}) {
      const auto pi = PiVParams::tightest(eps, n, 0.5);
      EXPECT_TRUE(pi.feasible_for(eps));
      EXPECT_FALSE(PiVParams::feasible(pi.log_keep() + 1e-6, 0.5, n, eps)) << n << " " << eps;
    }
  }
}

TEST(PiV, RemovalStageKeepsInducedEdges) {
  const Graph kept = pi_v_remove(fixtures::complete(3), std::vector<NodeId>{0, 1});
  EXPECT_TRUE(kept.same_structure(Graph::from_edges(2, {{0, 1}})));
}

TEST(PiV, CollapseRemovesNearlyAllOriginals) {
  const Graph g = fixtures::cycle(20);
  const PiVParams pi(0.999999, 0.5, 20, 2.0);
  Rng rng(2);
  double survivors = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Graph h = pi_v_node_dp(g, node_central(2.0), pi, rng);
    survivors += static_cast<double>(h.num_nodes()) - 10.0;  // ceil(0.5 * 20) added
  }
  EXPECT_LE(survivors / 1000, 0.01);
}

TEST(PiV, AddedVerticesWiredWithHalfProbability) {
  Rng rng(3);
  const Graph grown = pi_v_add(Graph::empty(0), 60, rng);
  const double pairs = 60 * 59 / 2.0;
  EXPECT_NEAR(static_cast<double>(grown.num_edges()), pairs / 2, 4 * std::sqrt(pairs / 4));
}

TEST(PiV, RefusesMismatchedOrInfeasibleUse) {
  Rng rng(4);
  const auto pi = PiVParams::tightest(1.0, 10, 0.5);
  EXPECT_THROW(pi_v_node_dp(fixtures::path(11), node_central(1.0), pi, rng), std::invalid_argument);
  EXPECT_THROW(pi_v_node_dp(fixtures::path(10), node_central(0.5), pi, rng), InfeasibleParams);
}

TEST(AttrRr, Examples) {
  Rng rng(5);
  FeatureMatrix f(400, 50);
  for (std::size_t i = 0; i < 400; ++i)
    for (std::size_t j = 0; j < 50; ++j) f(i, j) = static_cast<std::uint8_t>((i + j) % 2);
  const Graph g = fixtures::cycle(400).with_features(f);

  EXPECT_EQ(*attr_rr(g, attr_local(1e6), rng).features(), f);

  ASSERT_NEAR(1 / (1 + std::exp(0.1)), 0.4750, 1e-4);
  std::size_t flips = 0, bits = 0;
  while (bits < 1000000) {
    const Graph h = attr_rr(g, attr_local(5.0), rng);
    EXPECT_TRUE(h.same_structure(g));
    for (std::size_t i = 0; i < 400; ++i)
      for (std::size_t j = 0; j < 50; ++j) flips += (*h.features())(i, j) != f(i, j);
    bits += 400 * 50;
  }
  EXPECT_NEAR(static_cast<double>(flips) / static_cast<double>(bits), 1 / (1 + std::exp(0.1)), 0.002);
}

TEST(AttrRr, SingleBitAtLn3FlipsAQuarter) {
  Rng rng(6);
  FeatureMatrix f(1000, 1);
  const Graph g = Graph::empty(1000).with_features(f);
  std::size_t ones = 0;
  for (int t = 0; t < 100; ++t) {
    const auto h = attr_rr(g, attr_local(std::log(3.0)), rng);
    for (std::size_t i = 0; i < 1000; ++i) ones += (*h.features())(i, 0);
  }
  EXPECT_NEAR(ones / 100000.0, 0.25, 0.005);
}

TEST(AttrRr, NeedsFeatures) {
  Rng rng(7);
  EXPECT_THROW(attr_rr(fixtures::path(3), attr_local(1), rng), std::invalid_argument);
}

TEST(Registry, IdsAndDescriptors) {
  for (const char* id : {"edge-rr", "deg-lap-cl", "pi-v", "attr-rr"}) {
    const auto d = describe(id, 1.0);
    EXPECT_EQ(d.id, id);
    EXPECT_EQ(d.params.epsilon(), 1.0);
  }
  EXPECT_EQ(describe("deg-lap-cl", 1).transformation, Transformation::perturb_then_generate);
  EXPECT_EQ(describe("pi-v", 1).params.target(), PrivacyTarget::node);
  EXPECT_THROW(mechanism_info("pi-e"), std::invalid_argument);

  Rng rng(8);
  const Graph g = fixtures::cycle(12);
  for (const char* id : {"edge-rr", "deg-lap-cl", "pi-v"}) {
    const Graph h = privatize(id, g, 2.0, rng);
    EXPECT_GE(h.num_nodes(), 6u);
  }
}
