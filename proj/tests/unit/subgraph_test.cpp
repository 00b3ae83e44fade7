#include "graphmu/attack.hpp"
#include "graphmu/error.hpp"
#include "graphmu/subgraph.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace graphmu;

namespace {

// a-b-c-d-e as 0-1-2-3-4.
Graph path5() { return oracle::make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, 2); }

std::set<Edge> original_edges(const FineTunedSubgraph& sub) {
  std::set<Edge> out;
  for (const Edge& e : sub.graph.adjacency.edges()) out.insert(Edge::make(sub.node_map[e.u], sub.node_map[e.v]));
  return out;
}

std::set<NodeId> node_set(const FineTunedSubgraph& sub) { return {sub.node_map.begin(), sub.node_map.end()}; }

Graph sbm7() {
  SbmSpec spec;
  spec.seed = 7;
  return generate_sbm(spec);
}

}  // namespace

TEST(InjectionBuilder, PathCenterRemoved) {
  const FineTunedSubgraph sub = build_node_injection(path5(), {2});
  EXPECT_EQ(node_set(sub), (std::set<NodeId>{0, 1, 3, 4}));
  EXPECT_EQ(original_edges(sub), (std::set<Edge>{{0, 1}, {3, 4}}));
  EXPECT_EQ(sub.provenance.excluded_nodes, (std::vector<NodeId>{2}));
}

TEST(InjectionBuilder, EmptyInputRejected) {
  EXPECT_THROW(build_node_injection(path5(), {}), Error);
}

TEST(InjectionBuilder, StarCenterLeavesIsolatedLeaves) {
  const Graph star = oracle::make_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  const FineTunedSubgraph sub = build_node_injection(star, {0});
  EXPECT_EQ(node_set(sub), (std::set<NodeId>{1, 2, 3, 4}));
  EXPECT_EQ(sub.graph.adjacency.edge_count(), 0u);
}

TEST(FeatureBuilder, TwoNeighborMean) {
  Graph g = oracle::make_graph(3, {{0, 1}, {0, 2}}, 2);
  g.features << 9, 9, 1, 0, 0, 1;
  const FineTunedSubgraph sub = build_feature_modification(g, {0});
  ASSERT_EQ(sub.node_map, (std::vector<NodeId>{0, 1, 2}));
  EXPECT_EQ(sub.graph.features.row(0), Eigen::RowVector2d(0.5, 0.5));
  EXPECT_EQ(sub.graph.features.row(1), g.features.row(1));
  EXPECT_EQ(sub.graph.features.row(2), g.features.row(2));
  EXPECT_EQ(sub.graph.adjacency.edge_count(), 2u);
  EXPECT_EQ(sub.provenance.feature_replaced, (std::vector<NodeId>{0}));
}

TEST(FeatureBuilder, SingleNeighborCopied) {
  Graph g = oracle::make_graph(2, {{0, 1}}, 3);
  g.features << 1, 1, 1, 0.25, 0, 4;
  const FineTunedSubgraph sub = build_feature_modification(g, {1});
  EXPECT_EQ(sub.graph.features.row(1), g.features.row(0));
}

TEST(FeatureBuilder, IsolatedNodeZeroedWithWarning) {
  Graph g = oracle::make_graph(3, {{0, 1}}, 2);
  g.features << 1, 1, 1, 1, 5, 5;
  const FineTunedSubgraph sub = build_feature_modification(g, {2});
  EXPECT_EQ(sub.node_map, (std::vector<NodeId>{2}));
  EXPECT_EQ(sub.graph.features.row(0), Eigen::RowVector2d(0, 0));
  EXPECT_EQ(sub.provenance.warnings.size(), 1u);
}

TEST(FeatureBuilder, UntouchedRowsBitIdentical) {
  const Graph g = sbm7();
  const std::vector<NodeId> anomalous{3, 77, 140};
  const FineTunedSubgraph sub = build_feature_modification(g, anomalous);
  for (std::size_t i = 0; i < sub.node_map.size(); ++i) {
    const NodeId v = sub.node_map[i];
    if (std::find(anomalous.begin(), anomalous.end(), v) != anomalous.end()) continue;
    EXPECT_EQ(sub.graph.features.row(static_cast<Eigen::Index>(i)), g.features.row(v));
  }
}

TEST(StructureBuilder, TriangleEdgeRemoved) {
  const Graph tri = oracle::make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  const FineTunedSubgraph sub = build_structure_perturbation(tri, {{0, 1}});
  EXPECT_EQ(node_set(sub), (std::set<NodeId>{0, 1, 2}));
  EXPECT_EQ(original_edges(sub), (std::set<Edge>{{0, 2}, {1, 2}}));
}

TEST(StructureBuilder, IsolatedEndpointsGiveTwoNodesNoEdges) {
  const Graph g = oracle::make_graph(4, {{0, 1}, {2, 3}});
  const FineTunedSubgraph sub = build_structure_perturbation(g, {{1, 0}});
  EXPECT_EQ(node_set(sub), (std::set<NodeId>{0, 1}));
  EXPECT_EQ(sub.graph.adjacency.edge_count(), 0u);
}

TEST(StructureBuilder, AllEdgesExcluded) {
  const Graph g = oracle::make_graph(6, {{0, 1}, {1, 2}, {3, 4}});
  const FineTunedSubgraph sub = build_structure_perturbation(g, g.adjacency.edges());
  EXPECT_EQ(node_set(sub), (std::set<NodeId>{0, 1, 2, 3, 4}));
  EXPECT_EQ(sub.graph.adjacency.edge_count(), 0u);
}

TEST(StructureBuilder, MissingEdgeRejected) {
  EXPECT_THROW(build_structure_perturbation(path5(), {{0, 4}}), Error);
  EXPECT_THROW(build_structure_perturbation(path5(), {}), Error);
}

TEST(Builders, MatchBruteForceOracle) {
  Rng rng(21);
  for (int t = 0; t < 30; ++t) {
    Graph g = oracle::random_graph(20 + rng.below(20), 0.08, rng);
    const auto edges = g.adjacency.edges();
    AnomalySets sets;
    for (NodeId v = 0; v < g.node_count(); ++v) {
      const double u = rng.uniform();
      if (u < 0.05) sets.injected.push_back(v);
      else if (u < 0.1) sets.feature_modified.push_back(v);
    }
    for (const Edge& e : edges) {
      if (rng.bernoulli(0.08)) sets.edges.push_back(e);
    }
    if (sets.empty()) continue;
    const int hops = 1 + static_cast<int>(rng.below(3));
    try {
      const FineTunedSubgraph sub = build_merged(g, sets, hops);
      EXPECT_TRUE(oracle::matches(sub, g, oracle::brute_subgraph(g, sets, hops))) << "instance " << t;
    } catch (const Error&) {
      EXPECT_TRUE(oracle::brute_subgraph(g, sets, hops).nodes.empty());
    }
  }
}

TEST(Builders, TrainFallbackWhenNoTrainNodeSurvives) {
  Graph g = path5();
  g.split.assign(5, Split::test);
  const FineTunedSubgraph sub = build_node_injection(g, {2});
  EXPECT_TRUE(sub.provenance.train_fallback);
  for (Split s : sub.graph.split) EXPECT_EQ(s, Split::train);
}

TEST(Build, MixedEqualsUnionOfSingleTypeSubgraphs) {
  const Graph clean = sbm7();
  AttackSpec spec;
  spec.kind = AttackKind::mixed;
  spec.budget = 12;
  spec.seed = 2;
  const PoisonedGraph p = poison(clean, spec);
  BuildRequest req;
  req.kind = AttackKind::mixed;
  req.record = p.record;
  const FineTunedSubgraph merged = build(p.graph, req);

  const FineTunedSubgraph feat = build_feature_modification(p.graph, p.record.feature_modified_nodes());
  const FineTunedSubgraph edge = build_structure_perturbation(p.graph, p.record.added_edges);
  std::set<NodeId> nodes = node_set(feat);
  nodes.insert(edge.node_map.begin(), edge.node_map.end());
  EXPECT_EQ(node_set(merged), nodes);

  const std::set<Edge> excluded(p.record.added_edges.begin(), p.record.added_edges.end());
  std::set<Edge> want;
  for (const Edge& e : p.graph.adjacency.edges()) {
    if (nodes.count(e.u) && nodes.count(e.v) && !excluded.count(e)) want.insert(e);
  }
  EXPECT_EQ(original_edges(merged), want);
  const auto modified = p.record.feature_modified_nodes();
  for (std::size_t i = 0; i < merged.node_map.size(); ++i) {
    const NodeId v = merged.node_map[i];
    const bool replaced = std::binary_search(modified.begin(), modified.end(), v);
    if (replaced) {
      const auto local = std::lower_bound(feat.node_map.begin(), feat.node_map.end(), v) - feat.node_map.begin();
      EXPECT_EQ(merged.graph.features.row(static_cast<Eigen::Index>(i)), feat.graph.features.row(local));
    } else {
      EXPECT_EQ(merged.graph.features.row(static_cast<Eigen::Index>(i)), p.graph.features.row(v));
    }
  }
}

TEST(Build, KnownScenarioWithEmptyRecordRejected) {
  BuildRequest req;
  req.record = PerturbationRecord{};
  try {
    build(path5(), req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "nothing to unlearn");
  }
}

TEST(Build, FullRatioEqualsUnknownScenario) {
  const Graph g = sbm7();
  DetectionReport report;
  report.kind = "bwgnn";
  report.node_scores.assign(g.node_count(), 0.0);
  for (NodeId v : {4u, 30u, 31u, 99u}) {
    report.node_scores[v] = 0.5 + v / 1000.0;
    report.selected_nodes.push_back(v);
  }
  BuildRequest uk;
  uk.scenario = Scenario::uk_unlearn;
  uk.kind = AttackKind::node_injection;
  uk.detections.injection = report;
  BuildRequest kn = uk;
  kn.scenario = Scenario::kn_unlearn;
  kn.ratios.injection = 1.0;
  EXPECT_EQ(build(g, kn), build(g, uk));

  kn.ratios.injection = 0.01;
  EXPECT_EQ(resolve_anomalies(g, kn).injected, (std::vector<NodeId>{31, 99}));
  kn.ratios.injection = 0.0;
  EXPECT_THROW(build(g, kn), Error);
}

TEST(Build, MissingReportRejected) {
  BuildRequest req;
  req.scenario = Scenario::uk_unlearn;
  req.kind = AttackKind::structure_perturbation;
  EXPECT_THROW(build(path5(), req), Error);
}

TEST(ApplyExclusions, DetachesDropsAndReplaces) {
  Graph g = oracle::make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}, 1);
  g.features << 1, 5, 3, 4;
  AnomalySets sets;
  sets.injected = {3};
  sets.feature_modified = {1};
  sets.edges = {{1, 2}};
  const FineTunedSubgraph sub = build_merged(g, sets, 1);
  EXPECT_EQ(anomalies_of(sub.provenance).injected, sets.injected);
  EXPECT_EQ(anomalies_of(sub.provenance).edges, sets.edges);
  const Graph out = apply_exclusions(g, sub.provenance);
  EXPECT_EQ(out.node_count(), 4u);
  EXPECT_EQ(out.adjacency.edges(), (std::vector<Edge>{{0, 1}}));
  EXPECT_EQ(out.features(1, 0), 2.0);  // mean of neighbors 0 and 2
  EXPECT_EQ(out.features(3, 0), 4.0);
}

TEST(Scenario, NamesRoundTrip) {
  for (auto s : {Scenario::k_unlearn, Scenario::kn_unlearn, Scenario::uk_unlearn}) {
    EXPECT_EQ(parse_scenario(to_string(s)), s);
  }
  EXPECT_THROW(parse_scenario("X"), Error);
}
