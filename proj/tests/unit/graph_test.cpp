#include "graphmu/error.hpp"
#include "graphmu/graph.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>

using namespace graphmu;

namespace {

Graph path(std::size_t n) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return oracle::make_graph(n, edges);
}

Matrix dense(const SparseMatrix& m) { return Matrix(m); }

using graphmu::testing::TempDir;

}  // namespace

TEST(Adjacency, MergesDuplicatesAndDropsSelfLoops) {
  const std::vector<Edge> edges{{0, 1}, {1, 0}, {2, 2}, {1, 2}};
  const Adjacency a = Adjacency::from_edges(3, edges);
  EXPECT_EQ(a.edge_count(), 2u);
  EXPECT_TRUE(a.has_edge(1, 0));
  EXPECT_FALSE(a.has_edge(2, 2));
  EXPECT_EQ(a.degree(1), 2u);
}

TEST(Adjacency, RejectsOutOfRangeEdge) {
  const std::vector<Edge> edges{{0, 5}};
  EXPECT_THROW(Adjacency::from_edges(3, edges), Error);
}

TEST(Adjacency, CsrRoundTripAndAsymmetryRejected) {
  const Graph g = path(4);
  const Adjacency back = Adjacency::from_csr({g.adjacency.offsets().begin(), g.adjacency.offsets().end()},
                                             {g.adjacency.indices().begin(), g.adjacency.indices().end()});
  EXPECT_EQ(back, g.adjacency);
  EXPECT_THROW(Adjacency::from_csr({0, 1, 1}, {1}), Error);
}

TEST(Normalize, SingleEdgeIsAllHalves) {
  const Graph g = oracle::make_graph(2, {{0, 1}});
  const Matrix a = dense(normalize(g).matrix);
  EXPECT_EQ(a, Matrix::Constant(2, 2, 0.5));
}

TEST(Normalize, IsolatedNodeHasUnitDiagonal) {
  const Graph g = oracle::make_graph(3, {{0, 1}});
  const Matrix a = dense(normalize(g).matrix);
  EXPECT_EQ(a(2, 2), 1.0);
  EXPECT_EQ(a.row(2).sum(), 1.0);
}

TEST(Normalize, PathMatchesDenseOracle) {
  const Graph g = path(4);
  const Matrix a = dense(normalize(g).matrix);
  EXPECT_LT((a - oracle::dense_normalized(g.adjacency)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(a, a.transpose());
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LE(a.maxCoeff(), 1.0);
}

TEST(Normalize, EmptyGraphRejected) {
  EXPECT_THROW(normalize(Adjacency{}), Error);
}

TEST(Laplacian, SingleEdge) {
  const Graph g = oracle::make_graph(2, {{0, 1}});
  Matrix want(2, 2);
  want << 0.5, -0.5, -0.5, 0.5;
  EXPECT_EQ(dense(laplacian(g).matrix), want);
}

TEST(Laplacian, IsolatedNodeRowIsZero) {
  const Graph g = oracle::make_graph(3, {{0, 1}});
  EXPECT_EQ(dense(laplacian(g).matrix).row(2).cwiseAbs().sum(), 0.0);
}

TEST(Laplacian, NormalizedPlusLaplacianIsIdentityExactly) {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const Graph g = oracle::random_graph(9, 0.3, rng);
    const Matrix sum = dense(normalize(g).matrix) + dense(laplacian(g).matrix);
    EXPECT_EQ(sum, Matrix::Identity(9, 9));
  }
}

TEST(Laplacian, EigenvaluesWithinZeroTwo) {
  Rng rng(11);
  std::vector<Graph> graphs{path(4)};
  for (int t = 0; t < 10; ++t) graphs.push_back(oracle::random_graph(8, 0.4, rng));
  for (const Graph& g : graphs) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(dense(laplacian(g).matrix));
    EXPECT_GE(solver.eigenvalues().minCoeff(), -1e-12);
    EXPECT_LE(solver.eigenvalues().maxCoeff(), 2.0 + 1e-12);
  }
}

TEST(KHop, PathTwoHopsFromCenter) {
  const Graph g = path(5);
  EXPECT_EQ(k_hop_neighbors(g, 2, 2), (std::vector<NodeId>{0, 1, 3, 4}));
  EXPECT_EQ(k_hop_neighbors(g, 2, 1), (std::vector<NodeId>{1, 3}));
}

TEST(KHop, IsolatedNodeHasNone) {
  const Graph g = oracle::make_graph(3, {{0, 1}});
  EXPECT_TRUE(k_hop_neighbors(g, 2, 3).empty());
}

TEST(KHop, TriangleOneHop) {
  const Graph g = oracle::make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  EXPECT_EQ(k_hop_neighbors(g, 1, 1), (std::vector<NodeId>{0, 2}));
}

TEST(KHop, OutOfRangeAndZeroHopsRejected) {
  const Graph g = path(3);
  EXPECT_THROW(k_hop_neighbors(g, 3, 1), Error);
  EXPECT_THROW(k_hop_neighbors(g, 0, 0), Error);
}

TEST(KHop, MonotoneInHopsAndMatchesBfsOracle) {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    const Graph g = oracle::random_graph(12, 0.15, rng);
    const auto dist = oracle::bfs_distances(g.adjacency);
    for (NodeId v = 0; v < 12; ++v) {
      for (int k = 1; k <= 4; ++k) {
        const auto small = k_hop_neighbors(g, v, k);
        const auto large = k_hop_neighbors(g, v, k + 1);
        EXPECT_TRUE(std::includes(large.begin(), large.end(), small.begin(), small.end()));
        std::vector<NodeId> want;
        for (NodeId u = 0; u < 12; ++u) {
          if (u != v && dist[v][u] <= static_cast<NodeId>(k)) want.push_back(u);
        }
        EXPECT_EQ(small, want);
      }
    }
  }
}

TEST(Sbm, SizesAndBalancedLabels) {
  SbmSpec spec;
  spec.seed = 7;
  const Graph g = generate_sbm(spec);
  EXPECT_EQ(g.node_count(), 150u);
  EXPECT_EQ(g.feature_dim(), 32u);
  std::vector<int> counts(3, 0);
  for (int y : g.labels) ++counts[y];
  EXPECT_EQ(counts, (std::vector<int>{50, 50, 50}));
  EXPECT_NO_THROW(g.validate());
}

TEST(Sbm, SplitIsTenTenEightyPerClass) {
  SbmSpec spec;
  spec.seed = 7;
  const Graph g = generate_sbm(spec);
  std::vector<std::array<int, 4>> counts(3, {0, 0, 0, 0});
  for (std::size_t i = 0; i < g.node_count(); ++i) ++counts[g.labels[i]][static_cast<int>(g.split[i])];
  for (const auto& c : counts) {
    EXPECT_EQ(c[static_cast<int>(Split::train)], 5);
    EXPECT_EQ(c[static_cast<int>(Split::val)], 5);
    EXPECT_EQ(c[static_cast<int>(Split::test)], 40);
  }
}

TEST(Sbm, DeterministicPerSeed) {
  SbmSpec spec;
  spec.seed = 7;
  EXPECT_EQ(generate_sbm(spec), generate_sbm(spec));
  SbmSpec other = spec;
  other.seed = 8;
  EXPECT_FALSE(generate_sbm(spec) == generate_sbm(other));
}

TEST(Sbm, CertainWithinZeroAcrossGivesTriangles) {
  SbmSpec spec;
  spec.blocks = 2;
  spec.per_block = 3;
  spec.p_in = 1.0;
  spec.p_out = 0.0;
  const Graph g = generate_sbm(spec);
  std::vector<Edge> want;
  for (NodeId b = 0; b < 2; ++b) {
    std::vector<NodeId> members;
    for (NodeId v = 0; v < 6; ++v) {
      if (g.labels[v] == static_cast<int>(b)) members.push_back(v);
    }
    ASSERT_EQ(members.size(), 3u);
    want.push_back(Edge::make(members[0], members[1]));
    want.push_back(Edge::make(members[0], members[2]));
    want.push_back(Edge::make(members[1], members[2]));
  }
  std::sort(want.begin(), want.end());
  EXPECT_EQ(g.adjacency.edges(), want);
}

TEST(Sbm, InvalidProbabilitiesRejected) {
  SbmSpec spec;
  spec.p_in = 1.5;
  EXPECT_THROW(generate_sbm(spec), Error);
  spec.p_in = 0.1;
  spec.p_out = 0.2;
  EXPECT_THROW(generate_sbm(spec), Error);
  spec.p_out = -0.1;
  EXPECT_THROW(generate_sbm(spec), Error);
}

TEST(RandomRegular, EveryDegreeMatches) {
  const Adjacency a = random_regular_graph(50, 4, 1);
  EXPECT_EQ(a.node_count(), 50u);
  EXPECT_EQ(a.edge_count(), 100u);
  for (NodeId v = 0; v < 50; ++v) EXPECT_EQ(a.degree(v), 4u);
  EXPECT_THROW(random_regular_graph(5, 3, 1), Error);
}

TEST(CoraLoader, ParsesMergesAndDropsSelfCites) {
  TempDir dir;
  const auto content = dir.write("t.content",
                                 "p1\t1\t0\t0\tTheory\n"
                                 "p2\t0\t1\t0\tNeural\n"
                                 "p3\t0\t0\t1\tTheory\n");
  const auto cites = dir.write("t.cites", "p1\tp2\np2\tp1\np3\tp3\np2\tp3\n");
  CoraLoadOptions opts;
  opts.train_per_class = 1;
  opts.val_count = 1;
  opts.test_count = 1;
  CoraLoadStats stats;
  const Graph g = load_cora_format(content, cites, opts, &stats);
  EXPECT_EQ(g.node_count(), 3u);
  EXPECT_EQ(g.adjacency.edge_count(), 2u);
  EXPECT_EQ(g.feature_dim(), 3u);
  EXPECT_EQ(g.num_classes, 2);
  EXPECT_EQ(g.labels, (std::vector<int>{1, 0, 1}));
  EXPECT_EQ(g.ids, (std::vector<std::string>{"p1", "p2", "p3"}));
  EXPECT_EQ(stats.cite_lines, 4u);
  EXPECT_EQ(stats.duplicate_edges, 1u);
  EXPECT_EQ(stats.self_cites, 1u);
  EXPECT_NO_THROW(g.validate());
  int train = 0;
  for (Split s : g.split) train += s == Split::train;
  EXPECT_EQ(train, 2);
}

TEST(CoraLoader, ErrorsNameTheProblem) {
  TempDir dir;
  const auto content = dir.write("a.content", "p1\t1\t0\tA\np2\t1\tB\n");
  const auto cites = dir.write("a.cites", "");
  try {
    load_cora_format(content, cites);
    FAIL() << "expected width error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }

  const auto good = dir.write("b.content", "p1\t1\tA\np2\t0\tB\n");
  const auto unknown = dir.write("b.cites", "p1\tzz9\n");
  try {
    load_cora_format(good, unknown);
    FAIL() << "expected unknown id error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("zz9"), std::string::npos);
  }
  CoraLoadOptions skip;
  skip.skip_unknown_ids = true;
  EXPECT_EQ(load_cora_format(good, unknown, skip).adjacency.edge_count(), 0u);

  const auto empty = dir.write("c.content", "");
  try {
    load_cora_format(empty, cites);
    FAIL() << "expected no nodes";
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "no nodes");
  }
}

TEST(GraphValidate, CatchesBrokenInvariants) {
  Graph g = path(3);
  EXPECT_NO_THROW(g.validate());
  g.labels[1] = 5;
  EXPECT_THROW(g.validate(), Error);
  g = path(3);
  g.split.pop_back();
  EXPECT_THROW(g.validate(), Error);
}
