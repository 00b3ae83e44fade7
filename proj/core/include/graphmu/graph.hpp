#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace graphmu {

using NodeId = std::uint32_t;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Mask = std::vector<bool>;

/// Undirected edge stored in canonical order (u < v).
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  static Edge make(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  auto operator<=>(const Edge&) const = default;
};

enum class Split : std::uint8_t { none = 0, train = 1, val = 2, test = 3 };

/// Symmetric simple adjacency in CSR form. Neighbor lists are sorted and
/// never contain the node itself.
class Adjacency {
 public:
  Adjacency() = default;

  /// Builds from an edge list; duplicates are merged and self-loops dropped.
  static Adjacency from_edges(std::size_t node_count, std::span<const Edge> edges);

  std::size_t node_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const { return indices_.size() / 2; }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {indices_.data() + offsets_[v], degree(v)};
  }

  bool has_edge(NodeId a, NodeId b) const;

  /// All edges in canonical order, sorted.
  std::vector<Edge> edges() const;

  std::span<const std::uint64_t> offsets() const { return offsets_; }
  std::span<const NodeId> indices() const { return indices_; }

  /// Rebuilds from raw CSR arrays, validating symmetry and ordering.
  static Adjacency from_csr(std::vector<std::uint64_t> offsets, std::vector<NodeId> indices);

  bool operator==(const Adjacency&) const = default;

 private:
  std::vector<std::uint64_t> offsets_{0};
  std::vector<NodeId> indices_;
};

struct Graph {
  Adjacency adjacency;
  Matrix features;             // n x d, real valued
  std::vector<int> labels;     // class per node in [0, num_classes)
  int num_classes = 0;
  std::vector<Split> split;    // one split per node; disjoint masks by construction
  std::vector<std::string> ids;  // original ids, for reporting

  std::size_t node_count() const { return adjacency.node_count(); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }

  Mask mask(Split which) const;

  /// Throws Error if any structural invariant is broken.
  void validate() const;

  bool operator==(const Graph& other) const;
};

struct NormalizedAdjacency {
  SparseMatrix matrix;  // D^-1/2 (A + I) D^-1/2
  Vector degree;        // diagonal of D, self-loop included
};

struct Laplacian {
  SparseMatrix matrix;  // I - normalized adjacency
};

NormalizedAdjacency normalize(const Graph& g);
NormalizedAdjacency normalize(const Adjacency& adjacency);
Laplacian laplacian(const Graph& g);

/// Nodes at BFS distance 1..hops from `v`, sorted; `v` itself excluded.
std::vector<NodeId> k_hop_neighbors(const Adjacency& adjacency, NodeId v, int hops);
inline std::vector<NodeId> k_hop_neighbors(const Graph& g, NodeId v, int hops) {
  return k_hop_neighbors(g.adjacency, v, hops);
}

struct SbmSpec {
  int blocks = 3;
  int per_block = 50;
  double p_in = 0.2;
  double p_out = 0.01;
  int feature_dim = 32;
  std::uint64_t seed = 0;
  /// Fraction of the feature dimensions in each class prototype.
  double prototype_density = 0.25;
  /// Probability a prototype bit is kept in a member's feature row.
  double keep_probability = 0.7;
  /// Probability a non-prototype bit is switched on.
  double noise_probability = 0.03;

  bool operator==(const SbmSpec&) const = default;
};

/// Stochastic block model with class-prototype bit features. Masks are split
/// 10/10/80 per class.
Graph generate_sbm(const SbmSpec& spec);

/// Uniform random simple d-regular graph by the pairing model with restarts.
/// n * degree must be even and degree < n.
Adjacency random_regular_graph(std::size_t n, std::size_t degree, std::uint64_t seed);

struct CoraLoadOptions {
  /// Drop cite lines naming ids absent from the content file instead of failing.
  bool skip_unknown_ids = false;
  /// Public split sizes: per-class train count, then val and test totals.
  int train_per_class = 20;
  int val_count = 500;
  int test_count = 1000;
  std::uint64_t split_seed = 0;

  bool operator==(const CoraLoadOptions&) const = default;
};

struct CoraLoadStats {
  std::size_t cite_lines = 0;
  std::size_t duplicate_edges = 0;
  std::size_t self_cites = 0;
  std::size_t skipped_lines = 0;
};

Graph load_cora_format(const std::filesystem::path& content_path,
                       const std::filesystem::path& cites_path,
                       const CoraLoadOptions& options = {},
                       CoraLoadStats* stats = nullptr);

}  // namespace graphmu
