#pragma once

#include "graphmu/graph.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace graphmu {

struct DetectionReport {
  std::string kind;                                 // "bwgnn", "jaccard" or "simrank"
  std::vector<double> node_scores;                  // per node, empty for edge detectors
  std::vector<std::pair<Edge, double>> edge_scores; // per edge in canonical order
  std::vector<NodeId> selected_nodes;               // sorted
  std::vector<Edge> selected_edges;                 // sorted
  std::map<std::string, double> thresholds;

  bool operator==(const DetectionReport&) const = default;
};

/// B(a, b) for positive integer arguments, via factorials.
double beta_function(int a, int b);

/// (1 / (2 B(p+1, q+1))) (L/2)^p (I - L/2)^q.
SparseMatrix beta_wavelet(const Laplacian& lap, int p, int q);

struct BetaFilterBank {
  int order = 0;
  std::vector<SparseMatrix> filters;  // filters[p] = W_{p, order-p}
};

BetaFilterBank build_filter_bank(const Laplacian& lap, int order);

/// Per-node filter energies: column p holds ||(W_{p,C} X)_v||.
Matrix filter_energies(const BetaFilterBank& bank, const Matrix& features);

enum class BwgnnMode { unsupervised, supervised };

std::string_view to_string(BwgnnMode mode);
BwgnnMode parse_bwgnn_mode(std::string_view text);

struct BwgnnOptions {
  BwgnnMode mode = BwgnnMode::unsupervised;
  double cutoff = 0.5;  // nodes with probability above this are selected
  std::uint64_t seed = 0;
  int hidden = 8;
  int epochs = 300;
  double learning_rate = 0.1;
  /// Synthetic injections used to train the supervised scorer, as a fraction of n.
  double synthetic_fraction = 0.05;

  bool operator==(const BwgnnOptions&) const = default;
};

double sigmoid(double x);

/// One-hidden-layer scorer over standardized filter energies.
struct ScorerMlp {
  Vector mean;   // input standardization
  Vector scale;
  Matrix w0;     // inputs x hidden
  Vector b0;
  Vector w1;     // hidden
  double b1 = 0.0;

  /// Pre-sigmoid score s(v) for each row of `energies`.
  Vector score(const Matrix& energies) const;
};

/// Fits the scorer with class-balanced logistic loss by full-batch descent.
ScorerMlp train_scorer(const Matrix& energies, const std::vector<int>& targets,
                       const BwgnnOptions& options);

/// Spectral anomaly probabilities for every node.
DetectionReport bwgnn_score(const Graph& g, const BetaFilterBank& bank, const BwgnnOptions& options);

/// |F(a) & F(b)| / |F(a) | F(b)| over nonzero column indices; 0 when both are empty.
double jaccard_similarity(const Graph& g, NodeId a, NodeId b);

/// Scores k_v, the number of neighbors with similarity below r, and flags v
/// when k_v > p * degree(v).
DetectionReport jaccard_score(const Graph& g, double r, double p);

struct SimRankResult {
  Matrix similarity;
  int iterations = 0;
  std::vector<double> deltas;  // max-abs change per iteration
};

/// S <- 1/2 P S P^T with P the row-normalized adjacency, diagonal held at 1.
/// Stops after `iterations` steps or once the change drops below `tol`.
SimRankResult simrank(const Graph& g, int iterations, double tol);

/// Nearest-rank percentile (in [0, 100]) of the edge similarities; 0 when
/// there are no edges.
double edge_similarity_percentile(const Graph& g, const Matrix& similarity, double percentile);

/// Selects edges whose similarity is strictly below tau.
DetectionReport simrank_edge_score(const Graph& g, const Matrix& similarity, double tau);

/// Keeps the ceil(ratio * universe) highest-ranked selected items: nodes by
/// descending score, edges by ascending score, ties to the lower id.
DetectionReport select_by_ratio(const DetectionReport& report, double ratio, std::size_t universe);

}  // namespace graphmu
