#include "graphmu/detectors.hpp"

#include "graphmu/error.hpp"
#include "graphmu/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace graphmu {

namespace {

double factorial(int n) {
  double out = 1.0;
  for (int i = 2; i <= n; ++i) out *= i;
  return out;
}

SparseMatrix identity(Eigen::Index n) {
  SparseMatrix eye(n, n);
  eye.setIdentity();
  return eye;
}

// Standardizes a vector to zero mean and unit population deviation; a
// constant vector maps to zeros.
Vector standardize(const Vector& s) {
  if (s.size() == 0) return s;
  const double mean = s.mean();
  const double var = (s.array() - mean).square().mean();
  if (!(var > 0.0)) return Vector::Zero(s.size());
  return (s.array() - mean) / std::sqrt(var);
}

std::vector<NodeId> nodes_above(const std::vector<double>& probs, double cutoff) {
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < probs.size(); ++v) {
    if (probs[v] > cutoff) out.push_back(static_cast<NodeId>(v));
  }
  return out;
}

// Appends `count` synthetic nodes that copy a random row and attach to
// random existing nodes, returning the augmented graph.
Graph with_synthetic_injections(const Graph& g, std::size_t count, Rng& rng) {
  const std::size_t n = g.node_count();
  const std::size_t wires = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(2.0 * static_cast<double>(g.adjacency.edge_count()) /
                                              static_cast<double>(std::max<std::size_t>(n, 1)))));
  std::vector<Edge> edges = g.adjacency.edges();
  Graph out;
  out.features.resize(static_cast<Eigen::Index>(n + count), g.features.cols());
  out.features.topRows(static_cast<Eigen::Index>(n)) = g.features;
  out.labels = g.labels;
  out.split = g.split;
  out.ids = g.ids;
  out.num_classes = g.num_classes;
  std::vector<NodeId> pool(n);
  std::iota(pool.begin(), pool.end(), NodeId{0});
  for (std::size_t j = 0; j < count; ++j) {
    const auto id = static_cast<NodeId>(n + j);
    out.features.row(id) = g.features.row(static_cast<Eigen::Index>(rng.below(n)));
    rng.shuffle(std::span<NodeId>(pool));
    for (std::size_t w = 0; w < std::min(wires, n); ++w) edges.push_back(Edge::make(id, pool[w]));
    out.labels.push_back(0);
    out.split.push_back(Split::none);
    out.ids.push_back(fmt::format("syn{}", j));
  }
  out.adjacency = Adjacency::from_edges(n + count, edges);
  return out;
}

}  // namespace

double beta_function(int a, int b) {
  if (a < 1 || b < 1) throw Error(fmt::format("beta function needs positive integers, got {} {}", a, b));
  return factorial(a - 1) * factorial(b - 1) / factorial(a + b - 1);
}

SparseMatrix beta_wavelet(const Laplacian& lap, int p, int q) {
  if (p < 0 || q < 0) throw Error(fmt::format("filter orders must be >= 0, got {} {}", p, q));
  const Eigen::Index n = lap.matrix.rows();
  const SparseMatrix half = 0.5 * lap.matrix;
  const SparseMatrix rest = identity(n) - half;
  SparseMatrix out = identity(n);
  for (int i = 0; i < p; ++i) out = (out * half).pruned();
  for (int i = 0; i < q; ++i) out = (out * rest).pruned();
  return out / (2.0 * beta_function(p + 1, q + 1));
}

BetaFilterBank build_filter_bank(const Laplacian& lap, int order) {
  if (order < 1) throw Error(fmt::format("filter bank order must be >= 1, got {}", order));
  BetaFilterBank bank;
  bank.order = order;
  for (int p = 0; p <= order; ++p) bank.filters.push_back(beta_wavelet(lap, p, order - p));
  return bank;
}

Matrix filter_energies(const BetaFilterBank& bank, const Matrix& features) {
  Matrix z(features.rows(), static_cast<Eigen::Index>(bank.filters.size()));
  for (std::size_t p = 0; p < bank.filters.size(); ++p) {
    if (bank.filters[p].cols() != features.rows()) {
      throw Error(fmt::format("filter is {}x{} but features have {} rows", bank.filters[p].rows(),
                              bank.filters[p].cols(), features.rows()));
    }
    const Matrix filtered = bank.filters[p] * features;
    z.col(static_cast<Eigen::Index>(p)) = filtered.rowwise().norm();
  }
  return z;
}

std::string_view to_string(BwgnnMode mode) {
  return mode == BwgnnMode::unsupervised ? "unsupervised" : "supervised";
}

BwgnnMode parse_bwgnn_mode(std::string_view text) {
  if (text == "unsupervised") return BwgnnMode::unsupervised;
  if (text == "supervised") return BwgnnMode::supervised;
  throw Error(fmt::format("unknown bwgnn mode '{}'", text));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector ScorerMlp::score(const Matrix& energies) const {
  Matrix x = energies.rowwise() - mean.transpose();
  x = x.array().rowwise() / scale.transpose().array();
  const Matrix hidden = ((x * w0).rowwise() + b0.transpose()).cwiseMax(0.0);
  return (hidden * w1).array() + b1;
}

ScorerMlp train_scorer(const Matrix& energies, const std::vector<int>& targets,
                       const BwgnnOptions& options) {
  const Eigen::Index n = energies.rows();
  const Eigen::Index d = energies.cols();
  if (static_cast<std::size_t>(n) != targets.size() || n == 0) {
    throw Error("scorer needs one target per row and at least one row");
  }
  ScorerMlp mlp;
  mlp.mean = energies.colwise().mean().transpose();
  mlp.scale = ((energies.rowwise() - mlp.mean.transpose()).array().square().colwise().mean().sqrt())
                  .transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(mlp.scale[j] > 0.0)) mlp.scale[j] = 1.0;
  }
  Rng rng(options.seed);
  const auto h = static_cast<Eigen::Index>(options.hidden);
  mlp.w0.resize(d, h);
  mlp.b0 = Vector::Zero(h);
  mlp.w1.resize(h);
  for (Eigen::Index i = 0; i < mlp.w0.size(); ++i) mlp.w0.data()[i] = rng.uniform(-1.0, 1.0) / std::sqrt(double(d));
  for (Eigen::Index i = 0; i < h; ++i) mlp.w1[i] = rng.uniform(-1.0, 1.0) / std::sqrt(double(h));

  double positives = 0.0;
  for (int t : targets) positives += t != 0 ? 1.0 : 0.0;
  const double negatives = static_cast<double>(n) - positives;
  Vector weight(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool pos = targets[i] != 0;
    weight[i] = 0.5 / std::max(1.0, pos ? positives : negatives);
  }

  Matrix x = energies.rowwise() - mlp.mean.transpose();
  x = x.array().rowwise() / mlp.scale.transpose().array();
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const Matrix pre = (x * mlp.w0).rowwise() + mlp.b0.transpose();
    const Matrix hidden = pre.cwiseMax(0.0);
    const Vector s = (hidden * mlp.w1).array() + mlp.b1;
    Vector ds(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      ds[i] = weight[i] * (sigmoid(s[i]) - (targets[i] != 0 ? 1.0 : 0.0));
    }
    const Vector gw1 = hidden.transpose() * ds;
    const double gb1 = ds.sum();
    Matrix dpre = ds * mlp.w1.transpose();
    dpre = dpre.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    const Matrix gw0 = x.transpose() * dpre;
    const Vector gb0 = dpre.colwise().sum().transpose();
    mlp.w0 -= options.learning_rate * gw0;
    mlp.b0 -= options.learning_rate * gb0;
    mlp.w1 -= options.learning_rate * gw1;
    mlp.b1 -= options.learning_rate * gb1;
  }
  return mlp;
}

DetectionReport bwgnn_score(const Graph& g, const BetaFilterBank& bank, const BwgnnOptions& options) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  if (!bank.filters.empty() && bank.filters.front().rows() != n) {
    throw Error(fmt::format("filter bank has {} rows but the graph has {} nodes",
                            bank.filters.front().rows(), n));
  }
  const Matrix z = filter_energies(bank, g.features);
  Vector s(n);
  if (options.mode == BwgnnMode::unsupervised) {
    Vector ramp(z.cols());
    for (Eigen::Index p = 0; p < z.cols(); ++p) ramp[p] = static_cast<double>(p) / bank.order;
    s = standardize(z * ramp);
  } else {
    Rng rng(derive_seed(options.seed, 1));
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(options.synthetic_fraction * static_cast<double>(n))));
    const Graph augmented = with_synthetic_injections(g, count, rng);
    const Matrix train_z = filter_energies(build_filter_bank(laplacian(augmented), bank.order),
                                           augmented.features);
    std::vector<int> targets(augmented.node_count(), 0);
    for (std::size_t i = g.node_count(); i < targets.size(); ++i) targets[i] = 1;
    BwgnnOptions fit = options;
    fit.seed = derive_seed(options.seed, 2);
    s = train_scorer(train_z, targets, fit).score(z);
  }
  DetectionReport report;
  report.kind = "bwgnn";
  report.node_scores.resize(static_cast<std::size_t>(n));
  for (Eigen::Index v = 0; v < n; ++v) report.node_scores[v] = sigmoid(s[v]);
  report.selected_nodes = nodes_above(report.node_scores, options.cutoff);
  report.thresholds["cutoff"] = options.cutoff;
  report.thresholds["order"] = bank.order;
  return report;
}

double jaccard_similarity(const Graph& g, NodeId a, NodeId b) {
  std::size_t both = 0;
  std::size_t either = 0;
  for (Eigen::Index j = 0; j < g.features.cols(); ++j) {
    const bool x = g.features(a, j) != 0.0;
    const bool y = g.features(b, j) != 0.0;
    both += (x && y) ? 1 : 0;
    either += (x || y) ? 1 : 0;
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

DetectionReport jaccard_score(const Graph& g, double r, double p) {
  if (!(r > 0.0 && r < 1.0)) throw Error(fmt::format("jaccard threshold r must be in (0,1), got {}", r));
  if (!(p > 0.0 && p < 1.0)) throw Error(fmt::format("jaccard fraction p must be in (0,1), got {}", p));
  DetectionReport report;
  report.kind = "jaccard";
  report.node_scores.assign(g.node_count(), 0.0);
  for (NodeId v = 0; v < g.node_count(); ++v) {
    std::size_t dissimilar = 0;
    for (NodeId u : g.adjacency.neighbors(v)) {
      if (jaccard_similarity(g, v, u) < r) ++dissimilar;
    }
    report.node_scores[v] = static_cast<double>(dissimilar);
    const std::size_t degree = g.adjacency.degree(v);
    if (degree > 0 && static_cast<double>(dissimilar) > p * static_cast<double>(degree)) {
      report.selected_nodes.push_back(v);
    }
  }
  report.thresholds["r"] = r;
  report.thresholds["p"] = p;
  return report;
}

SimRankResult simrank(const Graph& g, int iterations, double tol) {
  if (iterations < 1) throw Error(fmt::format("simrank needs iterations >= 1, got {}", iterations));
  const auto n = static_cast<Eigen::Index>(g.node_count());
  std::vector<Eigen::Triplet<double>> triplets;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const double w = 1.0 / static_cast<double>(std::max<std::size_t>(1, g.adjacency.degree(v)));
    for (NodeId u : g.adjacency.neighbors(v)) triplets.emplace_back(v, u, w);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> walk(n, n);
  walk.setFromTriplets(triplets.begin(), triplets.end());

  SimRankResult result;
  result.similarity = Matrix::Identity(n, n);
  Matrix left(n, n);
  Matrix next(n, n);
  for (int it = 0; it < iterations; ++it) {
    left.noalias() = walk * result.similarity;
    next.noalias() = left * walk.transpose();
    next *= 0.5;
    next.diagonal().setOnes();
    const double delta = n == 0 ? 0.0 : (next - result.similarity).cwiseAbs().maxCoeff();
    result.similarity.swap(next);
    result.deltas.push_back(delta);
    result.iterations = it + 1;
    if (delta < tol) break;
  }
  return result;
}

double edge_similarity_percentile(const Graph& g, const Matrix& similarity, double percentile) {
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw Error(fmt::format("percentile must be in [0,100], got {}", percentile));
  }
  std::vector<double> values;
  for (const Edge& e : g.adjacency.edges()) values.push_back(similarity(e.u, e.v));
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(values.size())));
  return values[rank == 0 ? 0 : rank - 1];
}

DetectionReport simrank_edge_score(const Graph& g, const Matrix& similarity, double tau) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  if (similarity.rows() != n || similarity.cols() != n) {
    throw Error(fmt::format("similarity is {}x{} but the graph has {} nodes", similarity.rows(),
                            similarity.cols(), n));
  }
  DetectionReport report;
  report.kind = "simrank";
  for (const Edge& e : g.adjacency.edges()) {
    const double s = similarity(e.u, e.v);
    report.edge_scores.emplace_back(e, s);
    if (s < tau) report.selected_edges.push_back(e);
  }
  report.thresholds["tau"] = tau;
  return report;
}

DetectionReport select_by_ratio(const DetectionReport& report, double ratio, std::size_t universe) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(fmt::format("ratio must be in (0,1], got {}", ratio));
  const auto keep = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(universe)));
  DetectionReport out = report;
  out.thresholds["ratio"] = ratio;

  std::vector<NodeId> nodes = report.selected_nodes;
  std::sort(nodes.begin(), nodes.end(), [&](NodeId a, NodeId b) {
    const double sa = report.node_scores.at(a);
    const double sb = report.node_scores.at(b);
    return sa != sb ? sa > sb : a < b;
  });
  if (nodes.size() > keep) nodes.resize(keep);
  std::sort(nodes.begin(), nodes.end());
  out.selected_nodes = std::move(nodes);

  std::map<Edge, double> edge_score;
  for (const auto& [e, s] : report.edge_scores) edge_score[e] = s;
  std::vector<Edge> edges = report.selected_edges;
  std::sort(edges.begin(), edges.end(), [&](const Edge& a, const Edge& b) {
    const double sa = edge_score.at(a);
    const double sb = edge_score.at(b);
    return sa != sb ? sa < sb : a < b;
  });
  if (edges.size() > keep) edges.resize(keep);
  std::sort(edges.begin(), edges.end());
  out.selected_edges = std::move(edges);
  return out;
}

}  // namespace graphmu
