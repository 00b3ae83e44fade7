#include "graphmu/validation.hpp"

#include "graphmu/error.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace graphmu {

std::vector<NodeId> poisoned_nodes(const AnomalySets& anomalies) {
  std::vector<NodeId> out = anomalies.injected;
  out.insert(out.end(), anomalies.feature_modified.begin(), anomalies.feature_modified.end());
  for (const Edge& e : anomalies.edges) {
    out.push_back(e.u);
    out.push_back(e.v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ValidationReport validate_outputs(const Matrix& before, const Matrix& after, const Adjacency& adjacency,
                                  const std::vector<NodeId>& nodes) {
  const auto n = static_cast<Eigen::Index>(adjacency.node_count());
  if (before.rows() != n || after.rows() != n || before.cols() != after.cols()) {
    throw Error(fmt::format("outputs are {}x{} and {}x{} for {} nodes", before.rows(), before.cols(),
                            after.rows(), after.cols(), n));
  }
  if (nodes.empty()) throw Error("no poisoned nodes to validate");
  const std::vector<int> predicted = predict(before);
  ValidationReport report;
  std::size_t effective_nodes = 0;
  for (NodeId v : nodes) {
    if (v >= adjacency.node_count()) {
      throw Error(fmt::format("poisoned node {} out of range for {} nodes", v, n));
    }
    NodeVerdict verdict;
    verdict.node = v;
    const int k1 = predicted[v];
    verdict.predicted_class = k1;
    std::size_t effective_neighbors = 0;
    for (NodeId u : adjacency.neighbors(v)) {
      NeighborCheck check;
      check.neighbor = u;
      check.neighbor_class = predicted[u];
      check.regime = predicted[u] == k1 ? Regime::same_class : Regime::different_class;
      for (Eigen::Index k = 0; k < before.cols(); ++k) check.delta.push_back(before(u, k) - after(u, k));
      const bool unchanged = before.row(u) == after.row(u);
      const bool k1_drops = before(u, k1) > after(u, k1);
      if (check.regime == Regime::same_class) {
        check.effective = k1_drops;
      } else {
        const int k2 = check.neighbor_class;
        check.effective = !unchanged && (before(u, k2) <= after(u, k2) || k1_drops);
      }
      effective_neighbors += check.effective ? 1 : 0;
      verdict.neighbors.push_back(std::move(check));
    }
    verdict.effective = 2 * effective_neighbors > verdict.neighbors.size();
    effective_nodes += verdict.effective ? 1 : 0;
    report.nodes.push_back(std::move(verdict));
  }
  report.effective_fraction = static_cast<double>(effective_nodes) / static_cast<double>(nodes.size());
  return report;
}

ValidationReport validate(const GcnModel& poisoned_model, const GcnModel& repaired_model,
                          const Graph& g_poisoned, const AnomalySets& anomalies) {
  const SparseMatrix adj = normalize(g_poisoned).matrix;
  const Matrix before = forward(poisoned_model, adj, g_poisoned.features).probabilities;
  const Matrix after = forward(repaired_model, adj, g_poisoned.features).probabilities;
  return validate_outputs(before, after, g_poisoned.adjacency, poisoned_nodes(anomalies));
}

Heatmap influence_heatmap(const ValidationReport& report, int num_classes) {
  Heatmap map;
  std::size_t rows = 0;
  for (const auto& node : report.nodes) rows += node.neighbors.size();
  map.values.resize(static_cast<Eigen::Index>(rows), num_classes);
  Eigen::Index r = 0;
  for (const auto& node : report.nodes) {
    for (const auto& check : node.neighbors) {
      if (check.delta.size() != static_cast<std::size_t>(num_classes)) {
        throw Error(fmt::format("neighbor {} has {} deltas, expected {}", check.neighbor,
                                check.delta.size(), num_classes));
      }
      map.nodes.push_back(node.node);
      map.neighbors.push_back(check.neighbor);
      for (int k = 0; k < num_classes; ++k) map.values(r, k) = check.delta[k];
      ++r;
    }
  }
  return map;
}

void write_heatmap_tsv(const Heatmap& heatmap, std::ostream& out) {
  out << "node\tneighbor";
  for (Eigen::Index k = 0; k < heatmap.values.cols(); ++k) out << "\tclass" << k;
  out << '\n';
  for (std::size_t r = 0; r < heatmap.nodes.size(); ++r) {
    out << heatmap.nodes[r] << '\t' << heatmap.neighbors[r];
    for (Eigen::Index k = 0; k < heatmap.values.cols(); ++k) {
      out << '\t' << fmt::format("{:.17g}", heatmap.values(static_cast<Eigen::Index>(r), k));
    }
    out << '\n';
  }
}

}  // namespace graphmu
