#pragma once

#include "graphmu/gcn.hpp"
#include "graphmu/subgraph.hpp"

#include <ostream>
#include <vector>

namespace graphmu {

enum class Regime { same_class, different_class };

struct NeighborCheck {
  NodeId neighbor = 0;
  int neighbor_class = 0;     // predicted by the poisoned model
  Regime regime = Regime::same_class;
  std::vector<double> delta;  // O - O~ for every class
  bool effective = false;

  bool operator==(const NeighborCheck&) const = default;
};

struct NodeVerdict {
  NodeId node = 0;
  int predicted_class = 0;    // k1, from the poisoned model
  std::vector<NeighborCheck> neighbors;
  bool effective = false;     // strict majority of neighbors effective

  bool operator==(const NodeVerdict&) const = default;
};

struct ValidationReport {
  std::vector<NodeVerdict> nodes;  // ascending node id
  double effective_fraction = 0.0;

  bool operator==(const ValidationReport&) const = default;
};

/// Checks every neighbor of every poisoned node. `before` and `after` are the
/// softmax outputs of the poisoned and repaired models on the same graph.
/// Same-class neighbors need O[k1] > O~[k1]; different-class neighbors need
/// O[k2] <= O~[k2] or O[k1] > O~[k1]. A neighbor whose output row is unchanged
/// never counts as effective.
ValidationReport validate_outputs(const Matrix& before, const Matrix& after, const Adjacency& adjacency,
                                  const std::vector<NodeId>& poisoned_nodes);

/// Poisoned nodes are the anomalous nodes plus both endpoints of anomalous
/// edges; both models run on `g_poisoned`.
ValidationReport validate(const GcnModel& poisoned_model, const GcnModel& repaired_model,
                          const Graph& g_poisoned, const AnomalySets& anomalies);

/// Anomalous nodes and edge endpoints, sorted and unique.
std::vector<NodeId> poisoned_nodes(const AnomalySets& anomalies);

struct Heatmap {
  std::vector<NodeId> nodes;      // poisoned node per row
  std::vector<NodeId> neighbors;  // neighbor per row
  Matrix values;                  // rows x classes of O - O~
};

Heatmap influence_heatmap(const ValidationReport& report, int num_classes);

/// Tab-separated table with a header row: node, neighbor, then one column per class.
void write_heatmap_tsv(const Heatmap& heatmap, std::ostream& out);

}  // namespace graphmu
