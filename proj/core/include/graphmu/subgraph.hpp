#pragma once

#include "graphmu/attack.hpp"
#include "graphmu/detectors.hpp"
#include "graphmu/graph.hpp"

#include <optional>
#include <string>
#include <vector>

namespace graphmu {

enum class Scenario { k_unlearn, kn_unlearn, uk_unlearn };

std::string_view to_string(Scenario scenario);
Scenario parse_scenario(std::string_view text);

/// What went into a subgraph, in original node ids.
struct Provenance {
  std::vector<NodeId> centers;           // anomalous nodes and endpoints of anomalous edges
  std::vector<NodeId> excluded_nodes;
  std::vector<NodeId> feature_replaced;
  Matrix replacement_rows;               // one row per feature_replaced entry
  std::vector<Edge> excluded_edges;
  std::vector<std::string> warnings;
  bool train_fallback = false;           // no train node survived, all nodes used

  bool operator==(const Provenance& other) const;
};

struct FineTunedSubgraph {
  Graph graph;                    // local ids 0..m-1
  std::vector<NodeId> node_map;   // local id -> original id, ascending
  Provenance provenance;

  bool operator==(const FineTunedSubgraph&) const = default;
};

/// Union of the K-hop balls around each anomalous node, minus the anomalous
/// nodes themselves.
FineTunedSubgraph build_node_injection(const Graph& g, const std::vector<NodeId>& anomalous, int hops = 2);

/// Union of the K-hop balls including each anomalous node; anomalous rows are
/// replaced by the mean of their one-hop neighbor rows.
FineTunedSubgraph build_feature_modification(const Graph& g, const std::vector<NodeId>& anomalous,
                                             int hops = 2);

/// Union of the K-hop balls around both endpoints, with the anomalous edges removed.
FineTunedSubgraph build_structure_perturbation(const Graph& g, const std::vector<Edge>& anomalous,
                                               int hops = 2);

/// Anomalies feeding one subgraph, already resolved to concrete sets.
struct AnomalySets {
  std::vector<NodeId> injected;
  std::vector<NodeId> feature_modified;
  std::vector<Edge> edges;

  bool empty() const { return injected.empty() && feature_modified.empty() && edges.empty(); }
};

/// Runs every applicable builder and merges the results on original ids,
/// applying all exclusion and replacement rules together.
FineTunedSubgraph build_merged(const Graph& g, const AnomalySets& sets, int hops = 2);

/// Detector output per perturbation channel.
struct DetectionInputs {
  std::optional<DetectionReport> injection;  // bwgnn
  std::optional<DetectionReport> feature;    // jaccard
  std::optional<DetectionReport> structure;  // simrank
};

/// Known perturbation ratios: fraction of nodes injected, fraction of nodes
/// feature-modified, fraction of edges added. A zero ratio selects nothing.
struct KnownRatios {
  double injection = 1.0;
  double feature = 1.0;
  double structure = 1.0;

  bool operator==(const KnownRatios&) const = default;
};

struct BuildRequest {
  Scenario scenario = Scenario::k_unlearn;
  AttackKind kind = AttackKind::structure_perturbation;
  std::optional<PerturbationRecord> record;  // K
  DetectionInputs detections;                // KN and UK
  KnownRatios ratios;                        // KN
  int hops = 2;
};

/// Resolves the anomaly sets a scenario would unlearn.
AnomalySets resolve_anomalies(const Graph& g, const BuildRequest& request);

FineTunedSubgraph build(const Graph& g, const BuildRequest& request);

/// The anomaly sets a subgraph was built from, recovered from its provenance.
AnomalySets anomalies_of(const Provenance& provenance);

/// The input graph with the subgraph's exclusions and replacements applied
/// everywhere: excluded edges removed, excluded nodes detached (kept so ids
/// and masks stay aligned), replaced rows written.
Graph apply_exclusions(const Graph& g, const Provenance& provenance);

}  // namespace graphmu
