#include "graphmu/subgraph.hpp"

#include "graphmu/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

namespace graphmu {

namespace {

struct Plan {
  std::set<NodeId> nodes;
  std::set<NodeId> centers;
  std::set<NodeId> excluded_nodes;
  std::set<NodeId> replaced;
  std::set<Edge> excluded_edges;
};

void check_node(const Graph& g, NodeId v) {
  if (v >= g.node_count()) {
    throw Error(fmt::format("anomalous node {} out of range for {} nodes", v, g.node_count()));
  }
}

void add_ball(const Graph& g, NodeId v, int hops, bool include_center, Plan& plan) {
  for (NodeId u : k_hop_neighbors(g, v, hops)) plan.nodes.insert(u);
  if (include_center) plan.nodes.insert(v);
  plan.centers.insert(v);
}

void plan_injection(const Graph& g, const std::vector<NodeId>& anomalous, int hops, Plan& plan) {
  for (NodeId v : anomalous) {
    check_node(g, v);
    add_ball(g, v, hops, false, plan);
    plan.excluded_nodes.insert(v);
  }
}

void plan_features(const Graph& g, const std::vector<NodeId>& anomalous, int hops, Plan& plan) {
  for (NodeId v : anomalous) {
    check_node(g, v);
    add_ball(g, v, hops, true, plan);
    plan.replaced.insert(v);
  }
}

void plan_edges(const Graph& g, const std::vector<Edge>& anomalous, int hops, Plan& plan) {
  for (Edge e : anomalous) {
    e = Edge::make(e.u, e.v);
    check_node(g, e.u);
    check_node(g, e.v);
    if (!g.adjacency.has_edge(e.u, e.v)) {
      throw Error(fmt::format("anomalous edge {}-{} is not in the graph", e.u, e.v));
    }
    add_ball(g, e.u, hops, false, plan);
    add_ball(g, e.v, hops, false, plan);
    plan.excluded_edges.insert(e);
  }
}

Eigen::RowVectorXd neighbor_mean(const Graph& g, NodeId v) {
  const auto nbrs = g.adjacency.neighbors(v);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(g.features.cols());
  for (NodeId u : nbrs) row += g.features.row(u);
  if (!nbrs.empty()) row /= static_cast<double>(nbrs.size());
  return row;
}

FineTunedSubgraph assemble(const Graph& g, Plan plan) {
  for (NodeId v : plan.excluded_nodes) plan.nodes.erase(v);
  if (plan.nodes.empty()) throw Error("subgraph empty");

  FineTunedSubgraph sub;
  sub.node_map.assign(plan.nodes.begin(), plan.nodes.end());
  std::vector<std::int64_t> local(g.node_count(), -1);
  for (std::size_t i = 0; i < sub.node_map.size(); ++i) local[sub.node_map[i]] = static_cast<std::int64_t>(i);

  auto& prov = sub.provenance;
  prov.centers.assign(plan.centers.begin(), plan.centers.end());
  prov.excluded_nodes.assign(plan.excluded_nodes.begin(), plan.excluded_nodes.end());
  prov.excluded_edges.assign(plan.excluded_edges.begin(), plan.excluded_edges.end());
  for (NodeId v : plan.replaced) {
    if (local[v] >= 0) prov.feature_replaced.push_back(v);
  }
  prov.replacement_rows.resize(static_cast<Eigen::Index>(prov.feature_replaced.size()), g.features.cols());
  for (std::size_t i = 0; i < prov.feature_replaced.size(); ++i) {
    const NodeId v = prov.feature_replaced[i];
    if (g.adjacency.degree(v) == 0) {
      prov.warnings.push_back(fmt::format("node {} has no neighbors; features zeroed", v));
    }
    prov.replacement_rows.row(static_cast<Eigen::Index>(i)) = neighbor_mean(g, v);
  }

  const std::size_t m = sub.node_map.size();
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < m; ++i) {
    const NodeId v = sub.node_map[i];
    for (NodeId u : g.adjacency.neighbors(v)) {
      if (v < u && local[u] >= 0 && !plan.excluded_edges.count(Edge{v, u})) {
        edges.push_back(Edge{static_cast<NodeId>(i), static_cast<NodeId>(local[u])});
      }
    }
  }
  Graph& out = sub.graph;
  out.adjacency = Adjacency::from_edges(m, edges);
  out.features.resize(static_cast<Eigen::Index>(m), g.features.cols());
  out.num_classes = g.num_classes;
  for (std::size_t i = 0; i < m; ++i) {
    const NodeId v = sub.node_map[i];
    out.features.row(static_cast<Eigen::Index>(i)) = g.features.row(v);
    out.labels.push_back(g.labels[v]);
    out.split.push_back(g.split[v]);
    out.ids.push_back(g.ids[v]);
  }
  for (std::size_t i = 0; i < prov.feature_replaced.size(); ++i) {
    out.features.row(local[prov.feature_replaced[i]]) = prov.replacement_rows.row(static_cast<Eigen::Index>(i));
  }
  if (std::none_of(out.split.begin(), out.split.end(), [](Split s) { return s == Split::train; })) {
    std::fill(out.split.begin(), out.split.end(), Split::train);
    prov.train_fallback = true;
  }
  return sub;
}

std::vector<NodeId> chosen_nodes(const Graph& g, const BuildRequest& request,
                                 const std::optional<DetectionReport>& report, double ratio,
                                 std::string_view channel) {
  if (!report) {
    throw Error(fmt::format("{} needs a {} detection report", to_string(request.scenario), channel));
  }
  if (request.scenario == Scenario::kn_unlearn) {
    if (ratio == 0.0) return {};
    return select_by_ratio(*report, ratio, g.node_count()).selected_nodes;
  }
  return report->selected_nodes;
}

std::vector<Edge> chosen_edges(const Graph& g, const BuildRequest& request) {
  const auto& report = request.detections.structure;
  if (!report) {
    throw Error(fmt::format("{} needs a structure detection report", to_string(request.scenario)));
  }
  if (request.scenario == Scenario::kn_unlearn) {
    if (request.ratios.structure == 0.0) return {};
    return select_by_ratio(*report, request.ratios.structure, g.adjacency.edge_count()).selected_edges;
  }
  return report->selected_edges;
}

}  // namespace

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::k_unlearn: return "K";
    case Scenario::kn_unlearn: return "KN";
    case Scenario::uk_unlearn: return "UK";
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view text) {
  for (auto s : {Scenario::k_unlearn, Scenario::kn_unlearn, Scenario::uk_unlearn}) {
    if (to_string(s) == text) return s;
  }
  throw Error(fmt::format("unknown scenario '{}' (expected K, KN or UK)", text));
}

bool Provenance::operator==(const Provenance& other) const {
  return centers == other.centers && excluded_nodes == other.excluded_nodes &&
         feature_replaced == other.feature_replaced &&
         replacement_rows.rows() == other.replacement_rows.rows() &&
         replacement_rows.cols() == other.replacement_rows.cols() &&
         replacement_rows == other.replacement_rows && excluded_edges == other.excluded_edges &&
         warnings == other.warnings && train_fallback == other.train_fallback;
}

FineTunedSubgraph build_node_injection(const Graph& g, const std::vector<NodeId>& anomalous, int hops) {
  if (anomalous.empty()) throw Error("no anomalous nodes given");
  Plan plan;
  plan_injection(g, anomalous, hops, plan);
  return assemble(g, std::move(plan));
}

FineTunedSubgraph build_feature_modification(const Graph& g, const std::vector<NodeId>& anomalous,
                                             int hops) {
  if (anomalous.empty()) throw Error("no anomalous nodes given");
  Plan plan;
  plan_features(g, anomalous, hops, plan);
  return assemble(g, std::move(plan));
}

FineTunedSubgraph build_structure_perturbation(const Graph& g, const std::vector<Edge>& anomalous,
                                               int hops) {
  if (anomalous.empty()) throw Error("no anomalous edges given");
  Plan plan;
  plan_edges(g, anomalous, hops, plan);
  return assemble(g, std::move(plan));
}

FineTunedSubgraph build_merged(const Graph& g, const AnomalySets& sets, int hops) {
  if (sets.empty()) throw Error("subgraph empty: no anomalies selected");
  Plan plan;
  plan_injection(g, sets.injected, hops, plan);
  plan_features(g, sets.feature_modified, hops, plan);
  plan_edges(g, sets.edges, hops, plan);
  return assemble(g, std::move(plan));
}

AnomalySets resolve_anomalies(const Graph& g, const BuildRequest& request) {
  AnomalySets sets;
  if (request.scenario == Scenario::k_unlearn) {
    if (!request.record) throw Error("K needs the perturbation record");
    const PerturbationRecord& record = *request.record;
    if (record.empty()) throw Error("nothing to unlearn");
    sets.injected = record.injected_nodes;
    sets.feature_modified = record.feature_modified_nodes();
    sets.edges = record.added_edges;
    return sets;
  }
  const bool nodes = request.kind == AttackKind::node_injection;
  const bool features =
      request.kind == AttackKind::feature_modification || request.kind == AttackKind::mixed;
  const bool edges =
      request.kind == AttackKind::structure_perturbation || request.kind == AttackKind::mixed;
  if (nodes) {
    sets.injected = chosen_nodes(g, request, request.detections.injection, request.ratios.injection, "injection");
  }
  if (features) {
    sets.feature_modified =
        chosen_nodes(g, request, request.detections.feature, request.ratios.feature, "feature");
  }
  if (edges) sets.edges = chosen_edges(g, request);
  return sets;
}

FineTunedSubgraph build(const Graph& g, const BuildRequest& request) {
  return build_merged(g, resolve_anomalies(g, request), request.hops);
}

AnomalySets anomalies_of(const Provenance& provenance) {
  return {provenance.excluded_nodes, provenance.feature_replaced, provenance.excluded_edges};
}

Graph apply_exclusions(const Graph& g, const Provenance& provenance) {
  const std::set<NodeId> detached(provenance.excluded_nodes.begin(), provenance.excluded_nodes.end());
  const std::set<Edge> dropped(provenance.excluded_edges.begin(), provenance.excluded_edges.end());
  std::vector<Edge> edges;
  for (const Edge& e : g.adjacency.edges()) {
    if (!detached.count(e.u) && !detached.count(e.v) && !dropped.count(e)) edges.push_back(e);
  }
  Graph out = g;
  out.adjacency = Adjacency::from_edges(g.node_count(), edges);
  for (std::size_t i = 0; i < provenance.feature_replaced.size(); ++i) {
    out.features.row(provenance.feature_replaced[i]) =
        provenance.replacement_rows.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace graphmu
