#include "graphmu/persist.hpp"

#include "graphmu/error.hpp"

#include <fmt/format.h>

namespace graphmu {

namespace {

std::string key(std::string_view prefix, std::string_view name) {
  return fmt::format("{}{}", prefix, name);
}

void put_matrix(Snapshot& snap, std::string_view name, const Matrix& m) {
  std::vector<double> values(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) values[r * m.cols() + c] = m(r, c);
  }
  snap.put(name, std::move(values));
  snap.put(key(name, ".shape"),
           std::vector<std::uint64_t>{static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())});
}

Matrix get_matrix(const Snapshot& snap, std::string_view name) {
  const auto& shape = snap.get<std::uint64_t>(key(name, ".shape"));
  const auto& values = snap.get<double>(name);
  if (shape.size() != 2 || shape[0] * shape[1] != values.size()) {
    throw Error(fmt::format("section '{}' has an inconsistent shape", name));
  }
  Matrix m(static_cast<Eigen::Index>(shape[0]), static_cast<Eigen::Index>(shape[1]));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = values[r * m.cols() + c];
  }
  return m;
}

std::vector<std::uint32_t> flatten(const std::vector<Edge>& edges) {
  std::vector<std::uint32_t> out;
  for (const Edge& e : edges) {
    out.push_back(e.u);
    out.push_back(e.v);
  }
  return out;
}

std::vector<Edge> unflatten(const std::vector<std::uint32_t>& flat) {
  if (flat.size() % 2 != 0) throw Error("edge section has odd length");
  std::vector<Edge> out;
  for (std::size_t i = 0; i < flat.size(); i += 2) out.push_back(Edge{flat[i], flat[i + 1]});
  return out;
}

template <typename To, typename From>
std::vector<To> convert(const std::vector<From>& in) {
  return std::vector<To>(in.begin(), in.end());
}

void put_graph(Snapshot& snap, std::string_view prefix, const Graph& g) {
  snap.put(key(prefix, "offsets"),
           std::vector<std::uint64_t>(g.adjacency.offsets().begin(), g.adjacency.offsets().end()));
  snap.put(key(prefix, "indices"),
           std::vector<std::uint32_t>(g.adjacency.indices().begin(), g.adjacency.indices().end()));
  put_matrix(snap, key(prefix, "features"), g.features);
  snap.put(key(prefix, "labels"), convert<std::int64_t>(g.labels));
  snap.put(key(prefix, "num_classes"), std::vector<std::uint64_t>{static_cast<std::uint64_t>(g.num_classes)});
  std::vector<std::uint8_t> split;
  for (Split s : g.split) split.push_back(static_cast<std::uint8_t>(s));
  snap.put(key(prefix, "split"), std::move(split));
  snap.put(key(prefix, "ids"), g.ids);
}

Graph get_graph(const Snapshot& snap, std::string_view prefix) {
  Graph g;
  g.adjacency = Adjacency::from_csr(snap.get<std::uint64_t>(key(prefix, "offsets")),
                                    snap.get<std::uint32_t>(key(prefix, "indices")));
  g.features = get_matrix(snap, key(prefix, "features"));
  g.labels = convert<int>(snap.get<std::int64_t>(key(prefix, "labels")));
  g.num_classes = static_cast<int>(snap.get_scalar(key(prefix, "num_classes")));
  for (std::uint8_t s : snap.get<std::uint8_t>(key(prefix, "split"))) {
    if (s > 3) throw Error(fmt::format("invalid split code {}", s));
    g.split.push_back(static_cast<Split>(s));
  }
  g.ids = snap.get<std::string>(key(prefix, "ids"));
  g.validate();
  return g;
}

}  // namespace

Snapshot to_snapshot(const Graph& g) {
  Snapshot snap("graph");
  put_graph(snap, "", g);
  return snap;
}

Graph graph_from(const Snapshot& snap) { return get_graph(snap, ""); }

Snapshot to_snapshot(const GcnModel& model) {
  Snapshot snap("model");
  put_matrix(snap, "w0", model.w0);
  put_matrix(snap, "w1", model.w1);
  return snap;
}

GcnModel model_from(const Snapshot& snap) {
  GcnModel model{get_matrix(snap, "w0"), get_matrix(snap, "w1")};
  if (model.w0.cols() != model.w1.rows()) throw Error("model snapshot has mismatched layers");
  return model;
}

Snapshot to_snapshot(const PerturbationRecord& record) {
  Snapshot snap("record");
  snap.put("injected_nodes", convert<std::uint32_t>(record.injected_nodes));
  std::vector<std::uint32_t> nodes;
  std::vector<std::uint64_t> offsets{0};
  std::vector<std::uint32_t> bits;
  for (const auto& [node, flipped] : record.feature_modified) {
    nodes.push_back(node);
    bits.insert(bits.end(), flipped.begin(), flipped.end());
    offsets.push_back(bits.size());
  }
  snap.put("feature_nodes", std::move(nodes));
  snap.put("feature_offsets", std::move(offsets));
  snap.put("feature_bits", std::move(bits));
  snap.put("added_edges", flatten(record.added_edges));
  snap.put("removed_edges", flatten(record.removed_edges));
  snap.put("budget_used", std::vector<std::uint64_t>{record.budget_used});
  return snap;
}

PerturbationRecord record_from(const Snapshot& snap) {
  PerturbationRecord record;
  record.injected_nodes = convert<NodeId>(snap.get<std::uint32_t>("injected_nodes"));
  const auto& nodes = snap.get<std::uint32_t>("feature_nodes");
  const auto& offsets = snap.get<std::uint64_t>("feature_offsets");
  const auto& bits = snap.get<std::uint32_t>("feature_bits");
  if (offsets.size() != nodes.size() + 1 || offsets.back() != bits.size()) {
    throw Error("record snapshot has inconsistent feature sections");
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    record.feature_modified[nodes[i]] =
        std::vector<std::uint32_t>(bits.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                                   bits.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]));
  }
  record.added_edges = unflatten(snap.get<std::uint32_t>("added_edges"));
  record.removed_edges = unflatten(snap.get<std::uint32_t>("removed_edges"));
  record.budget_used = snap.get_scalar("budget_used");
  return record;
}

Snapshot to_snapshot(const DetectionReport& report) {
  Snapshot snap("detection");
  snap.put("kind", std::vector<std::string>{report.kind});
  snap.put("node_scores", report.node_scores);
  std::vector<Edge> edges;
  std::vector<double> values;
  for (const auto& [e, s] : report.edge_scores) {
    edges.push_back(e);
    values.push_back(s);
  }
  snap.put("edge_list", flatten(edges));
  snap.put("edge_scores", std::move(values));
  snap.put("selected_nodes", convert<std::uint32_t>(report.selected_nodes));
  snap.put("selected_edges", flatten(report.selected_edges));
  std::vector<std::string> names;
  std::vector<double> thresholds;
  for (const auto& [name, value] : report.thresholds) {
    names.push_back(name);
    thresholds.push_back(value);
  }
  snap.put("threshold_names", std::move(names));
  snap.put("threshold_values", std::move(thresholds));
  return snap;
}

DetectionReport detection_from(const Snapshot& snap) {
  DetectionReport report;
  const auto& kind = snap.get<std::string>("kind");
  if (kind.size() != 1) throw Error("detection snapshot needs exactly one kind");
  report.kind = kind.front();
  report.node_scores = snap.get<double>("node_scores");
  const auto edges = unflatten(snap.get<std::uint32_t>("edge_list"));
  const auto& values = snap.get<double>("edge_scores");
  if (edges.size() != values.size()) throw Error("detection snapshot edge sections differ in length");
  for (std::size_t i = 0; i < edges.size(); ++i) report.edge_scores.emplace_back(edges[i], values[i]);
  report.selected_nodes = convert<NodeId>(snap.get<std::uint32_t>("selected_nodes"));
  report.selected_edges = unflatten(snap.get<std::uint32_t>("selected_edges"));
  const auto& names = snap.get<std::string>("threshold_names");
  const auto& thresholds = snap.get<double>("threshold_values");
  if (names.size() != thresholds.size()) throw Error("detection snapshot threshold sections differ");
  for (std::size_t i = 0; i < names.size(); ++i) report.thresholds[names[i]] = thresholds[i];
  return report;
}

Snapshot to_snapshot(const FineTunedSubgraph& sub) {
  Snapshot snap("subgraph");
  put_graph(snap, "graph.", sub.graph);
  snap.put("node_map", convert<std::uint32_t>(sub.node_map));
  const Provenance& p = sub.provenance;
  snap.put("centers", convert<std::uint32_t>(p.centers));
  snap.put("excluded_nodes", convert<std::uint32_t>(p.excluded_nodes));
  snap.put("feature_replaced", convert<std::uint32_t>(p.feature_replaced));
  put_matrix(snap, "replacement_rows", p.replacement_rows);
  snap.put("excluded_edges", flatten(p.excluded_edges));
  snap.put("warnings", p.warnings);
  snap.put("train_fallback", std::vector<std::uint8_t>{static_cast<std::uint8_t>(p.train_fallback)});
  return snap;
}

FineTunedSubgraph subgraph_from(const Snapshot& snap) {
  FineTunedSubgraph sub;
  sub.graph = get_graph(snap, "graph.");
  sub.node_map = convert<NodeId>(snap.get<std::uint32_t>("node_map"));
  if (sub.node_map.size() != sub.graph.node_count()) throw Error("subgraph node map has the wrong length");
  Provenance& p = sub.provenance;
  p.centers = convert<NodeId>(snap.get<std::uint32_t>("centers"));
  p.excluded_nodes = convert<NodeId>(snap.get<std::uint32_t>("excluded_nodes"));
  p.feature_replaced = convert<NodeId>(snap.get<std::uint32_t>("feature_replaced"));
  p.replacement_rows = get_matrix(snap, "replacement_rows");
  p.excluded_edges = unflatten(snap.get<std::uint32_t>("excluded_edges"));
  p.warnings = snap.get<std::string>("warnings");
  const auto& fallback = snap.get<std::uint8_t>("train_fallback");
  if (fallback.size() != 1) throw Error("subgraph snapshot needs one train_fallback flag");
  p.train_fallback = fallback.front() != 0;
  return sub;
}

Snapshot to_snapshot(const ValidationReport& report) {
  Snapshot snap("validation");
  std::vector<std::uint32_t> nodes;
  std::vector<std::int64_t> predicted;
  std::vector<std::uint8_t> node_effective;
  std::vector<std::uint64_t> offsets{0};
  std::vector<std::uint32_t> neighbors;
  std::vector<std::int64_t> neighbor_class;
  std::vector<std::uint8_t> regime;
  std::vector<std::uint8_t> effective;
  std::vector<std::uint64_t> delta_offsets{0};
  std::vector<double> deltas;
  for (const auto& node : report.nodes) {
    nodes.push_back(node.node);
    predicted.push_back(node.predicted_class);
    node_effective.push_back(node.effective ? 1 : 0);
    for (const auto& check : node.neighbors) {
      neighbors.push_back(check.neighbor);
      neighbor_class.push_back(check.neighbor_class);
      regime.push_back(check.regime == Regime::same_class ? 0 : 1);
      effective.push_back(check.effective ? 1 : 0);
      deltas.insert(deltas.end(), check.delta.begin(), check.delta.end());
      delta_offsets.push_back(deltas.size());
    }
    offsets.push_back(neighbors.size());
  }
  snap.put("nodes", std::move(nodes));
  snap.put("predicted", std::move(predicted));
  snap.put("node_effective", std::move(node_effective));
  snap.put("neighbor_offsets", std::move(offsets));
  snap.put("neighbors", std::move(neighbors));
  snap.put("neighbor_class", std::move(neighbor_class));
  snap.put("regime", std::move(regime));
  snap.put("effective", std::move(effective));
  snap.put("delta_offsets", std::move(delta_offsets));
  snap.put("deltas", std::move(deltas));
  snap.put("effective_fraction", std::vector<double>{report.effective_fraction});
  return snap;
}

ValidationReport validation_from(const Snapshot& snap) {
  ValidationReport report;
  const auto& nodes = snap.get<std::uint32_t>("nodes");
  const auto& predicted = snap.get<std::int64_t>("predicted");
  const auto& node_effective = snap.get<std::uint8_t>("node_effective");
  const auto& offsets = snap.get<std::uint64_t>("neighbor_offsets");
  const auto& neighbors = snap.get<std::uint32_t>("neighbors");
  const auto& neighbor_class = snap.get<std::int64_t>("neighbor_class");
  const auto& regime = snap.get<std::uint8_t>("regime");
  const auto& effective = snap.get<std::uint8_t>("effective");
  const auto& delta_offsets = snap.get<std::uint64_t>("delta_offsets");
  const auto& deltas = snap.get<double>("deltas");
  const std::size_t m = neighbors.size();
  if (predicted.size() != nodes.size() || node_effective.size() != nodes.size() ||
      offsets.size() != nodes.size() + 1 || offsets.back() != m || neighbor_class.size() != m ||
      regime.size() != m || effective.size() != m || delta_offsets.size() != m + 1 ||
      delta_offsets.back() != deltas.size()) {
    throw Error("validation snapshot has inconsistent sections");
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    NodeVerdict verdict;
    verdict.node = nodes[i];
    verdict.predicted_class = static_cast<int>(predicted[i]);
    verdict.effective = node_effective[i] != 0;
    for (std::uint64_t j = offsets[i]; j < offsets[i + 1]; ++j) {
      NeighborCheck check;
      check.neighbor = neighbors[j];
      check.neighbor_class = static_cast<int>(neighbor_class[j]);
      check.regime = regime[j] == 0 ? Regime::same_class : Regime::different_class;
      check.effective = effective[j] != 0;
      check.delta.assign(deltas.begin() + static_cast<std::ptrdiff_t>(delta_offsets[j]),
                         deltas.begin() + static_cast<std::ptrdiff_t>(delta_offsets[j + 1]));
      verdict.neighbors.push_back(std::move(check));
    }
    report.nodes.push_back(std::move(verdict));
  }
  report.effective_fraction = snap.get_real("effective_fraction");
  return report;
}

}  // namespace graphmu
