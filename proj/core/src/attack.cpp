#include "graphmu/attack.hpp"

#include "graphmu/error.hpp"
#include "graphmu/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace graphmu {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::node_injection: return "node_injection";
    case AttackKind::feature_modification: return "feature_modification";
    case AttackKind::structure_perturbation: return "structure_perturbation";
    case AttackKind::mixed: return "mixed";
  }
  return "unknown";
}

std::string_view to_string(Targeting targeting) {
  switch (targeting) {
    case Targeting::random: return "random";
    case Targeting::high_degree: return "high_degree";
    case Targeting::cross_class: return "cross_class";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view text) {
  for (auto k : {AttackKind::node_injection, AttackKind::feature_modification,
                 AttackKind::structure_perturbation, AttackKind::mixed}) {
    if (to_string(k) == text) return k;
  }
  throw Error(fmt::format("unknown attack kind '{}'", text));
}

Targeting parse_targeting(std::string_view text) {
  for (auto t : {Targeting::random, Targeting::high_degree, Targeting::cross_class}) {
    if (to_string(t) == text) return t;
  }
  throw Error(fmt::format("unknown targeting '{}'", text));
}

std::size_t PerturbationRecord::flipped_bits() const {
  std::size_t total = 0;
  for (const auto& [node, bits] : feature_modified) total += bits.size();
  return total;
}

std::vector<NodeId> PerturbationRecord::feature_modified_nodes() const {
  std::vector<NodeId> out;
  for (const auto& [node, bits] : feature_modified) out.push_back(node);
  return out;
}

namespace {

// Mutable working copy of a graph under attack.
struct Workspace {
  std::vector<std::set<NodeId>> neighbors;
  Matrix features;
  std::vector<int> labels;
  std::vector<Split> split;
  std::vector<std::string> ids;
  int num_classes = 0;

  explicit Workspace(const Graph& g)
      : neighbors(g.node_count()),
        features(g.features),
        labels(g.labels),
        split(g.split),
        ids(g.ids),
        num_classes(g.num_classes) {
    for (NodeId v = 0; v < g.node_count(); ++v) {
      auto list = g.adjacency.neighbors(v);
      neighbors[v].insert(list.begin(), list.end());
    }
  }

  std::size_t size() const { return neighbors.size(); }

  bool has_edge(NodeId a, NodeId b) const { return neighbors[a].count(b) > 0; }

  void add_edge(NodeId a, NodeId b) {
    neighbors[a].insert(b);
    neighbors[b].insert(a);
  }

  NodeId add_node(const Eigen::RowVectorXd& row, int label, std::string id) {
    neighbors.emplace_back();
    features.conservativeResize(features.rows() + 1, Eigen::NoChange);
    features.row(features.rows() - 1) = row;
    labels.push_back(label);
    split.push_back(Split::none);
    ids.push_back(std::move(id));
    return static_cast<NodeId>(neighbors.size() - 1);
  }

  bool touches_other_class(NodeId v) const {
    for (NodeId u : neighbors[v]) {
      if (labels[u] != labels[v]) return true;
    }
    return false;
  }

  Graph finish() const {
    std::vector<Edge> edges;
    for (NodeId v = 0; v < size(); ++v) {
      for (NodeId u : neighbors[v]) {
        if (v < u) edges.push_back({v, u});
      }
    }
    Graph g;
    g.adjacency = Adjacency::from_edges(size(), edges);
    g.features = features;
    g.labels = labels;
    g.num_classes = num_classes;
    g.split = split;
    g.ids = ids;
    return g;
  }
};

// Orders candidate victims according to the targeting rule.
std::vector<NodeId> rank_victims(const Workspace& ws, std::vector<NodeId> candidates,
                                 Targeting targeting, Rng& rng) {
  rng.shuffle(std::span<NodeId>(candidates));
  switch (targeting) {
    case Targeting::random:
      break;
    case Targeting::high_degree:
      std::sort(candidates.begin(), candidates.end(), [&](NodeId a, NodeId b) {
        const auto da = ws.neighbors[a].size();
        const auto db = ws.neighbors[b].size();
        return da != db ? da > db : a < b;
      });
      break;
    case Targeting::cross_class:
      std::stable_partition(candidates.begin(), candidates.end(),
                            [&](NodeId v) { return ws.touches_other_class(v); });
      break;
  }
  return candidates;
}

std::vector<NodeId> all_nodes(std::size_t n) {
  std::vector<NodeId> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<NodeId>(i);
  return out;
}

// Per-class mean of each feature column over the clean nodes.
Matrix class_feature_frequency(const Workspace& ws, std::size_t clean_count) {
  Matrix freq = Matrix::Zero(ws.num_classes, ws.features.cols());
  std::vector<double> counts(ws.num_classes, 0.0);
  for (std::size_t v = 0; v < clean_count; ++v) {
    freq.row(ws.labels[v]) += ws.features.row(static_cast<Eigen::Index>(v));
    counts[ws.labels[v]] += 1.0;
  }
  for (int c = 0; c < ws.num_classes; ++c) {
    if (counts[c] > 0.0) freq.row(c) /= counts[c];
  }
  return freq;
}

int pick_other_class(int own, int num_classes, Rng& rng) {
  const auto offset = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes - 1)));
  return (own + offset) % num_classes;
}

void inject_nodes(Workspace& ws, std::size_t budget, const AttackSpec& spec, Rng& rng,
                  PerturbationRecord& record) {
  if (budget == 0) return;
  const std::size_t clean_count = ws.size();
  const std::size_t k = spec.injected_nodes != 0
                            ? spec.injected_nodes
                            : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(budget))));
  if (k > budget) {
    throw Error(fmt::format("budget {} cannot wire {} injected nodes", budget, k));
  }
  // All injected nodes impersonate one class and share one ranked target
  // list, so each target collects several foreign neighbors.
  const int apparent = static_cast<int>(rng.below(static_cast<std::uint64_t>(ws.num_classes)));
  std::vector<NodeId> donors;
  std::vector<NodeId> targets;
  for (NodeId v = 0; v < clean_count; ++v) {
    (ws.labels[v] == apparent ? donors : targets).push_back(v);
  }
  const std::size_t widest = (budget + k - 1) / k;
  if (donors.empty() || targets.size() < widest) {
    throw Error(fmt::format("infeasible injection: class {} has {} donors and {} targets for {} edges",
                            apparent, donors.size(), targets.size(), widest));
  }
  targets = rank_victims(ws, std::move(targets), spec.targeting, rng);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t wires = budget / k + (j < budget % k ? 1 : 0);
    const NodeId donor = donors[rng.below(donors.size())];
    const Eigen::RowVectorXd row = ws.features.row(donor);
    const NodeId id = ws.add_node(row, apparent, fmt::format("inj{}", j));
    for (std::size_t w = 0; w < wires; ++w) ws.add_edge(id, targets[w]);
    record.injected_nodes.push_back(id);
    record.budget_used += wires;
  }
}

void flip_features(Workspace& ws, std::size_t budget, const AttackSpec& spec, Rng& rng,
                   PerturbationRecord& record) {
  if (budget == 0) return;
  const std::size_t clean_count = ws.size();
  const Matrix freq = class_feature_frequency(ws, clean_count);
  const auto victims = rank_victims(ws, all_nodes(clean_count), spec.targeting, rng);
  std::size_t remaining = budget;
  for (NodeId v : victims) {
    if (remaining == 0) break;
    const int own = ws.labels[v];
    const int target = pick_other_class(own, ws.num_classes, rng);
    // Flip toward the target class: switch on bits frequent there and switch
    // off bits frequent in the own class, strongest contrast first.
    std::vector<std::pair<double, std::uint32_t>> candidates;
    for (Eigen::Index k = 0; k < ws.features.cols(); ++k) {
      const double contrast = freq(target, k) - freq(own, k);
      const bool on = ws.features(v, k) != 0.0;
      if ((contrast > 0.0 && !on) || (contrast < 0.0 && on)) {
        candidates.emplace_back(std::abs(contrast), static_cast<std::uint32_t>(k));
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    std::vector<std::uint32_t> flipped;
    for (const auto& [contrast, k] : candidates) {
      if (remaining == 0) break;
      ws.features(v, k) = ws.features(v, k) != 0.0 ? 0.0 : 1.0;
      flipped.push_back(k);
      --remaining;
    }
    if (!flipped.empty()) {
      std::sort(flipped.begin(), flipped.end());
      record.feature_modified[v] = std::move(flipped);
    }
  }
  if (remaining != 0) {
    throw Error(fmt::format("infeasible feature budget: {} flips left unplaced", remaining));
  }
  record.budget_used += budget;
}

void add_cross_class_edges(Workspace& ws, std::size_t budget, const AttackSpec& spec, Rng& rng,
                           PerturbationRecord& record) {
  if (budget == 0) return;
  const std::size_t clean_count = ws.size();
  const auto victims = rank_victims(ws, all_nodes(clean_count), spec.targeting, rng);
  std::vector<Edge> added;
  // Each victim receives edges to one foreign class until that class
  // outnumbers its own neighbors, then the next victim is taken.
  for (NodeId v : victims) {
    if (added.size() == budget) break;
    std::vector<int> counts(ws.num_classes, 0);
    for (NodeId u : ws.neighbors[v]) ++counts[ws.labels[u]];
    const int own = ws.labels[v];
    int target = -1;
    for (int c = 0; c < ws.num_classes; ++c) {
      if (c != own && (target < 0 || counts[c] > counts[target])) target = c;
    }
    if (counts[target] == 0) target = pick_other_class(own, ws.num_classes, rng);
    std::vector<NodeId> partners;
    for (NodeId u = 0; u < clean_count; ++u) {
      if (ws.labels[u] == target && !ws.has_edge(u, v)) partners.push_back(u);
    }
    rng.shuffle(std::span<NodeId>(partners));
    const auto needed = static_cast<std::size_t>(std::max(1, counts[own] - counts[target] + 1));
    for (std::size_t i = 0; i < partners.size() && i < needed && added.size() < budget; ++i) {
      ws.add_edge(partners[i], v);
      added.push_back(Edge::make(partners[i], v));
    }
  }
  if (added.size() < budget) {
    throw Error(fmt::format("infeasible structure budget: only {} of {} cross-class edges placed",
                            added.size(), budget));
  }
  std::sort(added.begin(), added.end());
  record.added_edges.insert(record.added_edges.end(), added.begin(), added.end());
  std::sort(record.added_edges.begin(), record.added_edges.end());
  record.budget_used += budget;
}

}  // namespace

PoisonedGraph poison(const Graph& clean, const AttackSpec& spec) {
  if (clean.num_classes < 2) throw Error("poisoning needs at least two classes");
  Workspace ws(clean);
  PerturbationRecord record;
  Rng rng(spec.seed);
  switch (spec.kind) {
    case AttackKind::node_injection:
      inject_nodes(ws, spec.budget, spec, rng, record);
      break;
    case AttackKind::feature_modification:
      flip_features(ws, spec.budget, spec, rng, record);
      break;
    case AttackKind::structure_perturbation:
      add_cross_class_edges(ws, spec.budget, spec, rng, record);
      break;
    case AttackKind::mixed: {
      const std::size_t flips = spec.budget / 2;
      flip_features(ws, flips, spec, rng, record);
      add_cross_class_edges(ws, spec.budget - flips, spec, rng, record);
      break;
    }
  }
  return {ws.finish(), std::move(record)};
}

BudgetCheck verify_budget(const Graph& clean, const Graph& poisoned,
                          const PerturbationRecord& record, std::size_t budget) {
  BudgetCheck check;
  const std::size_t n_clean = clean.node_count();
  const std::size_t n_poisoned = poisoned.node_count();
  if (n_poisoned < n_clean) {
    check.issues.push_back(fmt::format("poisoned graph has {} nodes, fewer than the clean {}",
                                       n_poisoned, n_clean));
    return check;
  }
  if (poisoned.features.cols() != clean.features.cols()) {
    check.issues.push_back("feature widths differ");
    return check;
  }

  std::set<NodeId> injected(record.injected_nodes.begin(), record.injected_nodes.end());
  if (injected.size() != record.injected_nodes.size()) check.issues.push_back("duplicate injected node ids");
  for (NodeId v = static_cast<NodeId>(n_clean); v < n_poisoned; ++v) {
    if (!injected.count(v)) check.issues.push_back(fmt::format("node {} is new but not recorded as injected", v));
  }
  for (NodeId v : injected) {
    if (v < n_clean || v >= n_poisoned) check.issues.push_back(fmt::format("recorded injected node {} is not a new node", v));
  }

  const std::set<Edge> added(record.added_edges.begin(), record.added_edges.end());
  const std::set<Edge> removed(record.removed_edges.begin(), record.removed_edges.end());
  if (added.size() != record.added_edges.size()) check.issues.push_back("duplicate added edges in record");
  if (removed.size() != record.removed_edges.size()) check.issues.push_back("duplicate removed edges in record");

  std::size_t edge_changes = 0;
  std::size_t injected_edges = 0;
  for (const Edge& e : poisoned.adjacency.edges()) {
    if (e.v >= n_clean) {
      ++edge_changes;
      ++injected_edges;
      continue;
    }
    if (!clean.adjacency.has_edge(e.u, e.v)) {
      ++edge_changes;
      if (!added.count(e)) check.issues.push_back(fmt::format("edge ({}, {}) added but not recorded", e.u, e.v));
    }
  }
  for (const Edge& e : clean.adjacency.edges()) {
    if (!poisoned.adjacency.has_edge(e.u, e.v)) {
      ++edge_changes;
      if (!removed.count(e)) check.issues.push_back(fmt::format("edge ({}, {}) removed but not recorded", e.u, e.v));
    }
  }
  for (const Edge& e : added) {
    if (!poisoned.adjacency.has_edge(e.u, e.v)) {
      check.issues.push_back(fmt::format("record lists added edge ({}, {}) absent from poisoned graph", e.u, e.v));
    } else if (clean.adjacency.has_edge(e.u, e.v)) {
      check.issues.push_back(fmt::format("record lists added edge ({}, {}) already in clean graph", e.u, e.v));
    }
  }
  for (const Edge& e : removed) {
    if (!clean.adjacency.has_edge(e.u, e.v)) {
      check.issues.push_back(fmt::format("record lists removed edge ({}, {}) absent from clean graph", e.u, e.v));
    } else if (poisoned.adjacency.has_edge(e.u, e.v)) {
      check.issues.push_back(fmt::format("record lists removed edge ({}, {}) still in poisoned graph", e.u, e.v));
    }
  }

  std::size_t feature_changes = 0;
  for (Eigen::Index v = 0; v < static_cast<Eigen::Index>(n_clean); ++v) {
    std::vector<std::uint32_t> changed;
    for (Eigen::Index k = 0; k < clean.features.cols(); ++k) {
      if (clean.features(v, k) != poisoned.features(v, k)) changed.push_back(static_cast<std::uint32_t>(k));
    }
    feature_changes += changed.size();
    auto it = record.feature_modified.find(static_cast<NodeId>(v));
    const std::vector<std::uint32_t> recorded = it == record.feature_modified.end() ? std::vector<std::uint32_t>{} : it->second;
    if (changed != recorded) {
      check.issues.push_back(fmt::format("node {}: {} feature cells changed, record lists {}", v,
                                         changed.size(), recorded.size()));
    }
  }

  check.recount = edge_changes + feature_changes;
  const std::size_t claimed = injected_edges + record.flipped_bits() + added.size() + removed.size();
  if (claimed != record.budget_used) {
    check.issues.push_back(fmt::format("record budget_used {} but its entries add up to {}",
                                       record.budget_used, claimed));
  }
  if (check.recount != record.budget_used) {
    check.issues.push_back(fmt::format("recounted {} changes but record claims {}", check.recount,
                                       record.budget_used));
  }
  if (check.recount > budget) {
    check.issues.push_back(fmt::format("recounted {} changes exceed budget {}", check.recount, budget));
  }
  check.ok = check.issues.empty();
  return check;
}

Graph strip_perturbations(const Graph& poisoned, const PerturbationRecord& record) {
  const std::size_t n = poisoned.node_count() - record.injected_nodes.size();
  for (NodeId v : record.injected_nodes) {
    if (v < n) throw Error(fmt::format("injected node {} is not among the trailing ids", v));
  }
  const std::set<Edge> added(record.added_edges.begin(), record.added_edges.end());
  std::vector<Edge> edges;
  for (const Edge& e : poisoned.adjacency.edges()) {
    if (e.v < n && !added.count(e)) edges.push_back(e);
  }
  edges.insert(edges.end(), record.removed_edges.begin(), record.removed_edges.end());

  Graph g;
  g.adjacency = Adjacency::from_edges(n, edges);
  g.features = poisoned.features.topRows(static_cast<Eigen::Index>(n));
  for (const auto& [node, bits] : record.feature_modified) {
    for (std::uint32_t k : bits) g.features(node, k) = g.features(node, k) != 0.0 ? 0.0 : 1.0;
  }
  g.labels.assign(poisoned.labels.begin(), poisoned.labels.begin() + static_cast<std::ptrdiff_t>(n));
  g.num_classes = poisoned.num_classes;
  g.split.assign(poisoned.split.begin(), poisoned.split.begin() + static_cast<std::ptrdiff_t>(n));
  g.ids.assign(poisoned.ids.begin(), poisoned.ids.begin() + static_cast<std::ptrdiff_t>(n));
  return g;
}

}  // namespace graphmu
