#pragma once

#include "graphmu/graph.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace graphmu {

enum class AttackKind { node_injection, feature_modification, structure_perturbation, mixed };

/// How the attacker picks the nodes it wants misclassified.
enum class Targeting {
  random,       // uniform over eligible nodes
  high_degree,  // descending degree, ties by id
  cross_class,  // nodes already adjacent to another class first
};

std::string_view to_string(AttackKind kind);
std::string_view to_string(Targeting targeting);
AttackKind parse_attack_kind(std::string_view text);
Targeting parse_targeting(std::string_view text);

struct AttackSpec {
  AttackKind kind = AttackKind::structure_perturbation;
  std::size_t budget = 0;
  Targeting targeting = Targeting::random;
  std::uint64_t seed = 0;
  /// Injected node count for node_injection; 0 picks ceil(sqrt(budget)).
  std::size_t injected_nodes = 0;

  bool operator==(const AttackSpec&) const = default;
};

/// Ground truth of what an attack changed.
struct PerturbationRecord {
  std::vector<NodeId> injected_nodes;
  std::map<NodeId, std::vector<std::uint32_t>> feature_modified;  // node -> flipped feature indices
  std::vector<Edge> added_edges;
  std::vector<Edge> removed_edges;
  std::size_t budget_used = 0;

  bool empty() const {
    return injected_nodes.empty() && feature_modified.empty() && added_edges.empty() &&
           removed_edges.empty();
  }
  std::size_t flipped_bits() const;
  std::vector<NodeId> feature_modified_nodes() const;

  bool operator==(const PerturbationRecord&) const = default;
};

struct PoisonedGraph {
  Graph graph;
  PerturbationRecord record;
};

/// Seeded heuristic poisoner. The input graph is never modified; injected
/// nodes are appended after the clean ids.
PoisonedGraph poison(const Graph& clean, const AttackSpec& spec);

struct BudgetCheck {
  bool ok = false;
  std::size_t recount = 0;          // edge changes + changed feature cells
  std::vector<std::string> issues;  // one line per disagreement
};

/// Recounts the perturbation from the raw matrices and checks it against the
/// record and the budget.
BudgetCheck verify_budget(const Graph& clean, const Graph& poisoned,
                          const PerturbationRecord& record, std::size_t budget);

/// Undoes a recorded perturbation: drops injected nodes, removes added edges,
/// restores removed edges and flips modified bits back.
Graph strip_perturbations(const Graph& poisoned, const PerturbationRecord& record);

}  // namespace graphmu
