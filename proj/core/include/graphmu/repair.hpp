#pragma once

#include "graphmu/attack.hpp"
#include "graphmu/gcn.hpp"
#include "graphmu/subgraph.hpp"

#include <vector>

namespace graphmu {

struct RepairConfig {
  int rounds = 5;
  double learning_rate = 0.05;
  /// Hard cap on descent steps; 0 means 10 * rounds.
  int max_iterations = 0;
  /// Stop once the absolute change in subgraph loss drops below this.
  double tolerance = 1e-6;

  int iteration_cap() const { return max_iterations > 0 ? max_iterations : 10 * rounds; }
  void validate() const;
  bool operator==(const RepairConfig&) const = default;
};

struct RepairResult {
  GcnModel model;
  int rounds_run = 0;
  std::vector<double> losses;  // subgraph loss before each step
  double seconds = 0.0;        // descent loop only
};

/// Fine-tunes a copy of `model` on the subgraph's train nodes, starting from
/// the poisoned parameters with every layer trainable.
RepairResult repair(const GcnModel& model, const FineTunedSubgraph& sub, const RepairConfig& cfg);

struct RetrainResult {
  GcnModel model;
  Graph graph;             // poisoned graph with the recorded perturbations undone
  double seconds = 0.0;    // training loop only
};

/// Fresh training on the poisoned graph after removing the ground-truth perturbations.
RetrainResult retrain_baseline(const Graph& poisoned, const PerturbationRecord& record,
                               const TrainConfig& cfg);

}  // namespace graphmu
