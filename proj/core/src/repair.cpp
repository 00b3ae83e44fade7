#include "graphmu/repair.hpp"

#include "graphmu/error.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>

namespace graphmu {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void RepairConfig::validate() const {
  if (rounds < 1) throw Error(fmt::format("repair rounds must be >= 1, got {}", rounds));
  if (!(learning_rate >= 0.0)) throw Error(fmt::format("repair learning rate must be >= 0, got {}", learning_rate));
  if (max_iterations < 0) throw Error("max_iterations must be >= 0");
  if (!(tolerance >= 0.0)) throw Error("tolerance must be >= 0");
}

RepairResult repair(const GcnModel& model, const FineTunedSubgraph& sub, const RepairConfig& cfg) {
  cfg.validate();
  const Graph& g = sub.graph;
  if (model.feature_dim() != g.features.cols() || model.num_classes() != g.num_classes) {
    throw Error(fmt::format("model is {} -> {} but the subgraph has width {} and {} classes",
                            model.feature_dim(), model.num_classes(), g.features.cols(), g.num_classes));
  }
  const Mask mask = g.mask(Split::train);
  const auto start = std::chrono::steady_clock::now();
  const SparseMatrix adj = normalize(g).matrix;

  RepairResult result;
  result.model = model;
  const int steps = std::min(cfg.rounds, cfg.iteration_cap());
  for (int round = 0; round < steps; ++round) {
    const Gradients grads = backward(result.model, adj, g.features, g.labels, mask);
    if (!std::isfinite(grads.loss)) throw Error(fmt::format("non-finite loss in repair round {}", round));
    if (!result.losses.empty() && std::abs(result.losses.back() - grads.loss) < cfg.tolerance) break;
    result.losses.push_back(grads.loss);
    result.model = gradient_step(result.model, grads, cfg.learning_rate);
    result.rounds_run = round + 1;
  }
  result.seconds = seconds_since(start);
  return result;
}

RetrainResult retrain_baseline(const Graph& poisoned, const PerturbationRecord& record,
                               const TrainConfig& cfg) {
  RetrainResult result;
  result.graph = strip_perturbations(poisoned, record);
  const auto start = std::chrono::steady_clock::now();
  result.model = train(result.graph, cfg);
  result.seconds = seconds_since(start);
  return result;
}

}  // namespace graphmu
