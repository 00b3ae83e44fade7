#pragma once

#include "graphmu/attack.hpp"
#include "graphmu/detectors.hpp"
#include "graphmu/gcn.hpp"
#include "graphmu/repair.hpp"
#include "graphmu/subgraph.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace graphmu {

struct DatasetConfig {
  enum class Source { sbm, cora };
  Source source = Source::sbm;
  SbmSpec sbm;              // seed is replaced by one derived from the experiment seed
  std::string content_path; // cora
  std::string cites_path;   // cora
  CoraLoadOptions cora;

  bool operator==(const DatasetConfig&) const = default;
};

struct AttackConfig {
  AttackKind kind = AttackKind::structure_perturbation;
  /// Absolute budget; when absent, budget_fraction of the clean edge count (rounded down).
  std::optional<std::size_t> budget;
  double budget_fraction = 0.05;
  Targeting targeting = Targeting::random;
  std::size_t injected_nodes = 0;

  bool operator==(const AttackConfig&) const = default;
};

struct DetectorConfig {
  double jaccard_r = 0.01;
  double jaccard_p = 0.5;
  /// SimRank threshold; when absent, this percentile of the edge similarities.
  std::optional<double> simrank_tau;
  double simrank_percentile = 5.0;
  int simrank_iterations = 10;
  double simrank_tolerance = 1e-4;
  int filter_order = 2;
  BwgnnOptions bwgnn;  // seed is replaced by one derived from the experiment seed

  bool operator==(const DetectorConfig&) const = default;
};

/// Which graph the repaired model is scored on.
enum class RepairedEvaluation {
  sanitized,  // poisoned graph with the subgraph's exclusions and replacements applied
  poisoned,   // poisoned graph as is, so only the weights differ
};

struct ExperimentConfig {
  DatasetConfig dataset;
  AttackConfig attack;
  Scenario scenario = Scenario::k_unlearn;
  DetectorConfig detectors;
  /// KN ratios; when absent they are taken from the perturbation record.
  std::optional<KnownRatios> ratios;
  int hops = 2;
  TrainConfig train;       // seed is replaced by one derived from the experiment seed
  RepairConfig repair;
  /// Fine-tuning step size; when absent, the training learning rate.
  std::optional<double> repair_learning_rate;
  RepairedEvaluation evaluation = RepairedEvaluation::sanitized;
  std::uint64_t seed = 0;
  std::string out_dir = "graphmu-out";

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// Derived seeds for each random consumer.
std::uint64_t dataset_seed(const ExperimentConfig& cfg);
std::uint64_t train_seed(const ExperimentConfig& cfg);
std::uint64_t attack_seed(const ExperimentConfig& cfg);
std::uint64_t detector_seed(const ExperimentConfig& cfg);

/// Flat, ordered key/value result; values are exact decimal renderings.
struct RunResult {
  std::map<std::string, std::string> values;

  double number(const std::string& key) const;
  std::string text() const;  // "key=value" lines
  static RunResult parse(const std::string& text);
  bool operator==(const RunResult&) const = default;
};

/// Wall-clock seconds around the training and repair loops. Kept apart
/// from RunResult because they vary between runs.
struct Timings {
  double clean_train = 0.0;
  double poisoned_train = 0.0;
  double repair = 0.0;
  double retrain = 0.0;
};

struct PipelineOutput {
  RunResult result;
  Timings timings;
};

/// Artifact file names inside the output directory.
namespace artifacts {
std::filesystem::path clean_graph(const ExperimentConfig& cfg);
std::filesystem::path clean_model(const ExperimentConfig& cfg);
std::filesystem::path poisoned_graph(const ExperimentConfig& cfg);
std::filesystem::path record(const ExperimentConfig& cfg);
std::filesystem::path poisoned_model(const ExperimentConfig& cfg);
std::filesystem::path detection(const ExperimentConfig& cfg, std::string_view channel);
std::filesystem::path subgraph(const ExperimentConfig& cfg);
std::filesystem::path repaired_model(const ExperimentConfig& cfg);
std::filesystem::path validation(const ExperimentConfig& cfg);
std::filesystem::path heatmap(const ExperimentConfig& cfg);
std::filesystem::path retrained_model(const ExperimentConfig& cfg);
std::filesystem::path result(const ExperimentConfig& cfg);
std::filesystem::path timings(const ExperimentConfig& cfg);
}  // namespace artifacts

// Stages. Each reads its inputs from and writes its outputs to cfg.out_dir.
void stage_train(const ExperimentConfig& cfg);
void stage_attack(const ExperimentConfig& cfg);
void stage_detect(const ExperimentConfig& cfg);
void stage_build(const ExperimentConfig& cfg);
void stage_repair(const ExperimentConfig& cfg);
void stage_validate(const ExperimentConfig& cfg);
PipelineOutput stage_evaluate(const ExperimentConfig& cfg);

/// Thrown by run_pipeline; carries the failing stage.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Runs a stage by name ("train", "attack", ...), wrapping failures in StageError.
void run_stage(const std::string& stage, const ExperimentConfig& cfg);

PipelineOutput run_pipeline(const ExperimentConfig& cfg);

/// Trains and attacks once, then runs the remaining stages per scenario.
std::vector<PipelineOutput> run_sweep(const ExperimentConfig& cfg, const std::vector<Scenario>& scenarios);

/// Recomputes the RunResult from persisted artifacts only.
RunResult replay(const ExperimentConfig& cfg);

struct DetectionQuality {
  double precision = 0.0;
  double recall = 0.0;
};

/// Selected anomalies (nodes and edges pooled) against the record's ground truth.
DetectionQuality detection_quality(const AnomalySets& selected, const PerturbationRecord& record);
DetectionQuality detection_quality(const DetectionReport& report, const PerturbationRecord& record);

struct TimingRow {
  std::string dataset;
  std::string attack;
  std::string scenario;
  double repair_seconds = 0.0;
  double retrain_seconds = 0.0;
};

std::vector<TimingRow> timing_report(const std::vector<PipelineOutput>& outputs);
std::string format_timing_table(const std::vector<TimingRow>& rows);

/// Human-readable metric table for one result.
std::string format_summary(const RunResult& result);

}  // namespace graphmu
