#include "graphmu/error.hpp"
#include "graphmu/persist.hpp"
#include "graphmu/pipeline.hpp"
#include "temp_dir.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace graphmu;
using graphmu::testing::TempDir;

namespace {

ExperimentConfig small_config(const TempDir& dir, AttackKind kind = AttackKind::mixed) {
  ExperimentConfig cfg = load_config(GRAPHMU_CONFIG_DIR "/fixture.json");
  cfg.attack.kind = kind;
  cfg.out_dir = (dir.path / "out").string();
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Config, DefaultsMatchHeadlineSetting) {
  const ExperimentConfig cfg;
  EXPECT_EQ(cfg.hops, 2);
  EXPECT_EQ(cfg.repair.rounds, 5);
  EXPECT_EQ(cfg.scenario, Scenario::k_unlearn);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, RoundTripIsIdentity) {
  ExperimentConfig cfg;
  cfg.attack.kind = AttackKind::node_injection;
  cfg.attack.budget = 17;
  cfg.detectors.simrank_tau = 0.0125;
  cfg.ratios = KnownRatios{0.1, 0.2, 0.3};
  cfg.repair_learning_rate = 0.02;
  cfg.evaluation = RepairedEvaluation::poisoned;
  cfg.scenario = Scenario::kn_unlearn;
  cfg.seed = 99;
  const std::string text = serialize_config(cfg);
  const ExperimentConfig back = parse_config(text);
  EXPECT_EQ(back, cfg);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(parse_config(serialize_config(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Config, PartialDocumentKeepsDefaults) {
  const ExperimentConfig cfg = parse_config(R"({"attack": {"kind": "node_injection"}, "seed": 4})");
  EXPECT_EQ(cfg.attack.kind, AttackKind::node_injection);
  EXPECT_EQ(cfg.seed, 4u);
  EXPECT_EQ(cfg.train, TrainConfig{});
}

TEST(Config, UnknownKeyNamed) {
  try {
    parse_config(R"({"attack": {"kind": "mixed", "bugdet": 3}})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("bugdet"), std::string::npos);
  }
}

TEST(Config, InvalidValuesRejected) {
  EXPECT_THROW(parse_config("{not json"), Error);
  EXPECT_THROW(parse_config(R"({"hops": 0})"), Error);
  EXPECT_THROW(parse_config(R"({"scenario": "Z"})"), Error);
  EXPECT_THROW(parse_config(R"({"train": {"epochs": 0}})"), Error);
  EXPECT_THROW(parse_config(R"({"hops": "two"})"), Error);
}

TEST(Config, DerivedSeedsDifferPerStream) {
  ExperimentConfig cfg;
  cfg.seed = 1;
  EXPECT_NE(dataset_seed(cfg), train_seed(cfg));
  EXPECT_NE(attack_seed(cfg), detector_seed(cfg));
  ExperimentConfig other = cfg;
  other.seed = 2;
  EXPECT_NE(dataset_seed(cfg), dataset_seed(other));
}

TEST(RunResult, TextRoundTrip) {
  RunResult r;
  r.values["a.x"] = "0.1";
  r.values["b"] = "text";
  EXPECT_EQ(RunResult::parse(r.text()), r);
  EXPECT_DOUBLE_EQ(r.number("a.x"), 0.1);
  EXPECT_THROW(r.number("missing"), Error);
}

TEST(Pipeline, SameConfigReproducesResultBitwise) {
  TempDir a;
  TempDir b;
  ExperimentConfig ca = small_config(a);
  ca.out_dir = (a.path / "one").string();
  ExperimentConfig cb = ca;
  cb.out_dir = (a.path / "two").string();
  const PipelineOutput first = run_pipeline(ca);
  const PipelineOutput second = run_pipeline(cb);
  EXPECT_EQ(first.result, second.result);
  EXPECT_EQ(slurp(artifacts::repaired_model(ca)), slurp(artifacts::repaired_model(cb)));
}

TEST(Pipeline, ReplayMatchesFromArtifactsOnly) {
  TempDir dir;
  const ExperimentConfig cfg = small_config(dir);
  const PipelineOutput out = run_pipeline(cfg);
  EXPECT_EQ(replay(cfg), out.result);
  EXPECT_EQ(RunResult::parse(slurp(artifacts::result(cfg))), out.result);
}

TEST(Pipeline, StagesRunOneByOne) {
  TempDir dir;
  ExperimentConfig cfg = small_config(dir, AttackKind::structure_perturbation);
  cfg.scenario = Scenario::uk_unlearn;
  for (const char* stage : {"train", "attack", "detect", "build", "repair", "validate", "evaluate"}) {
    run_stage(stage, cfg);
  }
  EXPECT_TRUE(std::filesystem::exists(artifacts::detection(cfg, "structure")));
  EXPECT_TRUE(std::filesystem::exists(artifacts::heatmap(cfg)));
  EXPECT_EQ(replay(cfg), RunResult::parse(slurp(artifacts::result(cfg))));
}

TEST(Pipeline, StageFailureNamesStage) {
  TempDir dir;
  const ExperimentConfig cfg = small_config(dir);
  try {
    run_stage("repair", cfg);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "repair");
  }
  EXPECT_THROW(run_stage("bogus", cfg), StageError);
}

TEST(Pipeline, SweepSharesPoisonedModel) {
  TempDir dir;
  const ExperimentConfig cfg = small_config(dir);
  const auto outputs = run_sweep(cfg, {Scenario::k_unlearn, Scenario::kn_unlearn, Scenario::uk_unlearn});
  ASSERT_EQ(outputs.size(), 3u);
  for (const auto& o : outputs) {
    EXPECT_EQ(o.result.values.at("poisoned.accuracy"), outputs[0].result.values.at("poisoned.accuracy"));
    EXPECT_EQ(o.result.values.at("clean.accuracy"), outputs[0].result.values.at("clean.accuracy"));
  }
  EXPECT_EQ(outputs[0].result.values.at("scenario"), "K");
  EXPECT_EQ(outputs[1].result.values.at("scenario"), "KN");
  EXPECT_EQ(outputs[2].result.values.at("scenario"), "UK");
  for (Scenario s : {Scenario::k_unlearn, Scenario::kn_unlearn, Scenario::uk_unlearn}) {
    ExperimentConfig local = cfg;
    local.scenario = s;
    EXPECT_EQ(replay(local), RunResult::parse(slurp(artifacts::result(local))));
  }
  EXPECT_EQ(outputs[0].result.number("detection.precision"), 1.0);
  EXPECT_EQ(outputs[0].result.number("detection.recall"), 1.0);
}

TEST(DetectionQuality, PerfectAndDisjoint) {
  PerturbationRecord r;
  r.injected_nodes = {5};
  r.feature_modified[2] = {1};
  r.added_edges = {{0, 1}};
  AnomalySets exact;
  exact.injected = {5};
  exact.feature_modified = {2};
  exact.edges = {{0, 1}};
  const DetectionQuality q = detection_quality(exact, r);
  EXPECT_EQ(q.precision, 1.0);
  EXPECT_EQ(q.recall, 1.0);
  AnomalySets wrong;
  wrong.injected = {7};
  wrong.edges = {{3, 4}};
  const DetectionQuality z = detection_quality(wrong, r);
  EXPECT_EQ(z.precision, 0.0);
  EXPECT_EQ(z.recall, 0.0);
}

TEST(DetectionQuality, RatioNarrowingCannotRaiseRecall) {
  const Graph g = [] {
    SbmSpec spec;
    spec.seed = 7;
    return generate_sbm(spec);
  }();
  AttackSpec attack;
  attack.kind = AttackKind::structure_perturbation;
  attack.budget = 20;
  const PoisonedGraph p = poison(g, attack);
  const DetectionReport uk =
      simrank_edge_score(p.graph, simrank(p.graph, 10, 0.0).similarity, 0.02);
  ASSERT_GT(uk.selected_edges.size(), 10u);
  for (double ratio : {0.001, 0.005, 0.01}) {
    const DetectionReport kn = select_by_ratio(uk, ratio, p.graph.adjacency.edge_count());
    ASSERT_LT(kn.selected_edges.size(), uk.selected_edges.size());
    EXPECT_LE(detection_quality(kn, p.record).recall, detection_quality(uk, p.record).recall);
  }
}

TEST(Timing, EmptyInputGivesEmptyTable) {
  EXPECT_TRUE(timing_report({}).empty());
  EXPECT_EQ(format_timing_table({}), "");
}

TEST(Timing, RowsCarryLabels) {
  PipelineOutput o;
  o.result.values = {{"dataset", "sbm"}, {"attack.kind", "mixed"}, {"scenario", "KN"}};
  o.timings.repair = 0.5;
  o.timings.retrain = 2.0;
  const auto rows = timing_report({o});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].scenario, "KN");
  EXPECT_EQ(rows[0].retrain_seconds, 2.0);
  EXPECT_NE(format_timing_table(rows).find("mixed"), std::string::npos);
}
