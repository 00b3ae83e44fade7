#include "graphmu/attack.hpp"
#include "graphmu/error.hpp"
#include "graphmu/repair.hpp"

#include <gtest/gtest.h>

using namespace graphmu;

namespace {

struct Poisoned {
  Graph clean;
  PoisonedGraph poisoned;
  GcnModel model;
  FineTunedSubgraph sub;
};

Poisoned setup(std::uint64_t seed = 1) {
  Poisoned s;
  SbmSpec spec;
  spec.seed = 7;
  s.clean = generate_sbm(spec);
  AttackSpec attack;
  attack.kind = AttackKind::structure_perturbation;
  attack.budget = 20;
  attack.seed = seed;
  s.poisoned = poison(s.clean, attack);
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  s.model = train(s.poisoned.graph, cfg);
  s.sub = build_structure_perturbation(s.poisoned.graph, s.poisoned.record.added_edges);
  return s;
}

double param_delta(const GcnModel& a, const GcnModel& b) {
  return std::sqrt((a.w0 - b.w0).squaredNorm() + (a.w1 - b.w1).squaredNorm());
}

}  // namespace

TEST(Repair, ZeroRateKeepsParametersBitIdentical) {
  const Poisoned s = setup();
  RepairConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.tolerance = 0.0;
  const RepairResult r = repair(s.model, s.sub, cfg);
  EXPECT_EQ(r.model, s.model);
  EXPECT_EQ(r.rounds_run, 5);
}

TEST(Repair, SmallStepLowersSubgraphLoss) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Poisoned s = setup(seed);
    RepairConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.rounds = 2;
    cfg.tolerance = 0.0;
    const RepairResult r = repair(s.model, s.sub, cfg);
    ASSERT_EQ(r.losses.size(), 2u);
    EXPECT_LE(r.losses[1], r.losses[0]);
  }
}

TEST(Repair, HalvingRateHalvesParameterDelta) {
  const Poisoned s = setup();
  RepairConfig cfg;
  cfg.rounds = 1;
  cfg.learning_rate = 0.02;
  const double full = param_delta(repair(s.model, s.sub, cfg).model, s.model);
  cfg.learning_rate = 0.01;
  const double half = param_delta(repair(s.model, s.sub, cfg).model, s.model);
  EXPECT_GE(half / full, 0.4);
  EXPECT_LE(half / full, 0.6);
}

TEST(Repair, InputModelUntouched) {
  const Poisoned s = setup();
  const GcnModel copy = s.model;
  RepairConfig cfg;
  cfg.tolerance = 0.0;
  const RepairResult r = repair(s.model, s.sub, cfg);
  EXPECT_EQ(s.model, copy);
  EXPECT_FALSE(r.model == s.model);
  EXPECT_EQ(r.rounds_run, 5);
  EXPECT_EQ(r.losses.size(), 5u);
  EXPECT_GE(r.seconds, 0.0);
}

TEST(Repair, StopsOnTolerance) {
  const Poisoned s = setup();
  RepairConfig cfg;
  cfg.rounds = 50;
  cfg.learning_rate = 1e-9;
  cfg.tolerance = 1e-6;
  EXPECT_EQ(repair(s.model, s.sub, cfg).rounds_run, 1);
  cfg.max_iterations = 3;
  cfg.tolerance = 0.0;
  cfg.learning_rate = 0.01;
  EXPECT_EQ(repair(s.model, s.sub, cfg).rounds_run, 3);
}

TEST(Repair, DimensionMismatchRejected) {
  const Poisoned s = setup();
  GcnModel wrong = s.model;
  wrong.w0.conservativeResize(5, Eigen::NoChange);
  EXPECT_THROW(repair(wrong, s.sub, {}), Error);
}

TEST(Repair, InvalidConfigRejected) {
  RepairConfig cfg;
  cfg.rounds = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.rounds = 1;
  cfg.learning_rate = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Repair, Deterministic) {
  const Poisoned s = setup();
  EXPECT_EQ(repair(s.model, s.sub, {}).model, repair(s.model, s.sub, {}).model);
}

TEST(Retrain, StripsPerturbationsAndIsDeterministic) {
  const Poisoned s = setup();
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  const RetrainResult a = retrain_baseline(s.poisoned.graph, s.poisoned.record, cfg);
  const RetrainResult b = retrain_baseline(s.poisoned.graph, s.poisoned.record, cfg);
  EXPECT_EQ(a.graph, s.clean);
  EXPECT_EQ(a.model, b.model);
}

TEST(Retrain, RecoversCleanAccuracyOverSeeds) {
  SbmSpec spec;
  double clean = 0.0;
  double retrained = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    spec.seed = seed;
    const Graph g = generate_sbm(spec);
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.seed = seed;
    const Mask test = g.mask(Split::test);
    clean += evaluate(train(g, cfg), g, test).accuracy / 10.0;
    AttackSpec attack;
    attack.kind = AttackKind::mixed;
    attack.budget = 20;
    attack.seed = seed;
    const PoisonedGraph p = poison(g, attack);
    cfg.seed = seed + 100;
    const RetrainResult r = retrain_baseline(p.graph, p.record, cfg);
    retrained += evaluate(r.model, r.graph, test).accuracy / 10.0;
  }
  EXPECT_NEAR(retrained, clean, 0.02);
}
