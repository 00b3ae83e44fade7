#include "graphmu/attack.hpp"
#include "graphmu/detectors.hpp"
#include "graphmu/gcn.hpp"
#include "graphmu/repair.hpp"
#include "graphmu/subgraph.hpp"

#include <benchmark/benchmark.h>

using namespace graphmu;

namespace {

Graph regular(std::size_t n) {
  Graph g;
  g.adjacency = random_regular_graph(n, 8, 1);
  g.features = Matrix::Zero(static_cast<Eigen::Index>(n), 1);
  g.labels.assign(n, 0);
  g.num_classes = 1;
  g.split.assign(n, Split::train);
  return g;
}

Graph sbm(std::size_t per_block) {
  SbmSpec spec;
  spec.per_block = per_block;
  spec.p_in = 10.0 / static_cast<double>(per_block);
  spec.p_out = 1.0 / static_cast<double>(per_block);
  spec.seed = 1;
  return generate_sbm(spec);
}

void BM_SimRankIteration(benchmark::State& state) {
  const Graph g = regular(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(simrank(g, 1, 0.0).similarity.data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SimRankIteration)->RangeMultiplier(2)->Range(256, 2048)->Complexity(benchmark::oNSquared);

void BM_TrainEpochs(benchmark::State& state) {
  const Graph g = sbm(static_cast<std::size_t>(state.range(0)));
  TrainConfig cfg;
  cfg.epochs = 10;
  for (auto _ : state) benchmark::DoNotOptimize(train(g, cfg).w0.data());
}
BENCHMARK(BM_TrainEpochs)->Arg(50)->Arg(200)->Arg(800);

void BM_FilterBank(benchmark::State& state) {
  const Graph g = sbm(static_cast<std::size_t>(state.range(0)));
  const Laplacian lap = laplacian(g);
  for (auto _ : state) {
    const BetaFilterBank bank = build_filter_bank(lap, 2);
    benchmark::DoNotOptimize(filter_energies(bank, g.features).data());
  }
}
BENCHMARK(BM_FilterBank)->Arg(50)->Arg(200)->Arg(800);

void BM_RepairVsRetrain(benchmark::State& state) {
  const Graph g = sbm(200);
  AttackSpec attack;
  attack.kind = AttackKind::structure_perturbation;
  attack.budget = 50;
  const PoisonedGraph p = poison(g, attack);
  const GcnModel model = train(p.graph, {});
  const FineTunedSubgraph sub = build_structure_perturbation(p.graph, p.record.added_edges);
  const bool retrain_mode = state.range(0) == 1;
  for (auto _ : state) {
    if (retrain_mode) {
      benchmark::DoNotOptimize(retrain_baseline(p.graph, p.record, {}).model.w0.data());
    } else {
      benchmark::DoNotOptimize(repair(model, sub, {}).model.w0.data());
    }
  }
  state.SetLabel(retrain_mode ? "retrain" : "repair");
}
BENCHMARK(BM_RepairVsRetrain)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
