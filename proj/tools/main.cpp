#include "graphmu/error.hpp"
#include "graphmu/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> scenario;
  std::vector<std::string> scenarios{"K", "KN", "UK"};
};

graphmu::ExperimentConfig resolve(const Options& opts) {
  graphmu::ExperimentConfig cfg =
      opts.config_path.empty() ? graphmu::ExperimentConfig{} : graphmu::load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  if (opts.scenario) cfg.scenario = graphmu::parse_scenario(*opts.scenario);
  cfg.validate();
  return cfg;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw graphmu::Error(fmt::format("cannot open {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int run_command(const std::string& command, const Options& opts) {
  graphmu::ExperimentConfig cfg;
  try {
    cfg = resolve(opts);
  } catch (const std::exception& e) {
    fmt::print(stderr, "graphmu: {}\n", e.what());
    return 2;
  }
  try {
    if (command == "config") {
      fmt::print("{}", graphmu::serialize_config(cfg));
    } else if (command == "run") {
      const auto out = graphmu::run_pipeline(cfg);
      fmt::print("{}", graphmu::format_summary(out.result));
      fmt::print("{}", graphmu::format_timing_table(graphmu::timing_report({out})));
    } else if (command == "sweep") {
      std::vector<graphmu::Scenario> scenarios;
      for (const auto& s : opts.scenarios) scenarios.push_back(graphmu::parse_scenario(s));
      const auto outputs = graphmu::run_sweep(cfg, scenarios);
      for (const auto& out : outputs) fmt::print("{}\n", graphmu::format_summary(out.result));
      fmt::print("{}", graphmu::format_timing_table(graphmu::timing_report(outputs)));
    } else if (command == "replay") {
      const graphmu::RunResult recomputed = graphmu::replay(cfg);
      const auto stored = graphmu::RunResult::parse(read_file(graphmu::artifacts::result(cfg)));
      if (!(recomputed == stored)) {
        fmt::print(stderr, "graphmu: replay differs from {}\n", graphmu::artifacts::result(cfg).string());
        return 1;
      }
      fmt::print("replay matches {}\n", graphmu::artifacts::result(cfg).string());
    } else if (command == "evaluate") {
      graphmu::PipelineOutput out;
      try {
        out = graphmu::stage_evaluate(cfg);
      } catch (const std::exception& e) {
        throw graphmu::StageError("evaluate", e.what());
      }
      fmt::print("{}", graphmu::format_summary(out.result));
    } else {
      graphmu::run_stage(command, cfg);
      fmt::print("{} done, artifacts in {}\n", command, cfg.out_dir);
    }
  } catch (const graphmu::StageError& e) {
    fmt::print(stderr, "graphmu: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "graphmu: {} failed: {}\n", command, e.what());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphmu: repair poisoned GCNs by unlearning fine-tuning"};
  app.require_subcommand(1);
  Options opts;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train", "generate or load the clean graph and train the clean model"},
      {"attack", "poison the clean graph and train the poisoned model"},
      {"detect", "run the detectors needed by the configured attack (skipped for K)"},
      {"build", "construct the fine-tuned subgraph"},
      {"repair", "fine-tune the poisoned model on the subgraph"},
      {"validate", "check influence reduction around poisoned nodes"},
      {"evaluate", "train the retrain baseline and write the run result"},
      {"run", "all stages in order"},
      {"sweep", "train and attack once, then every listed scenario"},
      {"replay", "recompute the run result from persisted artifacts and compare"},
      {"config", "print the effective configuration as JSON"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto* config = sub->add_option("--config", opts.config_path, "JSON experiment configuration");
    if (name != "config") config->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "override the experiment seed");
    sub->add_option("--out", opts.out_dir, "override the output directory");
    sub->add_option("--scenario", opts.scenario, "override the scenario (K, KN or UK)");
    if (name == "sweep") {
      sub->add_option("--scenarios", opts.scenarios, "scenarios to run")->delimiter(',');
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  for (CLI::App* sub : app.get_subcommands()) return run_command(sub->get_name(), opts);
  return 2;
}
