#include "graphmu/pipeline.hpp"

#include "graphmu/error.hpp"
#include "graphmu/persist.hpp"
#include "graphmu/rng.hpp"
#include "graphmu/validation.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace graphmu {

using nlohmann::json;

namespace {

// ---- config ----------------------------------------------------------------

void reject_unknown(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw Error(fmt::format("config: '{}' must be an object", where));
  for (const auto& [name, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), name) == keys.end()) {
      throw Error(fmt::format("config: unknown key '{}' in '{}'", name, where));
    }
  }
}

template <typename T>
void read(const json& j, const char* name, T& out) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw Error(fmt::format("config: bad value for '{}': {}", name, e.what()));
  }
}

template <typename T>
void read_optional(const json& j, const char* name, std::optional<T>& out) {
  if (!j.contains(name)) return;
  if (j.at(name).is_null()) {
    out.reset();
    return;
  }
  T value{};
  read(j, name, value);
  out = value;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void check(bool ok, std::string message) {
  if (!ok) throw Error("config: " + message);
}

// ---- small helpers -----------------------------------------------------------

std::string number(double v) { return fmt::format("{:.17g}", v); }

Mask pad_mask(const Mask& mask, std::size_t n) {
  Mask out(n, false);
  for (std::size_t i = 0; i < mask.size() && i < n; ++i) out[i] = mask[i];
  return out;
}

std::filesystem::path out_path(const ExperimentConfig& cfg, const std::string& name) {
  return std::filesystem::path(cfg.out_dir) / name;
}

std::string scenario_tag(const ExperimentConfig& cfg) {
  return std::string(to_string(cfg.scenario));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void save_seconds(const std::filesystem::path& path, double seconds) {
  Snapshot snap("timing");
  snap.put("seconds", std::vector<double>{seconds});
  snap.save(path);
}

double load_seconds(const std::filesystem::path& path) {
  return Snapshot::load(path, "timing").get_real("seconds");
}

std::filesystem::path timing_path(const ExperimentConfig& cfg, const std::string& what) {
  return out_path(cfg, fmt::format("timing.{}.snap", what));
}

std::filesystem::path repair_log_path(const ExperimentConfig& cfg) {
  return out_path(cfg, fmt::format("repair_log.{}.snap", scenario_tag(cfg)));
}

TrainConfig train_config(const ExperimentConfig& cfg) {
  TrainConfig tc = cfg.train;
  tc.seed = train_seed(cfg);
  return tc;
}

RepairConfig repair_config(const ExperimentConfig& cfg) {
  RepairConfig rc = cfg.repair;
  rc.learning_rate = cfg.repair_learning_rate.value_or(cfg.train.learning_rate);
  return rc;
}

Graph load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.source == DatasetConfig::Source::sbm) {
    SbmSpec spec = cfg.dataset.sbm;
    spec.seed = dataset_seed(cfg);
    return generate_sbm(spec);
  }
  CoraLoadOptions options = cfg.dataset.cora;
  options.split_seed = dataset_seed(cfg);
  return load_cora_format(cfg.dataset.content_path, cfg.dataset.cites_path, options);
}

std::size_t attack_budget(const ExperimentConfig& cfg, const Graph& clean) {
  if (cfg.attack.budget) return *cfg.attack.budget;
  return static_cast<std::size_t>(
      std::floor(cfg.attack.budget_fraction * static_cast<double>(clean.adjacency.edge_count())));
}

struct Channels {
  bool injection = false;
  bool feature = false;
  bool structure = false;
};

Channels channels_for(AttackKind kind) {
  Channels c;
  c.injection = kind == AttackKind::node_injection;
  c.feature = kind == AttackKind::feature_modification || kind == AttackKind::mixed;
  c.structure = kind == AttackKind::structure_perturbation || kind == AttackKind::mixed;
  return c;
}

KnownRatios ratios_from_record(const PerturbationRecord& record, const Graph& poisoned) {
  const double n = static_cast<double>(std::max<std::size_t>(1, poisoned.node_count()));
  const double m = static_cast<double>(std::max<std::size_t>(1, poisoned.adjacency.edge_count()));
  KnownRatios r;
  r.injection = std::min(1.0, static_cast<double>(record.injected_nodes.size()) / n);
  r.feature = std::min(1.0, static_cast<double>(record.feature_modified.size()) / n);
  r.structure = std::min(1.0, static_cast<double>(record.added_edges.size()) / m);
  return r;
}

void put_metrics(RunResult& out, const std::string& prefix, const Metrics& m) {
  out.values[prefix + ".accuracy"] = number(m.accuracy);
  out.values[prefix + ".precision"] = number(m.precision);
  out.values[prefix + ".recall"] = number(m.recall);
  out.values[prefix + ".f1"] = number(m.f1);
}

RunResult compute_result(const ExperimentConfig& cfg) {
  const Graph clean = load_graph(artifacts::clean_graph(cfg));
  const Graph poisoned = load_graph(artifacts::poisoned_graph(cfg));
  const PerturbationRecord record = load_record(artifacts::record(cfg));
  const GcnModel clean_model = load_model(artifacts::clean_model(cfg));
  const GcnModel poisoned_model = load_model(artifacts::poisoned_model(cfg));
  const GcnModel repaired_model = load_model(artifacts::repaired_model(cfg));
  const GcnModel retrained_model = load_model(artifacts::retrained_model(cfg));
  const FineTunedSubgraph sub = load_subgraph(artifacts::subgraph(cfg));
  const ValidationReport validation = load_validation(artifacts::validation(cfg));
  const Snapshot repair_log = Snapshot::load(repair_log_path(cfg), "repair_log");

  const Mask test = clean.mask(Split::test);
  const Mask test_poisoned = pad_mask(test, poisoned.node_count());
  const Graph sanitized = apply_exclusions(poisoned, sub.provenance);
  const Graph stripped = strip_perturbations(poisoned, record);

  RunResult out;
  out.values["dataset"] = cfg.dataset.source == DatasetConfig::Source::sbm ? "sbm" : "cora";
  out.values["attack.kind"] = std::string(to_string(cfg.attack.kind));
  out.values["attack.budget_used"] = std::to_string(record.budget_used);
  out.values["scenario"] = scenario_tag(cfg);
  out.values["seed"] = std::to_string(cfg.seed);
  out.values["evaluation"] = cfg.evaluation == RepairedEvaluation::sanitized ? "sanitized" : "poisoned";

  put_metrics(out, "clean", evaluate(clean_model, clean, test));
  put_metrics(out, "poisoned", evaluate(poisoned_model, poisoned, test_poisoned));
  const Graph& repaired_graph = cfg.evaluation == RepairedEvaluation::sanitized ? sanitized : poisoned;
  put_metrics(out, "repaired", evaluate(repaired_model, repaired_graph, test_poisoned));
  put_metrics(out, "repaired_weights_only", evaluate(repaired_model, poisoned, test_poisoned));
  put_metrics(out, "poisoned_on_sanitized", evaluate(poisoned_model, sanitized, test_poisoned));
  put_metrics(out, "retrained", evaluate(retrained_model, stripped, test));

  const DetectionQuality quality = detection_quality(anomalies_of(sub.provenance), record);
  out.values["detection.precision"] = number(quality.precision);
  out.values["detection.recall"] = number(quality.recall);

  out.values["subgraph.nodes"] = std::to_string(sub.graph.node_count());
  out.values["subgraph.edges"] = std::to_string(sub.graph.adjacency.edge_count());
  out.values["subgraph.excluded_nodes"] = std::to_string(sub.provenance.excluded_nodes.size());
  out.values["subgraph.excluded_edges"] = std::to_string(sub.provenance.excluded_edges.size());
  out.values["subgraph.feature_replaced"] = std::to_string(sub.provenance.feature_replaced.size());
  out.values["subgraph.train_fallback"] = sub.provenance.train_fallback ? "1" : "0";

  out.values["repair.rounds_run"] = std::to_string(repair_log.get_scalar("rounds_run"));
  const auto& losses = repair_log.get<double>("losses");
  out.values["repair.first_loss"] = losses.empty() ? "nan" : number(losses.front());
  out.values["repair.last_loss"] = losses.empty() ? "nan" : number(losses.back());

  std::size_t neighbors = 0;
  for (const auto& node : validation.nodes) neighbors += node.neighbors.size();
  out.values["validation.effective_fraction"] = number(validation.effective_fraction);
  out.values["validation.poisoned_nodes"] = std::to_string(validation.nodes.size());
  out.values["validation.neighbors"] = std::to_string(neighbors);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw Error(fmt::format("write failed for {}", path.string()));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Timings collect_timings(const ExperimentConfig& cfg) {
  Timings t;
  t.clean_train = load_seconds(timing_path(cfg, "train"));
  t.poisoned_train = load_seconds(timing_path(cfg, "attack"));
  t.repair = load_seconds(timing_path(cfg, "repair." + scenario_tag(cfg)));
  t.retrain = load_seconds(timing_path(cfg, "retrain"));
  return t;
}

}  // namespace

// ---- config ------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (dataset.source == DatasetConfig::Source::cora) {
    check(std::filesystem::exists(dataset.content_path),
          fmt::format("content file '{}' does not exist", dataset.content_path));
    check(std::filesystem::exists(dataset.cites_path),
          fmt::format("cites file '{}' does not exist", dataset.cites_path));
    check(dataset.cora.train_per_class >= 1, "cora.train_per_class must be >= 1");
    check(dataset.cora.val_count >= 0 && dataset.cora.test_count >= 1, "cora val/test counts out of range");
  } else {
    const SbmSpec& s = dataset.sbm;
    check(s.blocks >= 2, "sbm.blocks must be >= 2");
    check(s.per_block >= 2, "sbm.per_block must be >= 2");
    check(s.p_in >= 0.0 && s.p_in <= 1.0 && s.p_out >= 0.0 && s.p_out <= 1.0, "sbm probabilities out of [0,1]");
    check(s.p_in > s.p_out, "sbm.p_in must exceed sbm.p_out");
    check(s.feature_dim >= 1, "sbm.feature_dim must be >= 1");
    for (double p : {s.prototype_density, s.keep_probability, s.noise_probability}) {
      check(p >= 0.0 && p <= 1.0, "sbm feature probabilities out of [0,1]");
    }
  }
  check(attack.budget_fraction >= 0.0 && attack.budget_fraction <= 1.0, "attack.budget_fraction out of [0,1]");
  check(detectors.jaccard_r > 0.0 && detectors.jaccard_r < 1.0, "detectors.jaccard_r must be in (0,1)");
  check(detectors.jaccard_p > 0.0 && detectors.jaccard_p < 1.0, "detectors.jaccard_p must be in (0,1)");
  check(detectors.simrank_percentile >= 0.0 && detectors.simrank_percentile <= 100.0,
        "detectors.simrank_percentile out of [0,100]");
  check(detectors.simrank_iterations >= 1, "detectors.simrank_iterations must be >= 1");
  check(detectors.simrank_tolerance >= 0.0, "detectors.simrank_tolerance must be >= 0");
  check(detectors.filter_order >= 1, "detectors.filter_order must be >= 1");
  check(detectors.bwgnn.hidden >= 1 && detectors.bwgnn.epochs >= 0, "detectors.bwgnn sizes out of range");
  check(detectors.bwgnn.synthetic_fraction > 0.0 && detectors.bwgnn.synthetic_fraction <= 1.0,
        "detectors.bwgnn.synthetic_fraction must be in (0,1]");
  if (ratios) {
    for (double r : {ratios->injection, ratios->feature, ratios->structure}) {
      check(r >= 0.0 && r <= 1.0, "ratios must be in [0,1]");
    }
  }
  check(hops >= 1, "hops must be >= 1");
  train.validate();
  repair.validate();
  if (repair_learning_rate) check(*repair_learning_rate > 0.0, "repair.learning_rate must be > 0");
  check(!out_dir.empty(), "out_dir must not be empty");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(fmt::format("config: {}", e.what()));
  }
  reject_unknown(root, "root", {"dataset", "attack", "scenario", "detectors", "ratios", "hops", "train",
                                "repair", "evaluation", "seed", "out_dir"});
  ExperimentConfig cfg;
  if (root.contains("dataset")) {
    const json& d = root["dataset"];
    reject_unknown(d, "dataset", {"source", "sbm", "cora"});
    std::string source = "sbm";
    read(d, "source", source);
    if (source == "sbm") {
      cfg.dataset.source = DatasetConfig::Source::sbm;
    } else if (source == "cora") {
      cfg.dataset.source = DatasetConfig::Source::cora;
    } else {
      throw Error(fmt::format("config: unknown dataset source '{}'", source));
    }
    if (d.contains("sbm")) {
      const json& s = d["sbm"];
      reject_unknown(s, "dataset.sbm", {"blocks", "per_block", "p_in", "p_out", "feature_dim",
                                        "prototype_density", "keep_probability", "noise_probability"});
      SbmSpec& spec = cfg.dataset.sbm;
      read(s, "blocks", spec.blocks);
      read(s, "per_block", spec.per_block);
      read(s, "p_in", spec.p_in);
      read(s, "p_out", spec.p_out);
      read(s, "feature_dim", spec.feature_dim);
      read(s, "prototype_density", spec.prototype_density);
      read(s, "keep_probability", spec.keep_probability);
      read(s, "noise_probability", spec.noise_probability);
    }
    if (d.contains("cora")) {
      const json& c = d["cora"];
      reject_unknown(c, "dataset.cora",
                     {"content", "cites", "skip_unknown_ids", "train_per_class", "val_count", "test_count"});
      read(c, "content", cfg.dataset.content_path);
      read(c, "cites", cfg.dataset.cites_path);
      read(c, "skip_unknown_ids", cfg.dataset.cora.skip_unknown_ids);
      read(c, "train_per_class", cfg.dataset.cora.train_per_class);
      read(c, "val_count", cfg.dataset.cora.val_count);
      read(c, "test_count", cfg.dataset.cora.test_count);
    }
  }
  if (root.contains("attack")) {
    const json& a = root["attack"];
    reject_unknown(a, "attack", {"kind", "budget", "budget_fraction", "targeting", "injected_nodes"});
    std::string kind(to_string(cfg.attack.kind));
    read(a, "kind", kind);
    cfg.attack.kind = parse_attack_kind(kind);
    read_optional(a, "budget", cfg.attack.budget);
    read(a, "budget_fraction", cfg.attack.budget_fraction);
    std::string targeting(to_string(cfg.attack.targeting));
    read(a, "targeting", targeting);
    cfg.attack.targeting = parse_targeting(targeting);
    read(a, "injected_nodes", cfg.attack.injected_nodes);
  }
  if (root.contains("scenario")) {
    std::string scenario;
    read(root, "scenario", scenario);
    cfg.scenario = parse_scenario(scenario);
  }
  if (root.contains("detectors")) {
    const json& d = root["detectors"];
    reject_unknown(d, "detectors", {"jaccard_r", "jaccard_p", "simrank_tau", "simrank_percentile",
                                    "simrank_iterations", "simrank_tolerance", "filter_order", "bwgnn"});
    DetectorConfig& dc = cfg.detectors;
    read(d, "jaccard_r", dc.jaccard_r);
    read(d, "jaccard_p", dc.jaccard_p);
    read_optional(d, "simrank_tau", dc.simrank_tau);
    read(d, "simrank_percentile", dc.simrank_percentile);
    read(d, "simrank_iterations", dc.simrank_iterations);
    read(d, "simrank_tolerance", dc.simrank_tolerance);
    read(d, "filter_order", dc.filter_order);
    if (d.contains("bwgnn")) {
      const json& b = d["bwgnn"];
      reject_unknown(b, "detectors.bwgnn",
                     {"mode", "cutoff", "hidden", "epochs", "learning_rate", "synthetic_fraction"});
      std::string mode(to_string(dc.bwgnn.mode));
      read(b, "mode", mode);
      dc.bwgnn.mode = parse_bwgnn_mode(mode);
      read(b, "cutoff", dc.bwgnn.cutoff);
      read(b, "hidden", dc.bwgnn.hidden);
      read(b, "epochs", dc.bwgnn.epochs);
      read(b, "learning_rate", dc.bwgnn.learning_rate);
      read(b, "synthetic_fraction", dc.bwgnn.synthetic_fraction);
    }
  }
  if (root.contains("ratios") && !root["ratios"].is_null()) {
    const json& r = root["ratios"];
    reject_unknown(r, "ratios", {"injection", "feature", "structure"});
    KnownRatios kr;
    read(r, "injection", kr.injection);
    read(r, "feature", kr.feature);
    read(r, "structure", kr.structure);
    cfg.ratios = kr;
  }
  read(root, "hops", cfg.hops);
  if (root.contains("train")) {
    const json& t = root["train"];
    reject_unknown(t, "train", {"learning_rate", "epochs", "hidden_dim", "weight_init_scale"});
    read(t, "learning_rate", cfg.train.learning_rate);
    read(t, "epochs", cfg.train.epochs);
    read(t, "hidden_dim", cfg.train.hidden_dim);
    read(t, "weight_init_scale", cfg.train.weight_init_scale);
  }
  if (root.contains("repair")) {
    const json& r = root["repair"];
    reject_unknown(r, "repair", {"rounds", "learning_rate", "max_iterations", "tolerance"});
    read(r, "rounds", cfg.repair.rounds);
    read_optional(r, "learning_rate", cfg.repair_learning_rate);
    read(r, "max_iterations", cfg.repair.max_iterations);
    read(r, "tolerance", cfg.repair.tolerance);
  }
  if (root.contains("evaluation")) {
    std::string mode;
    read(root, "evaluation", mode);
    if (mode == "sanitized") {
      cfg.evaluation = RepairedEvaluation::sanitized;
    } else if (mode == "poisoned") {
      cfg.evaluation = RepairedEvaluation::poisoned;
    } else {
      throw Error(fmt::format("config: unknown evaluation '{}' (expected sanitized or poisoned)", mode));
    }
  }
  read(root, "seed", cfg.seed);
  read(root, "out_dir", cfg.out_dir);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error&) {
    throw Error(fmt::format("config: cannot read {}", path.string()));
  }
  return parse_config(text);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  const SbmSpec& s = cfg.dataset.sbm;
  const DetectorConfig& d = cfg.detectors;
  json root;
  root["dataset"] = {
      {"source", cfg.dataset.source == DatasetConfig::Source::sbm ? "sbm" : "cora"},
      {"sbm",
       {{"blocks", s.blocks},
        {"per_block", s.per_block},
        {"p_in", s.p_in},
        {"p_out", s.p_out},
        {"feature_dim", s.feature_dim},
        {"prototype_density", s.prototype_density},
        {"keep_probability", s.keep_probability},
        {"noise_probability", s.noise_probability}}},
      {"cora",
       {{"content", cfg.dataset.content_path},
        {"cites", cfg.dataset.cites_path},
        {"skip_unknown_ids", cfg.dataset.cora.skip_unknown_ids},
        {"train_per_class", cfg.dataset.cora.train_per_class},
        {"val_count", cfg.dataset.cora.val_count},
        {"test_count", cfg.dataset.cora.test_count}}}};
  root["attack"] = {{"kind", std::string(to_string(cfg.attack.kind))},
                    {"budget", optional_json(cfg.attack.budget)},
                    {"budget_fraction", cfg.attack.budget_fraction},
                    {"targeting", std::string(to_string(cfg.attack.targeting))},
                    {"injected_nodes", cfg.attack.injected_nodes}};
  root["scenario"] = scenario_tag(cfg);
  root["detectors"] = {{"jaccard_r", d.jaccard_r},
                       {"jaccard_p", d.jaccard_p},
                       {"simrank_tau", optional_json(d.simrank_tau)},
                       {"simrank_percentile", d.simrank_percentile},
                       {"simrank_iterations", d.simrank_iterations},
                       {"simrank_tolerance", d.simrank_tolerance},
                       {"filter_order", d.filter_order},
                       {"bwgnn",
                        {{"mode", std::string(to_string(d.bwgnn.mode))},
                         {"cutoff", d.bwgnn.cutoff},
                         {"hidden", d.bwgnn.hidden},
                         {"epochs", d.bwgnn.epochs},
                         {"learning_rate", d.bwgnn.learning_rate},
                         {"synthetic_fraction", d.bwgnn.synthetic_fraction}}}};
  root["ratios"] = cfg.ratios ? json{{"injection", cfg.ratios->injection},
                                     {"feature", cfg.ratios->feature},
                                     {"structure", cfg.ratios->structure}}
                              : json(nullptr);
  root["hops"] = cfg.hops;
  root["train"] = {{"learning_rate", cfg.train.learning_rate},
                   {"epochs", cfg.train.epochs},
                   {"hidden_dim", cfg.train.hidden_dim},
                   {"weight_init_scale", cfg.train.weight_init_scale}};
  root["repair"] = {{"rounds", cfg.repair.rounds},
                    {"learning_rate", optional_json(cfg.repair_learning_rate)},
                    {"max_iterations", cfg.repair.max_iterations},
                    {"tolerance", cfg.repair.tolerance}};
  root["evaluation"] = cfg.evaluation == RepairedEvaluation::sanitized ? "sanitized" : "poisoned";
  root["seed"] = cfg.seed;
  root["out_dir"] = cfg.out_dir;
  return root.dump(2) + "\n";
}

std::uint64_t dataset_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, 1); }
std::uint64_t train_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, 2); }
std::uint64_t attack_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, 3); }
std::uint64_t detector_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, 4); }

// ---- results -----------------------------------------------------------------

double RunResult::number(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) throw Error(fmt::format("result has no key '{}'", key));
  return std::stod(it->second);
}

std::string RunResult::text() const {
  std::string out;
  for (const auto& [key, value] : values) out += fmt::format("{}={}\n", key, value);
  return out;
}

RunResult RunResult::parse(const std::string& text) {
  RunResult r;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(fmt::format("result line {} is not key=value", line_no));
    r.values[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return r;
}

// ---- artifacts ---------------------------------------------------------------

namespace artifacts {
std::filesystem::path clean_graph(const ExperimentConfig& cfg) { return out_path(cfg, "clean.graph.snap"); }
std::filesystem::path clean_model(const ExperimentConfig& cfg) { return out_path(cfg, "clean.model.snap"); }
std::filesystem::path poisoned_graph(const ExperimentConfig& cfg) { return out_path(cfg, "poisoned.graph.snap"); }
std::filesystem::path record(const ExperimentConfig& cfg) { return out_path(cfg, "record.snap"); }
std::filesystem::path poisoned_model(const ExperimentConfig& cfg) { return out_path(cfg, "poisoned.model.snap"); }
std::filesystem::path detection(const ExperimentConfig& cfg, std::string_view channel) {
  return out_path(cfg, fmt::format("detection.{}.snap", channel));
}
std::filesystem::path subgraph(const ExperimentConfig& cfg) {
  return out_path(cfg, fmt::format("subgraph.{}.snap", scenario_tag(cfg)));
}
std::filesystem::path repaired_model(const ExperimentConfig& cfg) {
  return out_path(cfg, fmt::format("repaired.{}.model.snap", scenario_tag(cfg)));
}
std::filesystem::path validation(const ExperimentConfig& cfg) {
  return out_path(cfg, fmt::format("validation.{}.snap", scenario_tag(cfg)));
}
std::filesystem::path heatmap(const ExperimentConfig& cfg) {
  return out_path(cfg, fmt::format("heatmap.{}.tsv", scenario_tag(cfg)));
}
std::filesystem::path retrained_model(const ExperimentConfig& cfg) { return out_path(cfg, "retrained.model.snap"); }
std::filesystem::path result(const ExperimentConfig& cfg) {
  return out_path(cfg, fmt::format("result.{}.txt", scenario_tag(cfg)));
}
std::filesystem::path timings(const ExperimentConfig& cfg) {
  return out_path(cfg, fmt::format("timings.{}.txt", scenario_tag(cfg)));
}
}  // namespace artifacts

// ---- stages ------------------------------------------------------------------

void stage_train(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  const Graph clean = load_dataset(cfg);
  save_artifact(artifacts::clean_graph(cfg), clean);
  const auto start = std::chrono::steady_clock::now();
  const GcnModel model = train(clean, train_config(cfg));
  save_seconds(timing_path(cfg, "train"), seconds_since(start));
  save_artifact(artifacts::clean_model(cfg), model);
}

void stage_attack(const ExperimentConfig& cfg) {
  const Graph clean = load_graph(artifacts::clean_graph(cfg));
  AttackSpec spec;
  spec.kind = cfg.attack.kind;
  spec.budget = attack_budget(cfg, clean);
  spec.targeting = cfg.attack.targeting;
  spec.seed = attack_seed(cfg);
  spec.injected_nodes = cfg.attack.injected_nodes;
  const PoisonedGraph poisoned = poison(clean, spec);
  const BudgetCheck budget = verify_budget(clean, poisoned.graph, poisoned.record, spec.budget);
  if (!budget.ok) {
    throw Error(fmt::format("poisoned graph disagrees with its record: {}",
                            budget.issues.empty() ? "budget exceeded" : budget.issues.front()));
  }
  save_artifact(artifacts::poisoned_graph(cfg), poisoned.graph);
  save_artifact(artifacts::record(cfg), poisoned.record);
  const auto start = std::chrono::steady_clock::now();
  const GcnModel model = train(poisoned.graph, train_config(cfg));
  save_seconds(timing_path(cfg, "attack"), seconds_since(start));
  save_artifact(artifacts::poisoned_model(cfg), model);
}

void stage_detect(const ExperimentConfig& cfg) {
  if (cfg.scenario == Scenario::k_unlearn) return;
  const Graph g = load_graph(artifacts::poisoned_graph(cfg));
  const Channels channels = channels_for(cfg.attack.kind);
  const DetectorConfig& d = cfg.detectors;
  if (channels.injection) {
    BwgnnOptions options = d.bwgnn;
    options.seed = detector_seed(cfg);
    const BetaFilterBank bank = build_filter_bank(laplacian(g), d.filter_order);
    save_artifact(artifacts::detection(cfg, "injection"), bwgnn_score(g, bank, options));
  }
  if (channels.feature) {
    save_artifact(artifacts::detection(cfg, "feature"), jaccard_score(g, d.jaccard_r, d.jaccard_p));
  }
  if (channels.structure) {
    const SimRankResult sim = simrank(g, d.simrank_iterations, d.simrank_tolerance);
    const double tau = d.simrank_tau.value_or(edge_similarity_percentile(g, sim.similarity, d.simrank_percentile));
    DetectionReport report = simrank_edge_score(g, sim.similarity, tau);
    report.thresholds["iterations"] = sim.iterations;
    save_artifact(artifacts::detection(cfg, "structure"), report);
  }
}

void stage_build(const ExperimentConfig& cfg) {
  const Graph g = load_graph(artifacts::poisoned_graph(cfg));
  BuildRequest request;
  request.scenario = cfg.scenario;
  request.kind = cfg.attack.kind;
  request.hops = cfg.hops;
  if (cfg.scenario == Scenario::k_unlearn) {
    request.record = load_record(artifacts::record(cfg));
  } else {
    const Channels channels = channels_for(cfg.attack.kind);
    if (channels.injection) request.detections.injection = load_detection(artifacts::detection(cfg, "injection"));
    if (channels.feature) request.detections.feature = load_detection(artifacts::detection(cfg, "feature"));
    if (channels.structure) request.detections.structure = load_detection(artifacts::detection(cfg, "structure"));
    if (cfg.scenario == Scenario::kn_unlearn) {
      request.ratios = cfg.ratios ? *cfg.ratios : ratios_from_record(load_record(artifacts::record(cfg)), g);
    }
  }
  save_artifact(artifacts::subgraph(cfg), build(g, request));
}

void stage_repair(const ExperimentConfig& cfg) {
  const GcnModel poisoned = load_model(artifacts::poisoned_model(cfg));
  const FineTunedSubgraph sub = load_subgraph(artifacts::subgraph(cfg));
  const RepairResult result = repair(poisoned, sub, repair_config(cfg));
  save_artifact(artifacts::repaired_model(cfg), result.model);
  Snapshot log("repair_log");
  log.put("rounds_run", std::vector<std::uint64_t>{static_cast<std::uint64_t>(result.rounds_run)});
  log.put("losses", result.losses);
  log.save(repair_log_path(cfg));
  save_seconds(timing_path(cfg, "repair." + scenario_tag(cfg)), result.seconds);
}

void stage_validate(const ExperimentConfig& cfg) {
  const Graph g = load_graph(artifacts::poisoned_graph(cfg));
  const GcnModel poisoned = load_model(artifacts::poisoned_model(cfg));
  const GcnModel repaired = load_model(artifacts::repaired_model(cfg));
  const FineTunedSubgraph sub = load_subgraph(artifacts::subgraph(cfg));
  const ValidationReport report = validate(poisoned, repaired, g, anomalies_of(sub.provenance));
  save_artifact(artifacts::validation(cfg), report);
  std::ofstream tsv(artifacts::heatmap(cfg), std::ios::trunc);
  if (!tsv) throw Error(fmt::format("cannot write {}", artifacts::heatmap(cfg).string()));
  write_heatmap_tsv(influence_heatmap(report, g.num_classes), tsv);
}

PipelineOutput stage_evaluate(const ExperimentConfig& cfg) {
  const Graph poisoned = load_graph(artifacts::poisoned_graph(cfg));
  const PerturbationRecord record = load_record(artifacts::record(cfg));
  const RetrainResult retrained = retrain_baseline(poisoned, record, train_config(cfg));
  save_artifact(artifacts::retrained_model(cfg), retrained.model);
  save_seconds(timing_path(cfg, "retrain"), retrained.seconds);

  PipelineOutput out;
  out.result = compute_result(cfg);
  out.timings = collect_timings(cfg);
  write_text(artifacts::result(cfg), out.result.text());
  write_text(artifacts::timings(cfg),
             fmt::format("clean_train_seconds={}\npoisoned_train_seconds={}\nrepair_seconds={}\nretrain_seconds={}\n",
                         number(out.timings.clean_train), number(out.timings.poisoned_train),
                         number(out.timings.repair), number(out.timings.retrain)));
  return out;
}

StageError::StageError(std::string stage, const std::string& message)
    : std::runtime_error(fmt::format("stage {} failed: {}", stage, message)), stage_(std::move(stage)) {}

void run_stage(const std::string& stage, const ExperimentConfig& cfg) {
  try {
    if (stage == "train") {
      stage_train(cfg);
    } else if (stage == "attack") {
      stage_attack(cfg);
    } else if (stage == "detect") {
      stage_detect(cfg);
    } else if (stage == "build") {
      stage_build(cfg);
    } else if (stage == "repair") {
      stage_repair(cfg);
    } else if (stage == "validate") {
      stage_validate(cfg);
    } else if (stage == "evaluate") {
      stage_evaluate(cfg);
    } else {
      throw Error(fmt::format("unknown stage '{}'", stage));
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

PipelineOutput run_pipeline(const ExperimentConfig& cfg) {
  for (const char* stage : {"train", "attack", "detect", "build", "repair", "validate"}) run_stage(stage, cfg);
  try {
    return stage_evaluate(cfg);
  } catch (const std::exception& e) {
    throw StageError("evaluate", e.what());
  }
}

std::vector<PipelineOutput> run_sweep(const ExperimentConfig& cfg, const std::vector<Scenario>& scenarios) {
  run_stage("train", cfg);
  run_stage("attack", cfg);
  bool detected = false;
  std::vector<PipelineOutput> outputs;
  for (Scenario s : scenarios) {
    ExperimentConfig local = cfg;
    local.scenario = s;
    if (s != Scenario::k_unlearn && !detected) {
      run_stage("detect", local);
      detected = true;
    }
    for (const char* stage : {"build", "repair", "validate"}) run_stage(stage, local);
    try {
      outputs.push_back(stage_evaluate(local));
    } catch (const std::exception& e) {
      throw StageError("evaluate", e.what());
    }
  }
  return outputs;
}

RunResult replay(const ExperimentConfig& cfg) { return compute_result(cfg); }

DetectionQuality detection_quality(const AnomalySets& selected, const PerturbationRecord& record) {
  std::set<NodeId> true_nodes(record.injected_nodes.begin(), record.injected_nodes.end());
  for (const auto& [node, bits] : record.feature_modified) true_nodes.insert(node);
  const std::set<Edge> true_edges(record.added_edges.begin(), record.added_edges.end());
  std::set<NodeId> chosen_nodes(selected.injected.begin(), selected.injected.end());
  chosen_nodes.insert(selected.feature_modified.begin(), selected.feature_modified.end());
  std::set<Edge> chosen_edges;
  for (const Edge& e : selected.edges) chosen_edges.insert(Edge::make(e.u, e.v));

  std::size_t hits = 0;
  for (NodeId v : chosen_nodes) hits += true_nodes.count(v);
  for (const Edge& e : chosen_edges) hits += true_edges.count(e);
  const std::size_t chosen = chosen_nodes.size() + chosen_edges.size();
  const std::size_t truth = true_nodes.size() + true_edges.size();
  DetectionQuality q;
  q.precision = chosen == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(chosen);
  q.recall = truth == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(truth);
  return q;
}

DetectionQuality detection_quality(const DetectionReport& report, const PerturbationRecord& record) {
  AnomalySets sets;
  sets.feature_modified = report.selected_nodes;
  sets.edges = report.selected_edges;
  return detection_quality(sets, record);
}

std::vector<TimingRow> timing_report(const std::vector<PipelineOutput>& outputs) {
  std::vector<TimingRow> rows;
  for (const auto& o : outputs) {
    auto value = [&](const char* key) {
      const auto it = o.result.values.find(key);
      return it == o.result.values.end() ? std::string("?") : it->second;
    };
    rows.push_back({value("dataset"), value("attack.kind"), value("scenario"), o.timings.repair, o.timings.retrain});
  }
  return rows;
}

std::string format_timing_table(const std::vector<TimingRow>& rows) {
  if (rows.empty()) return {};
  std::string out = fmt::format("{:<8} {:<24} {:<8} {:>12} {:>12}\n", "dataset", "attack", "scenario",
                                "repair_s", "retrain_s");
  for (const auto& r : rows) {
    out += fmt::format("{:<8} {:<24} {:<8} {:>12.6f} {:>12.6f}\n", r.dataset, r.attack, r.scenario,
                       r.repair_seconds, r.retrain_seconds);
  }
  return out;
}

std::string format_summary(const RunResult& result) {
  std::string out = fmt::format("{:<12} {:>9} {:>9} {:>9} {:>9}\n", "model", "accuracy", "precision", "recall", "f1");
  for (const char* model : {"clean", "poisoned", "repaired", "retrained"}) {
    out += fmt::format("{:<12} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f}\n", model,
                       result.number(fmt::format("{}.accuracy", model)),
                       result.number(fmt::format("{}.precision", model)),
                       result.number(fmt::format("{}.recall", model)),
                       result.number(fmt::format("{}.f1", model)));
  }
  out += fmt::format("scenario {}  attack {}  detection P/R {:.4f}/{:.4f}  validation {:.4f}\n",
                     result.values.at("scenario"), result.values.at("attack.kind"),
                     result.number("detection.precision"), result.number("detection.recall"),
                     result.number("validation.effective_fraction"));
  return out;
}

}  // namespace graphmu
