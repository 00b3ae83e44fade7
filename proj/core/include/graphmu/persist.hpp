#pragma once

#include "graphmu/attack.hpp"
#include "graphmu/detectors.hpp"
#include "graphmu/gcn.hpp"
#include "graphmu/snapshot.hpp"
#include "graphmu/subgraph.hpp"
#include "graphmu/validation.hpp"

namespace graphmu {

// Snapshot kinds: "graph", "model", "record", "detection", "subgraph", "validation".

Snapshot to_snapshot(const Graph& g);
Snapshot to_snapshot(const GcnModel& model);
Snapshot to_snapshot(const PerturbationRecord& record);
Snapshot to_snapshot(const DetectionReport& report);
Snapshot to_snapshot(const FineTunedSubgraph& sub);
Snapshot to_snapshot(const ValidationReport& report);

Graph graph_from(const Snapshot& snap);
GcnModel model_from(const Snapshot& snap);
PerturbationRecord record_from(const Snapshot& snap);
DetectionReport detection_from(const Snapshot& snap);
FineTunedSubgraph subgraph_from(const Snapshot& snap);
ValidationReport validation_from(const Snapshot& snap);

template <typename T>
void save_artifact(const std::filesystem::path& path, const T& value) {
  to_snapshot(value).save(path);
}

inline Graph load_graph(const std::filesystem::path& p) { return graph_from(Snapshot::load(p, "graph")); }
inline GcnModel load_model(const std::filesystem::path& p) { return model_from(Snapshot::load(p, "model")); }
inline PerturbationRecord load_record(const std::filesystem::path& p) {
  return record_from(Snapshot::load(p, "record"));
}
inline DetectionReport load_detection(const std::filesystem::path& p) {
  return detection_from(Snapshot::load(p, "detection"));
}
inline FineTunedSubgraph load_subgraph(const std::filesystem::path& p) {
  return subgraph_from(Snapshot::load(p, "subgraph"));
}
inline ValidationReport load_validation(const std::filesystem::path& p) {
  return validation_from(Snapshot::load(p, "validation"));
}

}  // namespace graphmu
