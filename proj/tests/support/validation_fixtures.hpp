#pragma once

// Branch fixtures for the influence-reduction checks: poisoned node 0 with a
// single neighbor 1, three classes. Node 0 is predicted class 0 before repair.

#include "graphmu/graph.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace graphmu::fixtures {

struct ValidationCase {
  std::string name;
  Matrix before;
  Matrix after;
  bool expected_effective;
};

inline void PrintTo(const ValidationCase& c, std::ostream* os) { *os << c.name; }

inline Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), 3);
  Eigen::Index r = 0;
  for (const auto& row : values) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

inline std::vector<ValidationCase> validation_cases() {
  return {
      {"same_class_drop", rows({{0.6, 0.3, 0.1}, {0.7, 0.2, 0.1}}), rows({{0.6, 0.3, 0.1}, {0.5, 0.3, 0.2}}), true},
      {"same_class_rise", rows({{0.6, 0.3, 0.1}, {0.5, 0.3, 0.2}}), rows({{0.6, 0.3, 0.1}, {0.7, 0.2, 0.1}}), false},
      {"diff_class_k2_rise", rows({{0.6, 0.3, 0.1}, {0.2, 0.7, 0.1}}), rows({{0.6, 0.3, 0.1}, {0.2, 0.75, 0.05}}), true},
      {"diff_class_k1_drop", rows({{0.6, 0.3, 0.1}, {0.3, 0.6, 0.1}}), rows({{0.6, 0.3, 0.1}, {0.2, 0.5, 0.3}}), true},
      {"no_change", rows({{0.6, 0.3, 0.1}, {0.2, 0.7, 0.1}}), rows({{0.6, 0.3, 0.1}, {0.2, 0.7, 0.1}}), false},
      {"diff_class_neither", rows({{0.6, 0.3, 0.1}, {0.2, 0.7, 0.1}}), rows({{0.6, 0.3, 0.1}, {0.3, 0.6, 0.1}}), false},
  };
}

inline Adjacency single_edge() {
  const std::vector<Edge> edges{{0, 1}};
  return Adjacency::from_edges(2, edges);
}

}  // namespace graphmu::fixtures
