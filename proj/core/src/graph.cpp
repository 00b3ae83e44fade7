#include "graphmu/graph.hpp"

#include "graphmu/error.hpp"
#include "graphmu/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace graphmu {

Adjacency Adjacency::from_edges(std::size_t node_count, std::span<const Edge> edges) {
  std::vector<std::vector<NodeId>> lists(node_count);
  for (const Edge& e : edges) {
    if (e.u >= node_count || e.v >= node_count) {
      throw Error(fmt::format("edge ({}, {}) out of range for {} nodes", e.u, e.v, node_count));
    }
    if (e.u == e.v) continue;
    lists[e.u].push_back(e.v);
    lists[e.v].push_back(e.u);
  }
  Adjacency adj;
  adj.offsets_.assign(node_count + 1, 0);
  for (std::size_t v = 0; v < node_count; ++v) {
    auto& list = lists[v];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    adj.offsets_[v + 1] = adj.offsets_[v] + list.size();
  }
  adj.indices_.reserve(adj.offsets_.back());
  for (const auto& list : lists) adj.indices_.insert(adj.indices_.end(), list.begin(), list.end());
  return adj;
}

Adjacency Adjacency::from_csr(std::vector<std::uint64_t> offsets, std::vector<NodeId> indices) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != indices.size()) {
    throw Error("malformed CSR offsets");
  }
  Adjacency adj;
  adj.offsets_ = std::move(offsets);
  adj.indices_ = std::move(indices);
  const std::size_t n = adj.node_count();
  for (std::size_t v = 0; v < n; ++v) {
    if (adj.offsets_[v + 1] < adj.offsets_[v]) throw Error("CSR offsets not monotone");
    auto list = adj.neighbors(static_cast<NodeId>(v));
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i] >= n) throw Error(fmt::format("CSR neighbor {} out of range", list[i]));
      if (list[i] == v) throw Error(fmt::format("self-loop stored at node {}", v));
      if (i > 0 && list[i] <= list[i - 1]) throw Error("CSR neighbor lists must be strictly sorted");
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    for (NodeId u : adj.neighbors(static_cast<NodeId>(v))) {
      if (!adj.has_edge(u, static_cast<NodeId>(v))) {
        throw Error(fmt::format("adjacency not symmetric at ({}, {})", v, u));
      }
    }
  }
  return adj;
}

bool Adjacency::has_edge(NodeId a, NodeId b) const {
  if (a >= node_count() || b >= node_count()) return false;
  auto list = neighbors(a);
  return std::binary_search(list.begin(), list.end(), b);
}

std::vector<Edge> Adjacency::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count());
  for (NodeId v = 0; v < node_count(); ++v) {
    for (NodeId u : neighbors(v)) {
      if (v < u) out.push_back({v, u});
    }
  }
  return out;
}

Mask Graph::mask(Split which) const {
  Mask m(split.size(), false);
  for (std::size_t i = 0; i < split.size(); ++i) m[i] = split[i] == which;
  return m;
}

void Graph::validate() const {
  const std::size_t n = node_count();
  if (static_cast<std::size_t>(features.rows()) != n) {
    throw Error(fmt::format("feature rows {} != node count {}", features.rows(), n));
  }
  if (labels.size() != n || split.size() != n || ids.size() != n) {
    throw Error("labels, split and ids must have one entry per node");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw Error(fmt::format("label {} of node {} outside [0, {})", labels[i], i, num_classes));
    }
  }
  for (NodeId v = 0; v < n; ++v) {
    for (NodeId u : adjacency.neighbors(v)) {
      if (u == v) throw Error(fmt::format("self-loop stored at node {}", v));
      if (!adjacency.has_edge(u, v)) throw Error(fmt::format("asymmetric edge ({}, {})", v, u));
    }
  }
}

bool Graph::operator==(const Graph& other) const {
  return adjacency == other.adjacency && features.rows() == other.features.rows() &&
         features.cols() == other.features.cols() && features == other.features &&
         labels == other.labels && num_classes == other.num_classes && split == other.split &&
         ids == other.ids;
}

NormalizedAdjacency normalize(const Adjacency& adjacency) {
  const std::size_t n = adjacency.node_count();
  if (n == 0) throw Error("cannot normalize an empty graph");
  NormalizedAdjacency out;
  out.degree.resize(static_cast<Eigen::Index>(n));
  for (NodeId v = 0; v < n; ++v) out.degree[v] = static_cast<double>(adjacency.degree(v) + 1);

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(n + 2 * adjacency.edge_count());
  for (NodeId v = 0; v < n; ++v) {
    const double dv = out.degree[v];
    entries.emplace_back(v, v, 1.0 / std::sqrt(dv * dv));
    for (NodeId u : adjacency.neighbors(v)) {
      entries.emplace_back(v, u, 1.0 / std::sqrt(dv * out.degree[u]));
    }
  }
  out.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.matrix.setFromTriplets(entries.begin(), entries.end());
  out.matrix.makeCompressed();
  return out;
}

NormalizedAdjacency normalize(const Graph& g) { return normalize(g.adjacency); }

Laplacian laplacian(const Graph& g) {
  const NormalizedAdjacency norm = normalize(g);
  Laplacian out;
  out.matrix = norm.matrix;
  for (Eigen::Index r = 0; r < out.matrix.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(out.matrix, r); it; ++it) {
      it.valueRef() = (it.row() == it.col() ? 1.0 : 0.0) - it.value();
    }
  }
  return out;
}

std::vector<NodeId> k_hop_neighbors(const Adjacency& adjacency, NodeId v, int hops) {
  if (v >= adjacency.node_count()) {
    throw Error(fmt::format("node {} out of range for {} nodes", v, adjacency.node_count()));
  }
  if (hops < 1) throw Error("hop count must be at least 1");
  std::vector<int> dist(adjacency.node_count(), -1);
  std::vector<NodeId> frontier{v};
  std::vector<NodeId> reached;
  dist[v] = 0;
  for (int depth = 1; depth <= hops && !frontier.empty(); ++depth) {
    std::vector<NodeId> next;
    for (NodeId x : frontier) {
      for (NodeId y : adjacency.neighbors(x)) {
        if (dist[y] < 0) {
          dist[y] = depth;
          next.push_back(y);
          reached.push_back(y);
        }
      }
    }
    frontier = std::move(next);
  }
  std::sort(reached.begin(), reached.end());
  return reached;
}

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(fmt::format("{} = {} outside [0, 1]", name, p));
}

// Splits each class 10/10/80 (train/val/test) after a seeded shuffle.
std::vector<Split> split_per_class(const std::vector<int>& labels, int num_classes, Rng& rng) {
  std::vector<Split> split(labels.size(), Split::test);
  for (int c = 0; c < num_classes; ++c) {
    std::vector<NodeId> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(static_cast<NodeId>(i));
    }
    rng.shuffle(std::span<NodeId>(members));
    const auto tenth = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(members.size())));
    const std::size_t train = std::max<std::size_t>(1, tenth);
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (i < train) {
        split[members[i]] = Split::train;
      } else if (i < train + tenth) {
        split[members[i]] = Split::val;
      }
    }
  }
  return split;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string token;
  while (in >> token) fields.push_back(token);
  return fields;
}

}  // namespace

Graph generate_sbm(const SbmSpec& spec) {
  check_probability(spec.p_in, "p_in");
  check_probability(spec.p_out, "p_out");
  check_probability(spec.prototype_density, "prototype_density");
  check_probability(spec.keep_probability, "keep_probability");
  check_probability(spec.noise_probability, "noise_probability");
  if (!(spec.p_in > spec.p_out)) throw Error("p_in must exceed p_out");
  if (spec.per_block < 2) throw Error("per_block must be at least 2");
  if (spec.blocks < 1) throw Error("blocks must be at least 1");
  if (spec.feature_dim < 1) throw Error("feature_dim must be at least 1");

  Rng rng(spec.seed);
  const std::size_t n = static_cast<std::size_t>(spec.blocks) * spec.per_block;
  Graph g;
  g.num_classes = spec.blocks;
  g.labels.resize(n);
  g.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.labels[i] = static_cast<int>(i / spec.per_block);
    g.ids[i] = fmt::format("n{}", i);
  }

  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) {
      const double p = g.labels[i] == g.labels[j] ? spec.p_in : spec.p_out;
      if (rng.bernoulli(p)) edges.push_back({i, j});
    }
  }
  g.adjacency = Adjacency::from_edges(n, edges);

  const int d = spec.feature_dim;
  const int prototype_bits =
      std::max(1, static_cast<int>(std::lround(spec.prototype_density * d)));
  std::vector<std::vector<bool>> prototypes(spec.blocks, std::vector<bool>(d, false));
  for (auto& proto : prototypes) {
    std::vector<int> dims(d);
    for (int k = 0; k < d; ++k) dims[k] = k;
    rng.shuffle(std::span<int>(dims));
    for (int k = 0; k < prototype_bits; ++k) proto[dims[k]] = true;
  }
  g.features = Matrix::Zero(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& proto = prototypes[g.labels[i]];
    for (int k = 0; k < d; ++k) {
      const bool on = proto[k] ? rng.bernoulli(spec.keep_probability)
                               : rng.bernoulli(spec.noise_probability);
      g.features(static_cast<Eigen::Index>(i), k) = on ? 1.0 : 0.0;
    }
  }
  g.split = split_per_class(g.labels, g.num_classes, rng);
  return g;
}

Adjacency random_regular_graph(std::size_t n, std::size_t degree, std::uint64_t seed) {
  if (degree >= n || (n * degree) % 2 != 0) {
    throw Error(fmt::format("no simple {}-regular graph on {} nodes", degree, n));
  }
  Rng rng(seed);
  // Pairs random stubs one at a time, rejecting only the offending pair and
  // restarting when no valid pair is found within a bounded number of draws.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<NodeId> stubs;
    for (NodeId v = 0; v < n; ++v) stubs.insert(stubs.end(), degree, v);
    std::set<Edge> edges;
    std::size_t misses = 0;
    while (!stubs.empty() && misses < 100 * stubs.size()) {
      const std::size_t i = rng.below(stubs.size());
      const std::size_t j = rng.below(stubs.size());
      const NodeId a = stubs[i];
      const NodeId b = stubs[j];
      if (i == j || a == b || edges.count(Edge::make(a, b))) {
        ++misses;
        continue;
      }
      misses = 0;
      edges.insert(Edge::make(a, b));
      stubs[std::max(i, j)] = stubs.back();
      stubs.pop_back();
      stubs[std::min(i, j)] = stubs.back();
      stubs.pop_back();
    }
    if (stubs.empty()) {
      const std::vector<Edge> list(edges.begin(), edges.end());
      return Adjacency::from_edges(n, list);
    }
  }
  throw Error(fmt::format("failed to sample a {}-regular graph on {} nodes", degree, n));
}

Graph load_cora_format(const std::filesystem::path& content_path,
                       const std::filesystem::path& cites_path, const CoraLoadOptions& options,
                       CoraLoadStats* stats) {
  std::ifstream content(content_path);
  if (!content) throw Error(fmt::format("cannot open {}", content_path.string()));
  std::ifstream cites(cites_path);
  if (!cites) throw Error(fmt::format("cannot open {}", cites_path.string()));

  std::vector<std::string> ids;
  std::vector<std::string> label_names;
  std::vector<std::vector<double>> rows;
  std::unordered_map<std::string, NodeId> index;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(content, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) throw Error(fmt::format("{}:{}: too few fields", content_path.string(), line_no));
    const std::size_t d = fields.size() - 2;
    if (rows.empty()) {
      width = d;
    } else if (d != width) {
      throw Error(fmt::format("{}:{}: expected {} features, found {}", content_path.string(),
                              line_no, width, d));
    }
    if (!index.emplace(fields.front(), static_cast<NodeId>(ids.size())).second) {
      throw Error(fmt::format("{}:{}: duplicate node id '{}'", content_path.string(), line_no,
                              fields.front()));
    }
    std::vector<double> row(d);
    for (std::size_t k = 0; k < d; ++k) row[k] = std::stod(fields[k + 1]);
    rows.push_back(std::move(row));
    ids.push_back(fields.front());
    label_names.push_back(fields.back());
  }
  if (ids.empty()) throw Error("no nodes");

  std::vector<std::string> classes = label_names;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  CoraLoadStats local;
  std::vector<Edge> edges;
  line_no = 0;
  while (std::getline(cites, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) throw Error(fmt::format("{}:{}: expected two ids", cites_path.string(), line_no));
    ++local.cite_lines;
    auto a = index.find(fields[0]);
    auto b = index.find(fields[1]);
    if (a == index.end() || b == index.end()) {
      if (options.skip_unknown_ids) {
        ++local.skipped_lines;
        continue;
      }
      throw Error(fmt::format("{}:{}: unknown node id '{}'", cites_path.string(), line_no,
                              a == index.end() ? fields[0] : fields[1]));
    }
    if (a->second == b->second) {
      ++local.self_cites;
      continue;
    }
    edges.push_back(Edge::make(a->second, b->second));
  }

  const std::size_t n = ids.size();
  Graph g;
  g.adjacency = Adjacency::from_edges(n, edges);
  local.duplicate_edges = edges.size() - g.adjacency.edge_count();
  g.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < width; ++k) {
      g.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  g.num_classes = static_cast<int>(classes.size());
  g.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.labels[i] = static_cast<int>(
        std::lower_bound(classes.begin(), classes.end(), label_names[i]) - classes.begin());
  }
  g.ids = std::move(ids);

  // Public split: a fixed number of train nodes per class, then val/test
  // drawn from the remaining nodes, all from one seeded permutation.
  Rng rng(options.split_seed);
  std::vector<NodeId> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeId>(i);
  rng.shuffle(std::span<NodeId>(order));
  g.split.assign(n, Split::none);
  std::vector<int> taken(g.num_classes, 0);
  for (NodeId v : order) {
    if (taken[g.labels[v]] < options.train_per_class) {
      g.split[v] = Split::train;
      ++taken[g.labels[v]];
    }
  }
  int val = 0;
  int test = 0;
  for (NodeId v : order) {
    if (g.split[v] != Split::none) continue;
    if (val < options.val_count) {
      g.split[v] = Split::val;
      ++val;
    } else if (test < options.test_count) {
      g.split[v] = Split::test;
      ++test;
    }
  }
  if (stats != nullptr) *stats = local;
  return g;
}

}  // namespace graphmu
