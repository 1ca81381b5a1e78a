#include "dcgnn/graph.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "dcgnn/errors.hpp"

namespace dcgnn {

using nlohmann::json;

std::vector<int> UndirectedGraph::nodes_in_split(const std::vector<std::uint8_t>& mask) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(mask.size()); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

UndirectedGraph UndirectedGraph::build(int n, std::vector<std::pair<int, int>> raw_edges,
                                       bool strict) {
  if (n < 0) throw DomainError("negative node count");
  UndirectedGraph g;
  g.n = n;
  for (auto& [u, v] : raw_edges) {
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw DomainError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                        ") out of range for n=" + std::to_string(n));
    if (u == v) {
      if (strict)
        throw DomainError("self-loop at node " + std::to_string(u));
      continue;  // dropped
    }
    if (u > v) std::swap(u, v);
  }
  std::erase_if(raw_edges, [](const auto& e) { return e.first == e.second; });
  std::sort(raw_edges.begin(), raw_edges.end());
  auto dup = std::unique(raw_edges.begin(), raw_edges.end());
  if (strict && dup != raw_edges.end()) {
    throw DomainError("duplicate edge (" + std::to_string(dup->first) + "," +
                      std::to_string(dup->second) + ")");
  }
  raw_edges.erase(dup, raw_edges.end());
  g.edges = std::move(raw_edges);
  g.adj.assign(n, {});
  for (auto [u, v] : g.edges) {
    g.adj[u].push_back(v);
    g.adj[v].push_back(u);
  }
  for (auto& nbrs : g.adj) std::sort(nbrs.begin(), nbrs.end());
  return g;
}

void UndirectedGraph::validate() const {
  if (n < 0) throw DomainError("negative node count");
  if (static_cast<int>(adj.size()) != n) throw DomainError("adjacency size mismatch");
  int prev_u = -1, prev_v = -1;
  for (auto [u, v] : edges) {
    if (u < 0 || v >= n || u >= v) throw DomainError("non-canonical edge list");
    if (u < prev_u || (u == prev_u && v <= prev_v)) throw DomainError("edge list not sorted/unique");
    prev_u = u;
    prev_v = v;
  }
  if (features.rows() != 0 && features.rows() != n)
    throw DomainError("feature row count " + std::to_string(features.rows()) +
                      " does not match node count " + std::to_string(n));
  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != n) throw DomainError("label count mismatch");
    for (int l : labels)
      if (l < -1 || l >= num_classes) throw DomainError("label out of range");
  }
  for (const auto* m : {&train_mask, &valid_mask, &test_mask})
    if (!m->empty() && static_cast<int>(m->size()) != n) throw DomainError("split mask size mismatch");
  if (!train_mask.empty() && !valid_mask.empty() && !test_mask.empty()) {
    for (int i = 0; i < n; ++i)
      if (train_mask[i] + valid_mask[i] + test_mask[i] > 1)
        throw DomainError("node " + std::to_string(i) + " appears in more than one split");
  }
}

BipartiteClusterGraph build_bipartite(const UndirectedGraph& g, int n_global, int n_local) {
  if (n_global < 1 || n_local < 1) throw DomainError("cluster counts must be at least 1");
  BipartiteClusterGraph bip;
  bip.n = g.n;
  bip.n_global = n_global;
  bip.n_local = n_local;
  bip.ego.resize(g.n);
  for (int i = 0; i < g.n; ++i) {
    bip.ego[i].reserve(g.adj[i].size() + 1);
    bip.ego[i].push_back(i);  // the node itself first, then neighbors ascending
    bip.ego[i].insert(bip.ego[i].end(), g.adj[i].begin(), g.adj[i].end());
  }
  return bip;
}

Mat broadcast_local(const Mat& m, int u, const BipartiteClusterGraph& bip) {
  if (u < 0 || u >= bip.n) throw DomainError("node index out of range");
  if (m.rows() != bip.ego_size(u)) throw ShapeError("row count does not match |N_u+|");
  Mat out = Mat::Zero(bip.n, m.cols());
  for (int k = 0; k < m.rows(); ++k) out.row(bip.ego[u][k]) = m.row(k);
  return out;
}

UndirectedGraph augment_with_clusters(const UndirectedGraph& g, int n_global, int n_local) {
  if (n_global < 0 || n_local < 0) throw DomainError("cluster counts must be nonnegative");
  const int n = g.n;
  const int total = n + n_global + n * n_local;
  std::vector<std::pair<int, int>> edges = g.edges;
  for (int c = 0; c < n_global; ++c)
    for (int v = 0; v < n; ++v) edges.emplace_back(v, n + c);
  const int local_base = n + n_global;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n_local; ++k) {
      int cluster = local_base + i * n_local + k;
      edges.emplace_back(i, cluster);
      for (int nb : g.adj[i]) edges.emplace_back(nb, cluster);
    }
  }
  return UndirectedGraph::build(total, std::move(edges));
}

// io -----------------------------------------------------------------------

namespace {

void finalize_labels(UndirectedGraph& g) {
  if (g.labels.empty()) return;
  int mx = -1;
  for (int l : g.labels) mx = std::max(mx, l);
  g.num_classes = mx + 1;
}

std::vector<std::uint8_t> mask_from_indices(const json& arr, int n, const std::string& what) {
  std::vector<std::uint8_t> mask(n, 0);
  for (const auto& v : arr) {
    int idx = v.get<int>();
    if (idx < 0 || idx >= n) throw DomainError(what + " split index " + std::to_string(idx) + " out of range");
    mask[idx] = 1;
  }
  return mask;
}

void apply_splits_json(UndirectedGraph& g, const json& splits) {
  if (splits.contains("train")) g.train_mask = mask_from_indices(splits["train"], g.n, "train");
  if (splits.contains("valid")) g.valid_mask = mask_from_indices(splits["valid"], g.n, "valid");
  if (splits.contains("test")) g.test_mask = mask_from_indices(splits["test"], g.n, "test");
}

}  // namespace

UndirectedGraph load_graph_json(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  if (!doc.contains("n") || !doc.contains("edges")) throw IoError(path + ": missing n or edges");
  int n = doc["n"].get<int>();
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : doc["edges"]) {
    if (!e.is_array() || e.size() != 2) throw IoError(path + ": edges must be [u,v] pairs");
    edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  UndirectedGraph g = UndirectedGraph::build(n, std::move(edges), strict);
  if (doc.contains("features") && !doc["features"].is_null()) {
    const auto& rows = doc["features"];
    if (static_cast<int>(rows.size()) != n) throw IoError(path + ": feature row count mismatch");
    int d = rows.empty() ? 0 : static_cast<int>(rows[0].size());
    g.features.resize(n, d);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows[i].size()) != d) throw IoError(path + ": ragged feature rows");
      for (int j = 0; j < d; ++j) g.features(i, j) = rows[i][j].get<double>();
    }
  }
  if (doc.contains("labels") && !doc["labels"].is_null()) {
    const auto& ls = doc["labels"];
    if (static_cast<int>(ls.size()) != n) throw IoError(path + ": label count mismatch");
    g.labels.reserve(n);
    for (const auto& l : ls) g.labels.push_back(l.is_null() ? -1 : l.get<int>());
    finalize_labels(g);
  }
  if (doc.contains("splits") && !doc["splits"].is_null()) apply_splits_json(g, doc["splits"]);
  g.validate();
  return g;
}

void save_graph_json(const UndirectedGraph& g, const std::string& path) {
  json doc;
  doc["n"] = g.n;
  json edges = json::array();
  for (auto [u, v] : g.edges) edges.push_back({u, v});
  doc["edges"] = std::move(edges);
  if (g.has_features()) {
    json rows = json::array();
    for (int i = 0; i < g.n; ++i) {
      json row = json::array();
      for (int j = 0; j < g.features.cols(); ++j) row.push_back(g.features(i, j));
      rows.push_back(std::move(row));
    }
    doc["features"] = std::move(rows);
  }
  if (g.has_labels()) doc["labels"] = g.labels;
  auto indices_of = [](const std::vector<std::uint8_t>& mask) {
    json arr = json::array();
    for (size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) arr.push_back(i);
    return arr;
  };
  if (!g.train_mask.empty() || !g.valid_mask.empty() || !g.test_mask.empty()) {
    json splits;
    splits["train"] = indices_of(g.train_mask);
    splits["valid"] = indices_of(g.valid_mask);
    splits["test"] = indices_of(g.test_mask);
    doc["splits"] = std::move(splits);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << doc.dump(2) << "\n";
}

namespace {

// splits a line into trimmed comma-separated fields
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    size_t a = cur.find_first_not_of(" \t\r");
    size_t b = cur.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : cur.substr(a, b - a + 1));
  }
  return out;
}

int parse_int(const std::string& s, const std::string& path, int line) {
  try {
    size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ":" + std::to_string(line) + ": expected integer, got '" + s + "'");
  }
}

double parse_double(const std::string& s, const std::string& path, int line) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ":" + std::to_string(line) + ": expected number, got '" + s + "'");
  }
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

UndirectedGraph load_graph_csv(const std::string& edges_path, const std::string& features_path,
                               const std::string& labels_path, const std::string& splits_path,
                               bool strict) {
  std::ifstream in(edges_path);
  if (!in) throw IoError("cannot open " + edges_path);
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int lineno = 0;
  int max_node = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    auto fields = split_csv(line);
    if (fields.size() != 2)
      throw IoError(edges_path + ":" + std::to_string(lineno) + ": expected 'u,v'");
    int u = parse_int(fields[0], edges_path, lineno);
    int v = parse_int(fields[1], edges_path, lineno);
    if (u < 0 || v < 0)
      throw IoError(edges_path + ":" + std::to_string(lineno) + ": negative node id");
    edges.emplace_back(u, v);
    max_node = std::max({max_node, u, v});
  }

  Mat features(0, 0);
  int n = max_node + 1;
  if (!features_path.empty()) {
    std::ifstream fin(features_path);
    if (!fin) throw IoError("cannot open " + features_path);
    std::vector<std::vector<double>> rows;
    lineno = 0;
    while (std::getline(fin, line)) {
      ++lineno;
      if (blank(line)) continue;
      auto fields = split_csv(line);
      std::vector<double> row;
      row.reserve(fields.size());
      for (const auto& f : fields) row.push_back(parse_double(f, features_path, lineno));
      if (!rows.empty() && rows[0].size() != row.size())
        throw IoError(features_path + ":" + std::to_string(lineno) + ": inconsistent column count");
      rows.push_back(std::move(row));
    }
    if (static_cast<int>(rows.size()) < n)
      throw IoError(features_path + ": " + std::to_string(rows.size()) +
                    " feature rows but edges mention node " + std::to_string(max_node));
    n = static_cast<int>(rows.size());  // features define the node count
    features.resize(n, rows.empty() ? 0 : static_cast<int>(rows[0].size()));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < features.cols(); ++j) features(i, j) = rows[i][j];
  }

  UndirectedGraph g = UndirectedGraph::build(n, std::move(edges), strict);
  g.features = std::move(features);

  if (!labels_path.empty()) {
    std::ifstream lin(labels_path);
    if (!lin) throw IoError("cannot open " + labels_path);
    g.labels.assign(g.n, -1);
    lineno = 0;
    while (std::getline(lin, line)) {
      ++lineno;
      if (blank(line)) continue;
      auto fields = split_csv(line);
      if (fields.size() != 2)
        throw IoError(labels_path + ":" + std::to_string(lineno) + ": expected 'node,label'");
      int node = parse_int(fields[0], labels_path, lineno);
      int label = parse_int(fields[1], labels_path, lineno);
      if (node < 0 || node >= g.n)
        throw IoError(labels_path + ":" + std::to_string(lineno) + ": node id out of range");
      g.labels[node] = label;
    }
    finalize_labels(g);
  }

  if (!splits_path.empty()) {
    std::ifstream sin(splits_path);
    if (!sin) throw IoError("cannot open " + splits_path);
    json doc;
    try {
      sin >> doc;
    } catch (const json::exception& e) {
      throw IoError(splits_path + ": " + e.what());
    }
    apply_splits_json(g, doc);
  }
  g.validate();
  return g;
}

// generators ----------------------------------------------------------------

UndirectedGraph gen_erdos_renyi(int n, double p, std::uint64_t seed) {
  if (n < 0) throw DomainError("negative node count");
  if (p < 0.0 || p > 1.0) throw DomainError("edge probability outside [0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (coin(rng) < p) edges.emplace_back(u, v);
  return UndirectedGraph::build(n, std::move(edges));
}

namespace {

UndirectedGraph make_tree_block(int depth, std::mt19937_64& rng) {
  const int leaves = 1 << depth;
  const int total = 2 * leaves - 1;
  std::vector<std::pair<int, int>> edges;
  for (int k = 1; k < total; ++k) edges.emplace_back((k - 1) / 2, k);
  UndirectedGraph g = UndirectedGraph::build(total, std::move(edges));

  std::vector<int> class_of(leaves), key_of(leaves);
  for (int i = 0; i < leaves; ++i) class_of[i] = key_of[i] = i;
  std::shuffle(class_of.begin(), class_of.end(), rng);
  std::shuffle(key_of.begin(), key_of.end(), rng);
  int target_key = static_cast<int>(rng() % leaves);

  g.features = Mat::Zero(total, 2 * leaves);
  g.labels.assign(total, -1);
  const int first_leaf = leaves - 1;
  int answer = -1;
  for (int i = 0; i < leaves; ++i) {
    g.features(first_leaf + i, class_of[i]) = 1.0;
    g.features(first_leaf + i, leaves + key_of[i]) = 1.0;
    if (key_of[i] == target_key) answer = class_of[i];
  }
  g.features(0, leaves + target_key) = 1.0;  // root announces the key to match
  g.labels[0] = answer;
  g.num_classes = leaves;
  g.train_mask.assign(total, 0);
  g.valid_mask.assign(total, 0);
  g.test_mask.assign(total, 0);
  g.train_mask[0] = 1;
  return g;
}

}  // namespace

UndirectedGraph gen_tree_neighbors_match(int depth, std::uint64_t seed) {
  if (depth < 1) throw DomainError("tree depth must be at least 1");
  std::mt19937_64 rng(seed);
  return make_tree_block(depth, rng);
}

UndirectedGraph gen_tree_neighbors_match_forest(int depth, int trees, std::uint64_t seed) {
  if (depth < 1) throw DomainError("tree depth must be at least 1");
  if (trees < 1) throw DomainError("tree count must be at least 1");
  std::mt19937_64 rng(seed);
  const int leaves = 1 << depth;
  const int block = 2 * leaves - 1;
  const int total = trees * block;
  std::vector<std::pair<int, int>> edges;
  UndirectedGraph g;
  g.features = Mat::Zero(total, 2 * leaves);
  g.labels.assign(total, -1);
  g.train_mask.assign(total, 0);
  g.valid_mask.assign(total, 0);
  g.test_mask.assign(total, 0);
  for (int t = 0; t < trees; ++t) {
    UndirectedGraph tree = make_tree_block(depth, rng);
    int base = t * block;
    for (auto [u, v] : tree.edges) edges.emplace_back(base + u, base + v);
    g.features.middleRows(base, block) = tree.features;
    g.labels[base] = tree.labels[0];
    g.train_mask[base] = 1;
  }
  UndirectedGraph built = UndirectedGraph::build(total, std::move(edges));
  built.features = std::move(g.features);
  built.labels = std::move(g.labels);
  built.num_classes = leaves;
  built.train_mask = std::move(g.train_mask);
  built.valid_mask = std::move(g.valid_mask);
  built.test_mask = std::move(g.test_mask);
  return built;
}

UndirectedGraph gen_hetero_sbm(int n, int classes, double p_in, double p_out, double feature_noise,
                               std::uint64_t seed) {
  if (n < 1 || classes < 1) throw DomainError("need at least one node and one class");
  if (classes > n) throw DomainError("more classes than nodes");
  for (double p : {p_in, p_out})
    if (p < 0.0 || p > 1.0) throw DomainError("edge probability outside [0,1]");
  if (feature_noise < 0.0) throw DomainError("negative feature noise");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      double p = (u % classes == v % classes) ? p_in : p_out;
      if (coin(rng) < p) edges.emplace_back(u, v);
    }
  UndirectedGraph g = UndirectedGraph::build(n, std::move(edges));
  g.features = Mat::Zero(n, classes);
  g.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    g.labels[i] = i % classes;
    g.features(i, g.labels[i]) = 1.0;
    for (int j = 0; j < classes; ++j) g.features(i, j) += feature_noise * noise(rng);
  }
  g.num_classes = classes;
  return g;
}

void assign_random_splits(UndirectedGraph& g, double train_frac, double valid_frac,
                          std::uint64_t seed) {
  if (train_frac < 0 || valid_frac < 0 || train_frac + valid_frac > 1.0)
    throw DomainError("split fractions must be nonnegative and sum to at most 1");
  std::vector<int> order(g.n);
  for (int i = 0; i < g.n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  g.train_mask.assign(g.n, 0);
  g.valid_mask.assign(g.n, 0);
  g.test_mask.assign(g.n, 0);
  int n_train = static_cast<int>(train_frac * g.n);
  int n_valid = static_cast<int>(valid_frac * g.n);
  for (int i = 0; i < g.n; ++i) {
    if (i < n_train) g.train_mask[order[i]] = 1;
    else if (i < n_train + n_valid) g.valid_mask[order[i]] = 1;
    else g.test_mask[order[i]] = 1;
  }
}

}  // namespace dcgnn
