#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dcgnn/tensor.hpp"

namespace dcgnn {

using ad::Mat;
using ad::Vec;

// Simple undirected graph with optional node features, labels, and split
// masks. Edges are stored canonically (u < v, sorted, unique); adjacency
// lists are sorted ascending.
struct UndirectedGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> adj;
  Mat features;                          // n x d, or 0 x 0 when absent
  std::vector<int> labels;               // per node, -1 = unlabeled; empty when absent
  int num_classes = 0;                   // 0 when unlabeled
  std::vector<std::uint8_t> train_mask;  // per node, empty when no split given
  std::vector<std::uint8_t> valid_mask;
  std::vector<std::uint8_t> test_mask;

  int num_edges() const { return static_cast<int>(edges.size()); }
  int degree(int u) const { return static_cast<int>(adj[u].size()); }
  bool has_features() const { return features.rows() == n && n > 0; }
  bool has_labels() const { return !labels.empty(); }
  std::vector<int> nodes_in_split(const std::vector<std::uint8_t>& mask) const;

  // Self-loops and duplicate edges are rejected when strict, otherwise
  // dropped/merged. Checks index ranges, label ranges, and split disjointness.
  static UndirectedGraph build(int n, std::vector<std::pair<int, int>> raw_edges,
                               bool strict = false);
  void validate() const;
};

// Cluster-node layout on top of a base graph: n_global cluster-nodes adjacent
// to every node, plus n_local cluster-nodes per node i adjacent to the closed
// neighborhood N_i+. ego[i] lists N_i+ with i first, then neighbors ascending.
struct BipartiteClusterGraph {
  int n = 0;
  int n_global = 0;
  int n_local = 0;
  std::vector<std::vector<int>> ego;

  int ego_size(int u) const { return static_cast<int>(ego[u].size()); }
  // flat node index behind local row k of node u's coupling
  int local_member(int u, int k) const { return ego[u][k]; }
  long long total_cluster_nodes() const {
    return static_cast<long long>(n_global) + static_cast<long long>(n) * n_local;
  }
};

BipartiteClusterGraph build_bipartite(const UndirectedGraph& g, int n_global, int n_local);

// Dense |V| x cols realization of a node's local matrix: row ego[u][k] takes
// row k of m, all other rows zero. Reference semantics for tests; the layer
// uses the equivalent indexed scatter.
Mat broadcast_local(const Mat& m, int u, const BipartiteClusterGraph& bip);

// Flat graph over |V| + n_global + |V|*n_local vertices: the original edges
// plus an edge from every node to each global cluster-node and from each
// member of N_i+ to node i's local cluster-nodes. Cluster vertices carry no
// features/labels. Used for Laplacian-based resistance analysis.
UndirectedGraph augment_with_clusters(const UndirectedGraph& g, int n_global, int n_local);

// io -----------------------------------------------------------------------

// Single JSON document with fields n, edges, features, labels, splits
// (the latter three optional).
UndirectedGraph load_graph_json(const std::string& path, bool strict = false);
void save_graph_json(const UndirectedGraph& g, const std::string& path);

// CSV bundle: edge list "u,v" per line; features one row of comma-separated
// values per node; labels "node,label"; splits as a JSON object of index
// arrays {"train": [...], "valid": [...], "test": [...]}. Empty paths skip
// the optional parts. Parse errors name the file and line.
UndirectedGraph load_graph_csv(const std::string& edges_path, const std::string& features_path = "",
                               const std::string& labels_path = "",
                               const std::string& splits_path = "", bool strict = false);

// generators ----------------------------------------------------------------
// All generators are pure functions of their arguments: a fixed seed yields
// the same graph on every call.

UndirectedGraph gen_erdos_renyi(int n, double p, std::uint64_t seed);

// Complete binary tree of the given depth. Each leaf carries a one-hot
// (class, key) pair, the root carries only a key, and the root's label is the
// class of the unique leaf with the matching key. Only the root is labeled
// and train-masked. Feature layout: [class one-hot | key one-hot], both of
// width 2^depth.
UndirectedGraph gen_tree_neighbors_match(int depth, std::uint64_t seed);

// Disjoint union of many such trees; every root is labeled and train-masked.
UndirectedGraph gen_tree_neighbors_match_forest(int depth, int trees, std::uint64_t seed);

// Stochastic block model with balanced classes (node i gets class i mod
// classes), within-class edge probability p_in, cross-class p_out, and
// features = one-hot class centroid + N(0, feature_noise^2) noise.
UndirectedGraph gen_hetero_sbm(int n, int classes, double p_in, double p_out, double feature_noise,
                               std::uint64_t seed);

// Shuffles nodes into train/valid/test masks by fraction (test gets the
// remainder).
void assign_random_splits(UndirectedGraph& g, double train_frac, double valid_frac,
                          std::uint64_t seed);

}  // namespace dcgnn
