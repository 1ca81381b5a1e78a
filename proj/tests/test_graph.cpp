#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "dcgnn/graph.hpp"
#include "support/test_util.hpp"

using namespace dcgnn;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("/tmp/dcgnn_graph_test_" + name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("edge canonicalization, dedup, and strict rejection") {
  UndirectedGraph g = UndirectedGraph::build(4, {{2, 1}, {1, 2}, {0, 3}, {3, 3}});
  CHECK(g.num_edges() == 2);
  CHECK(g.edges[0] == std::pair<int, int>{0, 3});
  CHECK(g.edges[1] == std::pair<int, int>{1, 2});
  CHECK(g.degree(3) == 1);

  CHECK_THROWS_AS(UndirectedGraph::build(4, {{3, 3}}, true), DomainError);
  CHECK_THROWS_AS(UndirectedGraph::build(4, {{1, 2}, {2, 1}}, true), DomainError);
  CHECK_THROWS_AS(UndirectedGraph::build(2, {{0, 5}}), DomainError);
}

TEST_CASE("bipartite layout on a triangle") {
  UndirectedGraph g = UndirectedGraph::build(3, {{0, 1}, {1, 2}, {0, 2}});
  BipartiteClusterGraph bip = build_bipartite(g, 2, 2);
  for (int i = 0; i < 3; ++i) {
    CHECK(bip.ego_size(i) == 3);
    CHECK(bip.ego[i][0] == i);  // the node leads its own neighborhood
  }
  CHECK(bip.ego[1] == std::vector<int>{1, 0, 2});
  CHECK(bip.total_cluster_nodes() == 2 + 3 * 2);
}

TEST_CASE("isolated nodes get singleton neighborhoods") {
  UndirectedGraph g = UndirectedGraph::build(3, {{0, 1}});
  BipartiteClusterGraph bip = build_bipartite(g, 1, 2);
  CHECK(bip.ego[2] == std::vector<int>{2});
  CHECK_THROWS_AS(build_bipartite(g, 0, 2), DomainError);
}

TEST_CASE("broadcast_local places rows at neighborhood indices") {
  UndirectedGraph g = UndirectedGraph::build(4, {{1, 0}, {1, 3}});
  BipartiteClusterGraph bip = build_bipartite(g, 1, 2);
  Mat m(3, 2);
  m << 1, 2, 3, 4, 5, 6;  // rows for ego[1] = {1, 0, 3}
  Mat wide = broadcast_local(m, 1, bip);
  CHECK(wide.rows() == 4);
  CHECK(wide(1, 0) == 1.0);
  CHECK(wide(0, 0) == 3.0);
  CHECK(wide(3, 1) == 6.0);
  CHECK(wide.row(2).cwiseAbs().maxCoeff() == 0.0);  // untouched rows stay zero
  CHECK_THROWS_AS(broadcast_local(Mat::Zero(2, 2), 1, bip), ShapeError);
}

TEST_CASE("cluster augmentation adds the expected edges") {
  UndirectedGraph g = UndirectedGraph::build(3, {{0, 1}, {1, 2}});  // path
  int n_global = 2, n_local = 1;
  UndirectedGraph aug = augment_with_clusters(g, n_global, n_local);
  CHECK(aug.n == 3 + 2 + 3 * 1);
  long long added = n_global * 3LL;  // every node to every global cluster
  for (int i = 0; i < 3; ++i) added += n_local * (g.degree(i) + 1LL);
  CHECK(aug.num_edges() == g.num_edges() + added);

  UndirectedGraph none = augment_with_clusters(g, 0, 0);
  CHECK(none.n == g.n);
  CHECK(none.edges == g.edges);
}

TEST_CASE("erdos-renyi generator determinism and extremes") {
  UndirectedGraph a = gen_erdos_renyi(10, 0.4, 42);
  UndirectedGraph b = gen_erdos_renyi(10, 0.4, 42);
  CHECK(a.edges == b.edges);
  CHECK(gen_erdos_renyi(10, 1.0, 7).num_edges() == 45);
  CHECK(gen_erdos_renyi(10, 0.0, 7).num_edges() == 0);
  CHECK(gen_erdos_renyi(10, 0.4, 43).edges != a.edges);
}

TEST_CASE("single tree instance: structure, features, and answer") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    UndirectedGraph g = gen_tree_neighbors_match(2, seed);
    const int leaves = 4;
    CHECK(g.n == 7);
    CHECK(g.num_edges() == 6);
    CHECK(g.features.cols() == 2 * leaves);
    CHECK(g.num_classes == leaves);
    REQUIRE(g.labels[0] >= 0);
    CHECK(g.labels[0] < leaves);
    for (int i = 1; i < g.n; ++i) CHECK(g.labels[i] == -1);
    CHECK(g.train_mask[0] == 1);

    // the root's key singles out exactly one leaf, whose class is the label
    int root_key = -1;
    for (int k = 0; k < leaves; ++k)
      if (g.features(0, leaves + k) == 1.0) root_key = k;
    REQUIRE(root_key >= 0);
    int matches = 0;
    for (int leaf = leaves - 1; leaf < g.n; ++leaf) {
      if (g.features(leaf, leaves + root_key) == 1.0) {
        ++matches;
        for (int c = 0; c < leaves; ++c)
          if (g.features(leaf, c) == 1.0) CHECK(c == g.labels[0]);
      }
    }
    CHECK(matches == 1);
  }
}

TEST_CASE("forest stacks independent trees with labeled roots") {
  UndirectedGraph f = gen_tree_neighbors_match_forest(3, 5, 9);
  const int block = 15;
  CHECK(f.n == 5 * block);
  CHECK(f.num_edges() == 5 * 14);
  CHECK(f.num_classes == 8);
  int labeled = 0, trained = 0;
  for (int i = 0; i < f.n; ++i) {
    labeled += f.labels[i] >= 0;
    trained += f.train_mask[i];
    if (i % block == 0) CHECK(f.labels[i] >= 0);
  }
  CHECK(labeled == 5);
  CHECK(trained == 5);
  UndirectedGraph f2 = gen_tree_neighbors_match_forest(3, 5, 9);
  CHECK(f.features == f2.features);
  CHECK(f.edges == f2.edges);
}

TEST_CASE("sbm generator: balanced classes and probability extremes") {
  UndirectedGraph g = gen_hetero_sbm(40, 4, 0.0, 0.0, 0.1, 3);
  CHECK(g.num_edges() == 0);
  std::vector<int> counts(4, 0);
  for (int l : g.labels) ++counts[l];
  for (int c : counts) CHECK(c == 10);

  UndirectedGraph dense = gen_hetero_sbm(12, 2, 1.0, 0.0, 0.0, 3);
  for (auto [u, v] : dense.edges) CHECK(u % 2 == v % 2);
  CHECK(dense.num_edges() == 2 * (6 * 5 / 2));
  // noiseless features are exact one-hot centroids
  CHECK(dense.features(0, 0) == 1.0);
  CHECK(dense.features(1, 0) == 0.0);
}

TEST_CASE("random splits are disjoint and exhaustive") {
  UndirectedGraph g = gen_erdos_renyi(50, 0.1, 1);
  assign_random_splits(g, 0.5, 0.25, 123);
  int tr = 0, va = 0, te = 0;
  for (int i = 0; i < g.n; ++i) {
    CHECK(g.train_mask[i] + g.valid_mask[i] + g.test_mask[i] == 1);
    tr += g.train_mask[i];
    va += g.valid_mask[i];
    te += g.test_mask[i];
  }
  CHECK(tr == 25);
  CHECK(va == 12);
  CHECK(te == 13);
  CHECK_THROWS_AS(assign_random_splits(g, 0.8, 0.5, 1), DomainError);
}

TEST_CASE("csv bundle loading on a 3-node path") {
  TempFile edges("p3.csv", "0,1\n1,2\n");
  TempFile feats("p3_x.csv", "1.0,0.0\n0.5,0.5\n0.0,1.0\n");
  TempFile labels("p3_y.csv", "0,0\n2,1\n");
  TempFile splits("p3_s.json", R"({"train": [0, 2], "valid": [], "test": [1]})");
  UndirectedGraph g = load_graph_csv(edges.path, feats.path, labels.path, splits.path);
  CHECK(g.n == 3);
  CHECK(g.adj[0] == std::vector<int>{1});
  CHECK(g.adj[1] == std::vector<int>{0, 2});
  CHECK(g.adj[2] == std::vector<int>{1});
  CHECK(g.features(1, 0) == 0.5);
  CHECK(g.labels == std::vector<int>{0, -1, 1});
  CHECK(g.num_classes == 2);
  CHECK(g.train_mask == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(g.test_mask == std::vector<std::uint8_t>{0, 1, 0});
}

TEST_CASE("csv parse errors name file and line") {
  TempFile bad("bad.csv", "0,1\nx,2\n");
  try {
    load_graph_csv(bad.path);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_graph_csv("/nonexistent/file.csv"), IoError);

  TempFile self_loop("loop.csv", "0,0\n0,1\n");
  CHECK_THROWS_AS(load_graph_csv(self_loop.path, "", "", "", true), DomainError);
  CHECK(load_graph_csv(self_loop.path).num_edges() == 1);  // lenient drop

  TempFile ragged("ragged.csv", "0,1\n");
  TempFile badfeat("badfeat.csv", "1.0,2.0\n3.0\n");
  CHECK_THROWS_AS(load_graph_csv(ragged.path, badfeat.path), IoError);
}

TEST_CASE("json graph round trip preserves everything") {
  UndirectedGraph g = gen_hetero_sbm(20, 2, 0.2, 0.4, 0.3, 5);
  assign_random_splits(g, 0.6, 0.2, 7);
  std::string path = "/tmp/dcgnn_graph_test_roundtrip.json";
  save_graph_json(g, path);
  UndirectedGraph back = load_graph_json(path);
  CHECK(back.n == g.n);
  CHECK(back.edges == g.edges);
  CHECK(back.labels == g.labels);
  CHECK(back.num_classes == g.num_classes);
  CHECK(back.train_mask == g.train_mask);
  CHECK((back.features - g.features).cwiseAbs().maxCoeff() < 1e-15);
  std::remove(path.c_str());
}

TEST_CASE("json loading validates shape consistency") {
  TempFile bad("shape.json", R"({"n": 3, "edges": [[0,1]], "features": [[1.0],[2.0]]})");
  CHECK_THROWS_AS(load_graph_json(bad.path), IoError);
  TempFile missing("missing.json", R"({"edges": []})");
  CHECK_THROWS_AS(load_graph_json(missing.path), IoError);
}
