#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dcgnn/config.hpp"
#include "dcgnn/graph.hpp"

// End-to-end runs of the command line binary: artifacts, determinism,
// manifest round trips, and exit codes.

#ifndef DCGNN_CLI_PATH
#error "build must define DCGNN_CLI_PATH"
#endif

using namespace dcgnn;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct Workdir {
  fs::path dir;
  explicit Workdir(const std::string& name) {
    dir = fs::temp_directory_path() / ("dcgnn_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workdir() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

// runs the binary with stdout/stderr captured next to the artifacts
int run_cli(const Workdir& w, const std::string& args) {
  std::string cmd = std::string(DCGNN_CLI_PATH) + " " + args + " >" + (w / "stdout.txt") +
                    " 2>" + (w / "stderr.txt");
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_count(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  return lines;
}

}  // namespace

TEST_CASE("generate writes the complete graph and its edge list") {
  Workdir w("generate");
  int rc = run_cli(w, "generate --kind erdos-renyi --n 10 --p 1 --seed 3 --out-dir " + (w / "er"));
  CHECK(rc == 0);
  CHECK(line_count(w / "er/edges.csv") == 45);

  UndirectedGraph g = load_graph_json(w / "er/graph.json");
  CHECK(g.n == 10);
  CHECK(g.edges.size() == 45);

  json manifest = config::load_json_file(w / "er/manifest.json");
  CHECK(manifest.at("command") == "generate");
  CHECK(manifest.at("args").at("n") == 10);
  CHECK(manifest.at("args").at("p") == 1.0);
}

TEST_CASE("sinkhorn reproduces the hand-iterated two by two coupling") {
  Workdir w("sinkhorn");
  {
    std::ofstream cost(w / "cost.csv");
    cost << "0,1\n1,0\n";
  }
  int rc = run_cli(w, "sinkhorn --cost " + (w / "cost.csv") +
                          " --lambda 1 --iterations 1 --out-dir " + (w / "out"));
  CHECK(rc == 0);

  Mat p = config::load_matrix_csv(w / "out/coupling.csv");
  REQUIRE(p.rows() == 2);
  REQUIRE(p.cols() == 2);
  const double big = 0.36552928931500245, small = 0.13447071068499755;
  CHECK(std::abs(p(0, 0) - big) < 1e-15);
  CHECK(std::abs(p(0, 1) - small) < 1e-15);
  CHECK(std::abs(p(1, 0) - small) < 1e-15);
  CHECK(std::abs(p(1, 1) - big) < 1e-15);

  json s = config::load_json_file(w / "out/summary.json");
  CHECK(s.at("row_err").get<double>() < 1e-15);
  CHECK(s.at("col_err").get<double>() < 1e-15);

  // convergence mode drives the residuals to the requested tolerance
  rc = run_cli(w, "sinkhorn --cost " + (w / "cost.csv") +
                      " --lambda 5 --to-convergence --tol 1e-11 --out-dir " + (w / "out2"));
  CHECK(rc == 0);
  json s2 = config::load_json_file(w / "out2/summary.json");
  CHECK(s2.at("row_err").get<double>() < 1e-11);
  CHECK(s2.at("col_err").get<double>() < 1e-11);
}

TEST_CASE("resistance reports the path graph total and a cluster sweep") {
  Workdir w("resistance");
  {
    std::ofstream edges(w / "path.csv");
    edges << "0,1\n1,2\n";
  }
  int rc = run_cli(w, "resistance --edges " + (w / "path.csv") + " --out-dir " + (w / "out"));
  CHECK(rc == 0);
  json s = config::load_json_file(w / "out/summary.json");
  CHECK(s.at("r_tot").get<double>() == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(slurp(w / "stdout.txt").find("r_tot 4") != std::string::npos);

  Mat pw = config::load_matrix_csv(w / "out/pairwise.csv");
  REQUIRE(pw.rows() == 3);
  CHECK(pw(0, 2) == doctest::Approx(2.0).epsilon(1e-12));

  rc = run_cli(w, "resistance --edges " + (w / "path.csv") + " --max-clusters 2 --out-dir " +
                      (w / "grid"));
  CHECK(rc == 0);
  Mat heat = config::load_matrix_csv(w / "grid/heatmap.csv");
  REQUIRE(heat.rows() == 3);
  REQUIRE(heat.cols() == 3);
  CHECK(heat(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
  // adding cluster shortcuts only ever lowers the total
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) CHECK(heat(r, c) <= heat(0, 0) + 1e-12);
}

TEST_CASE("homophily emits a stochastic class mixing matrix") {
  Workdir w("homophily");
  int rc = run_cli(w, "generate --kind sbm --n 40 --classes 2 --p-in 0.4 --p-out 0.05 "
                      "--noise 0.3 --seed 5 --out-dir " +
                          (w / "g"));
  REQUIRE(rc == 0);
  rc = run_cli(w, "homophily --graph " + (w / "g/graph.json") + " --out-dir " + (w / "out"));
  CHECK(rc == 0);

  Mat h = config::load_matrix_csv(w / "out/homophily.csv");
  REQUIRE(h.rows() == 2);
  for (int r = 0; r < h.rows(); ++r) CHECK(h.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
  double eh = config::load_json_file(w / "out/summary.json").at("edge_homophily").get<double>();
  CHECK(eh > 0.5);  // assortative blocks
  CHECK(eh <= 1.0);
}

TEST_CASE("same seed training runs are byte identical") {
  Workdir w("determinism");
  REQUIRE(run_cli(w, "generate --kind sbm --n 30 --classes 2 --p-in 0.4 --p-out 0.05 "
                     "--noise 0.3 --seed 5 --out-dir " +
                         (w / "g")) == 0);
  std::string graph = w / "g/graph.json";
  std::string flags = " --epochs 20 --lr 0.05 --seed 2 --omega1 0.01 --omega2 0.1 ";
  REQUIRE(run_cli(w, "train --graph " + graph + flags + "--out-dir " + (w / "a")) == 0);
  REQUIRE(run_cli(w, "train --graph " + graph + flags + "--out-dir " + (w / "b")) == 0);

  CHECK(slurp(w / "a/metrics.csv") == slurp(w / "b/metrics.csv"));
  CHECK(slurp(w / "a/checkpoint.json") == slurp(w / "b/checkpoint.json"));

  // header plus one row per epoch
  CHECK(line_count(w / "a/metrics.csv") == 21);
  CHECK(slurp(w / "a/metrics.csv").rfind("epoch,train_loss,ce,ortho,sim,val_metric,test_metric",
                                         0) == 0);
}

TEST_CASE("a run can be repeated from its manifest alone") {
  Workdir w("manifest");
  REQUIRE(run_cli(w, "generate --kind sbm --n 30 --classes 2 --p-in 0.4 --p-out 0.05 "
                     "--noise 0.3 --seed 7 --out-dir " +
                         (w / "g")) == 0);
  REQUIRE(run_cli(w, "train --graph " + (w / "g/graph.json") +
                         " --epochs 15 --lr 0.03 --alpha 0.6 --lambda 3 --seed 9 --out-dir " +
                         (w / "a")) == 0);
  REQUIRE(run_cli(w, "train --config " + (w / "a/manifest.json") + " --out-dir " + (w / "b")) ==
          0);

  CHECK(slurp(w / "a/metrics.csv") == slurp(w / "b/metrics.csv"));
  CHECK(slurp(w / "a/checkpoint.json") == slurp(w / "b/checkpoint.json"));
  CHECK(config::load_json_file(w / "a/manifest.json") ==
        config::load_json_file(w / "b/manifest.json"));

  // explicit flags still win over the manifest
  REQUIRE(run_cli(w, "train --config " + (w / "a/manifest.json") +
                         " --epochs 5 --out-dir " + (w / "c")) == 0);
  CHECK(line_count(w / "c/metrics.csv") == 6);
  json m = config::load_json_file(w / "c/manifest.json");
  CHECK(m.at("args").at("hyperparams").at("epochs") == 5);
  CHECK(m.at("args").at("hyperparams").at("lr") == 0.03);
}

TEST_CASE("eval agrees with the metrics recorded at train time") {
  Workdir w("eval");
  REQUIRE(run_cli(w, "generate --kind sbm --n 40 --classes 2 --p-in 0.4 --p-out 0.05 "
                     "--noise 0.4 --seed 11 --out-dir " +
                         (w / "g")) == 0);
  REQUIRE(run_cli(w, "train --graph " + (w / "g/graph.json") +
                         " --epochs 25 --lr 0.05 --seed 4 --out-dir " + (w / "tr")) == 0);
  REQUIRE(run_cli(w, "eval --graph " + (w / "g/graph.json") + " --checkpoint " +
                         (w / "tr/checkpoint.json") + " --split test --out-dir " + (w / "ev")) ==
          0);

  json train_summary = config::load_json_file(w / "tr/summary.json");
  json eval_out = config::load_json_file(w / "ev/eval.json");
  CHECK(eval_out.at("split") == "test");
  CHECK(eval_out.at("accuracy").get<double>() ==
        doctest::Approx(train_summary.at("test").at("accuracy").get<double>()).epsilon(1e-12));
}

TEST_CASE("convergence check passes on a random graph and writes the trace") {
  Workdir w("convcheck");
  REQUIRE(run_cli(w, "generate --kind erdos-renyi --n 20 --p 0.3 --seed 6 --out-dir " +
                         (w / "g")) == 0);
  int rc = run_cli(w, "convergence-check --graph " + (w / "g/graph.json") +
                          " --layers 20 --seed 1 --out-dir " + (w / "out"));
  CHECK(rc == 0);

  json v = config::load_json_file(w / "out/verdict.json");
  CHECK(v.at("pass") == true);
  CHECK(v.at("monotone") == true);
  CHECK(v.at("above_lower_bound") == true);
  CHECK(v.at("final_total").get<double>() >= v.at("lower_bound").get<double>());
  CHECK(line_count(w / "out/trace.csv") == 21);  // header + one row per layer
  CHECK(slurp(w / "out/trace.csv").rfind(
            "layer,global_term,local_term,fidelity_term,global_entropy,local_entropy,total", 0) ==
        0);
}

TEST_CASE("convergence check refuses configurations outside its guarantee") {
  Workdir w("convrefuse");
  REQUIRE(run_cli(w, "generate --kind erdos-renyi --n 12 --p 0.4 --seed 2 --out-dir " +
                         (w / "g")) == 0);
  std::string base = "convergence-check --graph " + (w / "g/graph.json") + " --out-dir " +
                     (w / "out") + " ";
  CHECK(run_cli(w, base + "--use-message-transform") == 2);
  CHECK(run_cli(w, base + "--activation tanh") == 2);
  CHECK(run_cli(w, base + "--layer-norm") == 2);
  CHECK(run_cli(w, base + "--message-dropout 0.2") == 2);
  CHECK(slurp(w / "stderr.txt").find("plain update rule") != std::string::npos);
}

TEST_CASE("gradcheck passes and records per tensor errors") {
  Workdir w("gradcheck");
  int rc = run_cli(w, "gradcheck --seed 3 --out-dir " + (w / "out"));
  CHECK(rc == 0);
  json g = config::load_json_file(w / "out/gradcheck.json");
  CHECK(g.at("pass") == true);
  CHECK(g.at("max_rel_err").get<double>() < 1e-3);
  CHECK(g.at("per_tensor").size() >= 5);
}

TEST_CASE("input problems exit with code 2 and name the offender") {
  Workdir w("exitcodes");
  CHECK(run_cli(w, "train --graph " + (w / "missing.json") + " --out-dir " + (w / "o1")) == 2);
  CHECK(slurp(w / "stderr.txt").find("missing.json") != std::string::npos);

  {
    std::ofstream edges(w / "edges.csv");
    edges << "0,1\n1,2\n";
  }
  CHECK(run_cli(w, "train --edges " + (w / "edges.csv") + " --features " +
                       (w / "no_features.csv") + " --out-dir " + (w / "o2")) == 2);
  CHECK(slurp(w / "stderr.txt").find("no_features.csv") != std::string::npos);

  CHECK(run_cli(w, "train --out-dir " + (w / "o3")) == 2);  // no graph input at all
  CHECK(run_cli(w, "eval --graph x.json --out-dir " + (w / "o4")) == 2);  // no checkpoint
  CHECK(run_cli(w, "sinkhorn --out-dir " + (w / "o5")) == 2);             // no cost
  CHECK(run_cli(w, "train --no-such-flag") == 2);
  CHECK(run_cli(w, "") == 2);  // subcommand required

  // config typo fails loudly instead of silently using defaults
  {
    std::ofstream cfg(w / "bad.json");
    cfg << "{\"hyperparams\": {\"learning_rate\": 0.1}}";
  }
  CHECK(run_cli(w, "gradcheck --config " + (w / "bad.json") + " --out-dir " + (w / "o6")) == 2);
  CHECK(slurp(w / "stderr.txt").find("learning_rate") != std::string::npos);
}

TEST_CASE("output directory comes from the environment when not passed") {
  Workdir w("envdir");
  {
    std::ofstream cost(w / "cost.csv");
    cost << "0,1\n1,0\n";
  }
  std::string cmd = "DCGNN_OUT_DIR=" + (w / "from_env") + " " + DCGNN_CLI_PATH +
                    " sinkhorn --cost " + (w / "cost.csv") + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(std::filesystem::exists(w / "from_env/coupling.csv"));
  CHECK(std::filesystem::exists(w / "from_env/manifest.json"));
}
