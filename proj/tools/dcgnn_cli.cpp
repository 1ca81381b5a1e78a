// Command line front end: training, evaluation, the transport solver, graph
// generators, and diagnostics. Every run writes a manifest echoing its fully
// resolved arguments, and any run can be repeated via --config manifest.json.
//
// Exit codes: 0 ok, 1 check failed, 2 input error, 3 numeric divergence.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcgnn/analysis.hpp"
#include "dcgnn/config.hpp"
#include "dcgnn/dc_layer.hpp"
#include "dcgnn/errors.hpp"
#include "dcgnn/graph.hpp"
#include "dcgnn/model.hpp"
#include "dcgnn/sinkhorn.hpp"
#include "dcgnn/tensor.hpp"

namespace {

using json = nlohmann::json;
using namespace dcgnn;
using ad::Mat;
using ad::Tensor;

// --out-dir beats the DCGNN_OUT_DIR env var beats the working directory
std::string resolve_out_dir(const std::string& flag) {
  std::string dir = flag;
  if (dir.empty()) {
    const char* env = std::getenv("DCGNN_OUT_DIR");
    dir = (env && *env) ? env : ".";
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

Mat random_uniform(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

// ---------------------------------------------------------------------------
// argument resolution: defaults, then --config, then explicit flags

// Overwrites defaults[key] with the config value; the json types must agree
// so a quoted number or a stray string fails here instead of deep inside a
// command.
void merge_key(json& defaults, const std::string& key, const json& value,
               const std::string& command) {
  if (!defaults.contains(key))
    throw IoError("unknown config key \"" + key + "\" for " + command);
  const json& base = defaults.at(key);
  bool ok = (base.is_number() && value.is_number()) || base.type() == value.type();
  if (!ok) throw IoError("config key \"" + key + "\" has the wrong type");
  defaults[key] = value;
}

json resolve_args(const std::string& command, const std::string& config_path, json defaults) {
  if (config_path.empty()) return defaults;
  json cfg = config::manifest_args(config::load_json_file(config_path));
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (it.key() == "hyperparams" && defaults.contains("hyperparams")) {
      // partial hyperparameter blocks apply on top of the command's defaults
      model::Hyperparams base = config::hyperparams_from_json(defaults.at("hyperparams"));
      defaults["hyperparams"] =
          config::hyperparams_to_json(config::hyperparams_from_json(it.value(), base));
    } else {
      merge_key(defaults, it.key(), it.value(), command);
    }
  }
  return defaults;
}

template <typename T>
void put_if_passed(const CLI::App* cmd, const std::string& flag, const T& v, json& args,
                   const std::string& key) {
  if (cmd->count(flag)) args[key] = v;
}

// ---------------------------------------------------------------------------
// graph input: one JSON file or a CSV bundle

struct GraphInput {
  std::string graph, edges, features, labels, splits;

  void attach(CLI::App* cmd) {
    cmd->add_option("--graph", graph, "graph as a single JSON file");
    cmd->add_option("--edges", edges, "edge list CSV, one u,v pair per line");
    cmd->add_option("--features", features, "feature CSV, one row per node");
    cmd->add_option("--labels", labels, "label CSV, node,label per line");
    cmd->add_option("--splits", splits, "JSON with train/valid/test index arrays");
  }

  static json defaults() {
    return json{{"graph", ""}, {"edges", ""}, {"features", ""}, {"labels", ""}, {"splits", ""}};
  }

  void apply(const CLI::App* cmd, json& args) const {
    // the two input styles are exclusive; the explicit one wins
    if (cmd->count("--graph")) {
      args["graph"] = graph;
      args["edges"] = args["features"] = args["labels"] = args["splits"] = "";
    }
    if (cmd->count("--edges")) {
      args["edges"] = edges;
      args["graph"] = "";
    }
    put_if_passed(cmd, "--features", features, args, "features");
    put_if_passed(cmd, "--labels", labels, args, "labels");
    put_if_passed(cmd, "--splits", splits, args, "splits");
  }

  static UndirectedGraph load(const json& args) {
    std::string g = args.at("graph").get<std::string>();
    std::string e = args.at("edges").get<std::string>();
    if (!g.empty()) return load_graph_json(g);
    if (!e.empty())
      return load_graph_csv(e, args.at("features").get<std::string>(),
                            args.at("labels").get<std::string>(),
                            args.at("splits").get<std::string>());
    throw IoError("no graph input: pass --graph or --edges");
  }
};

// ---------------------------------------------------------------------------
// hyperparameter flags, mirroring the struct field names

struct HpFlags {
  int layers = 0, hidden_channels = 0, n_global = 0, n_local = 0, encoder_depth = 0, epochs = 0;
  double lr = 0, weight_decay = 0, dropout = 0, omega1 = 0, omega2 = 0;
  std::uint64_t seed = 0;
  double alpha = 0, beta = 0, lambda = 0, convergence_tol = 0, min_entry = 0, message_dropout = 0;
  int t_global = 0, t_local = 0;
  std::string activation, aggregation;
  bool use_message_transform = false, layer_norm = false, run_to_convergence = false;
  bool stabilize_costs = false, grad_through_assignments = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--layers", layers, "message passing rounds");
    cmd->add_option("--hidden-channels", hidden_channels, "embedding width");
    cmd->add_option("--n-global", n_global, "shared clusters per layer");
    cmd->add_option("--n-local", n_local, "per-node clusters per layer");
    cmd->add_option("--encoder-depth", encoder_depth, "feature encoder layers (1 or 2)");
    cmd->add_option("--lr", lr, "learning rate");
    cmd->add_option("--weight-decay", weight_decay, "decoupled weight decay");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--dropout", dropout, "encoder dropout");
    cmd->add_option("--omega1", omega1, "orthogonality penalty weight");
    cmd->add_option("--omega2", omega2, "similarity penalty weight");
    cmd->add_option("--seed", seed, "seed for all randomness in the run");
    cmd->add_option("--alpha", alpha, "shared vs per-node cluster balance");
    cmd->add_option("--beta", beta, "anchor feature pull");
    cmd->add_option("--lambda", lambda, "entropic sharpness");
    cmd->add_option("--t-global", t_global, "solver sweeps, shared assignment");
    cmd->add_option("--t-local", t_local, "solver sweeps, per-node assignments");
    cmd->add_option("--activation", activation, "message activation: none or tanh");
    cmd->add_option("--aggregation", aggregation, "local aggregation: weighted or sum");
    cmd->add_option("--convergence-tol", convergence_tol, "solver residual target");
    cmd->add_option("--min-entry", min_entry, "kernel floor inside the solver");
    cmd->add_option("--message-dropout", message_dropout, "dropout on messages");
    cmd->add_flag("--use-message-transform,!--no-message-transform", use_message_transform,
                  "learned mixing of the message streams");
    cmd->add_flag("--layer-norm,!--no-layer-norm", layer_norm, "row-normalize messages");
    cmd->add_flag("--run-to-convergence,!--no-run-to-convergence", run_to_convergence,
                  "iterate the solver until the residual target");
    cmd->add_flag("--stabilize-costs,!--no-stabilize-costs", stabilize_costs,
                  "rescale costs by their max before exponentiation");
    cmd->add_flag("--grad-through-assignments,!--no-grad-through-assignments",
                  grad_through_assignments, "backprop through the unrolled solver");
  }

  void apply(const CLI::App* cmd, model::Hyperparams& hp) const {
    if (cmd->count("--layers")) hp.layers = layers;
    if (cmd->count("--hidden-channels")) hp.hidden_channels = hidden_channels;
    if (cmd->count("--n-global")) hp.n_global = n_global;
    if (cmd->count("--n-local")) hp.n_local = n_local;
    if (cmd->count("--encoder-depth")) hp.encoder_depth = encoder_depth;
    if (cmd->count("--lr")) hp.lr = lr;
    if (cmd->count("--weight-decay")) hp.weight_decay = weight_decay;
    if (cmd->count("--epochs")) hp.epochs = epochs;
    if (cmd->count("--dropout")) hp.dropout = dropout;
    if (cmd->count("--omega1")) hp.omega1 = omega1;
    if (cmd->count("--omega2")) hp.omega2 = omega2;
    if (cmd->count("--seed")) hp.seed = seed;
    if (cmd->count("--alpha")) hp.layer.alpha = alpha;
    if (cmd->count("--beta")) hp.layer.beta = beta;
    if (cmd->count("--lambda")) hp.layer.lambda = lambda;
    if (cmd->count("--t-global")) hp.layer.t_global = t_global;
    if (cmd->count("--t-local")) hp.layer.t_local = t_local;
    if (cmd->count("--activation")) hp.layer.activation = config::activation_from_name(activation);
    if (cmd->count("--aggregation"))
      hp.layer.aggregation = config::aggregation_from_name(aggregation);
    if (cmd->count("--convergence-tol")) hp.layer.convergence_tol = convergence_tol;
    if (cmd->count("--min-entry")) hp.layer.min_entry = min_entry;
    if (cmd->count("--message-dropout")) hp.layer.message_dropout = message_dropout;
    if (cmd->count("--use-message-transform"))
      hp.layer.use_message_transform = use_message_transform;
    if (cmd->count("--layer-norm")) hp.layer.layer_norm = layer_norm;
    if (cmd->count("--run-to-convergence")) hp.layer.run_to_convergence = run_to_convergence;
    if (cmd->count("--stabilize-costs")) hp.layer.stabilize_costs = stabilize_costs;
    if (cmd->count("--grad-through-assignments"))
      hp.layer.grad_through_assignments = grad_through_assignments;
  }
};

model::Hyperparams resolve_hyperparams(const CLI::App* cmd, const HpFlags& hpf, json& args) {
  model::Hyperparams hp = config::hyperparams_from_json(args.at("hyperparams"));
  hpf.apply(cmd, hp);
  args["hyperparams"] = config::hyperparams_to_json(hp);
  return hp;
}

void write_manifest(const std::string& command, const json& args, const std::string& dir) {
  config::save_json_file(config::make_manifest(command, args), join(dir, "manifest.json"));
}

std::string metric_line(const model::Metrics& m) {
  std::ostringstream out;
  out.precision(6);
  out << "accuracy " << m.accuracy;
  if (m.roc_auc) out << "  auc " << *m.roc_auc;
  return out.str();
}

json metric_json(const model::Metrics& m) {
  json j{{"accuracy", m.accuracy}};
  if (m.roc_auc) j["roc_auc"] = *m.roc_auc;
  return j;
}

// ---------------------------------------------------------------------------
// commands

int run_train(const json& args, const std::string& dir) {
  UndirectedGraph g = GraphInput::load(args);
  model::Hyperparams hp = config::hyperparams_from_json(args.at("hyperparams"));
  model::TrainResult res = model::train(g, hp);

  write_manifest("train", args, dir);
  model::write_metrics_csv(join(dir, "metrics.csv"), res.history);
  model::save_checkpoint(join(dir, "checkpoint.json"), res.params);
  json summary{{"best_epoch", res.best_epoch},
               {"val", metric_json(res.best_val)},
               {"test", metric_json(res.best_test)},
               {"epochs", static_cast<int>(res.history.size())}};
  config::save_json_file(summary, join(dir, "summary.json"));

  std::cout << "trained " << res.history.size() << " epochs on " << g.n << " nodes\n"
            << "best epoch " << res.best_epoch << "\n"
            << "valid: " << metric_line(res.best_val) << "\n"
            << "test:  " << metric_line(res.best_test) << "\n";
  return 0;
}

int run_eval(const json& args, const std::string& dir) {
  UndirectedGraph g = GraphInput::load(args);
  model::Hyperparams hp = config::hyperparams_from_json(args.at("hyperparams"));
  model::ModelParams params = model::load_checkpoint(args.at("checkpoint").get<std::string>());
  std::string split = args.at("split").get<std::string>();

  const std::vector<std::uint8_t>* mask = nullptr;
  if (split == "train") mask = &g.train_mask;
  else if (split == "valid") mask = &g.valid_mask;
  else if (split == "test") mask = &g.test_mask;
  else throw IoError("unknown split \"" + split + "\" (expected train, valid, or test)");
  if (g.nodes_in_split(*mask).empty()) throw DomainError("split \"" + split + "\" is empty");

  BipartiteClusterGraph bip = build_bipartite(g, hp.n_global, hp.n_local);
  model::Metrics m = model::evaluate(params, g, bip, hp, *mask);

  write_manifest("eval", args, dir);
  json out = metric_json(m);
  out["split"] = split;
  config::save_json_file(out, join(dir, "eval.json"));
  std::cout << split << ": " << metric_line(m) << "\n";
  return 0;
}

int run_sinkhorn(const json& args, const std::string& dir) {
  Mat cost = config::load_matrix_csv(args.at("cost").get<std::string>());

  auto load_marginal = [](const std::string& path, int want, const char* side) {
    Mat m = config::load_matrix_csv(path);
    if (m.rows() != 1 && m.cols() != 1)
      throw IoError(std::string(side) + " marginals must be a single CSV row or column");
    ad::Vec v = m.rows() == 1 ? ad::Vec(m.row(0)) : ad::Vec(m.col(0));
    if (v.size() != want)
      throw ShapeError(std::string(side) + " marginals: expected " + std::to_string(want) +
                       " entries, found " + std::to_string(v.size()));
    return v;
  };
  ot::MarginalPair marg =
      ot::MarginalPair::uniform(static_cast<int>(cost.rows()), static_cast<int>(cost.cols()));
  std::string rp = args.at("row_marginals").get<std::string>();
  std::string cp = args.at("col_marginals").get<std::string>();
  if (!rp.empty()) marg.row = load_marginal(rp, static_cast<int>(cost.rows()), "row");
  if (!cp.empty()) marg.col = load_marginal(cp, static_cast<int>(cost.cols()), "col");
  marg.validate();

  double lambda = args.at("lambda").get<double>();
  double tol = args.at("tol").get<double>();
  double min_entry = args.at("min_entry").get<double>();
  int iterations = args.at("iterations").get<int>();
  int max_iters = args.at("max_iters").get<int>();
  bool to_convergence = args.at("to_convergence").get<bool>();
  bool stabilize = args.at("stabilize").get<bool>();

  ad::Tape tape;
  Tensor m = tape.leaf(cost, false);
  if (stabilize) m = ot::stabilize_cost(m);
  ot::Coupling c = to_convergence
                       ? ot::sinkhorn_to_convergence(m, marg, lambda, tol, max_iters, min_entry)
                       : ot::sinkhorn_knopp(m, marg, {lambda, iterations, min_entry});

  write_manifest("sinkhorn", args, dir);
  config::save_matrix_csv(c.p.values(), join(dir, "coupling.csv"));
  double cost_val = ot::transport_cost(c.p.values(), cost);
  json summary{{"transport_cost", cost_val},
               {"row_err", c.row_err},
               {"col_err", c.col_err},
               {"rows", cost.rows()},
               {"cols", cost.cols()},
               {"entropy", ot::entropy(c.p.values())}};
  config::save_json_file(summary, join(dir, "summary.json"));

  std::cout.precision(12);
  std::cout << "transport cost " << cost_val << "\n"
            << "marginal residuals: row " << c.row_err << "  col " << c.col_err << "\n";
  return 0;
}

int run_resistance(const json& args, const std::string& dir) {
  UndirectedGraph g = GraphInput::load(args);
  analysis::ResistanceReport rep = analysis::total_effective_resistance(g);

  write_manifest("resistance", args, dir);
  config::save_matrix_csv(rep.pairwise, join(dir, "pairwise.csv"));
  json summary{{"r_tot", rep.r_tot}, {"nodes", g.n}, {"edges", g.edges.size()}};

  int max_clusters = args.at("max_clusters").get<int>();
  if (max_clusters >= 0) {
    std::vector<int> counts;
    for (int i = 0; i <= max_clusters; ++i) counts.push_back(i);
    Mat heat = analysis::resistance_heatmap(g, counts, counts);
    config::save_matrix_csv(heat, join(dir, "heatmap.csv"));
    summary["heatmap_max_clusters"] = max_clusters;
  }
  config::save_json_file(summary, join(dir, "summary.json"));

  std::cout.precision(12);
  std::cout << "r_tot " << rep.r_tot << "\n";
  return 0;
}

int run_homophily(const json& args, const std::string& dir) {
  UndirectedGraph g = GraphInput::load(args);
  analysis::HomophilyMatrix h = analysis::homophily_matrix(g);

  write_manifest("homophily", args, dir);
  config::save_matrix_csv(h.h, join(dir, "homophily.csv"));
  config::save_json_file(json{{"edge_homophily", h.edge_homophily}, {"classes", h.h.rows()}},
                         join(dir, "summary.json"));

  std::cout.precision(12);
  std::cout << "edge homophily " << h.edge_homophily << "\n";
  return 0;
}

int run_generate(const json& args, const std::string& dir) {
  std::string kind = args.at("kind").get<std::string>();
  int n = args.at("n").get<int>();
  auto seed = args.at("seed").get<std::uint64_t>();

  UndirectedGraph g;
  if (kind == "erdos-renyi") {
    g = gen_erdos_renyi(n, args.at("p").get<double>(), seed);
  } else if (kind == "sbm") {
    g = gen_hetero_sbm(n, args.at("classes").get<int>(), args.at("p_in").get<double>(),
                       args.at("p_out").get<double>(), args.at("noise").get<double>(), seed);
    double tf = args.at("train_frac").get<double>();
    if (tf > 0) assign_random_splits(g, tf, args.at("valid_frac").get<double>(), seed + 1);
  } else if (kind == "tree-match") {
    g = gen_tree_neighbors_match(args.at("depth").get<int>(), seed);
  } else if (kind == "tree-forest") {
    g = gen_tree_neighbors_match_forest(args.at("depth").get<int>(), args.at("trees").get<int>(),
                                        seed);
  } else {
    throw IoError("unknown kind \"" + kind +
                  "\" (expected erdos-renyi, sbm, tree-match, or tree-forest)");
  }

  write_manifest("generate", args, dir);
  save_graph_json(g, join(dir, "graph.json"));
  std::ofstream edges(join(dir, "edges.csv"));
  if (!edges) throw IoError("cannot open file for writing: " + join(dir, "edges.csv"));
  for (const auto& e : g.edges) edges << e.first << ',' << e.second << '\n';
  if (!edges) throw IoError("failed while writing: " + join(dir, "edges.csv"));
  config::save_json_file(
      json{{"nodes", g.n}, {"edges", g.edges.size()}, {"classes", g.num_classes}},
      join(dir, "summary.json"));

  std::cout << "generated " << kind << ": " << g.n << " nodes, " << g.edges.size()
            << " edges\n";
  return 0;
}

int run_convergence_check(const json& args, const std::string& dir) {
  UndirectedGraph g = GraphInput::load(args);
  model::Hyperparams hp = config::hyperparams_from_json(args.at("hyperparams"));

  // the descent guarantee covers the plain update rule only
  if (hp.layer.use_message_transform || hp.layer.activation != dc::Activation::kNone ||
      hp.layer.layer_norm || hp.layer.message_dropout > 0)
    throw IoError(
        "convergence check covers the plain update rule only; "
        "disable message transforms, activation, layer norm, and message dropout");

  dc::LayerConfig cfg = hp.layer;
  cfg.stabilize_costs = false;       // the objective is defined on raw distances
  cfg.run_to_convergence = true;     // each assignment phase solved to tolerance
  cfg.grad_through_assignments = false;

  std::mt19937_64 rng(hp.seed);
  Mat x_val = g.has_features() ? g.features : random_uniform(g.n, args.at("d").get<int>(), rng);
  Mat table = random_uniform(hp.n_global, static_cast<int>(x_val.cols()), rng);

  BipartiteClusterGraph bip = build_bipartite(g, hp.n_global, hp.n_local);
  ad::Tape tape;
  Tensor x = tape.leaf(x_val, false);
  Tensor ct = tape.leaf(table, false);
  dc::MsgPassingResult res = dc_msgpassing(x, ct, bip, cfg, hp.layers, nullptr, true, nullptr);

  write_manifest("convergence-check", args, dir);
  {
    std::ofstream trace(join(dir, "trace.csv"));
    if (!trace) throw IoError("cannot open file for writing: " + join(dir, "trace.csv"));
    trace << "layer,global_term,local_term,fidelity_term,global_entropy,local_entropy,total\n";
    trace.precision(17);
    for (size_t i = 0; i < res.trace.size(); ++i) {
      const auto& t = res.trace[i];
      trace << i << ',' << t.global_term << ',' << t.local_term << ',' << t.fidelity_term << ','
            << t.global_entropy << ',' << t.local_entropy << ',' << t.total << '\n';
    }
    if (!trace) throw IoError("failed while writing: " + join(dir, "trace.csv"));
  }

  double settle_tol = args.at("settle_tol").get<double>();
  dc::ConvergenceVerdict v = dc::convergence_monitor(res.trace, settle_tol);
  double bound = dc::objective_lower_bound(bip, cfg.alpha, cfg.lambda);
  bool bounded = true;
  for (const auto& t : res.trace) bounded = bounded && t.total >= bound - 1e-9;
  bool pass = v.pass && bounded;

  json verdict{{"pass", pass},          {"monotone", v.monotone},
               {"settled", v.settled},  {"above_lower_bound", bounded},
               {"max_rise", v.max_rise}, {"final_delta", v.final_delta},
               {"lower_bound", bound},  {"final_total", res.trace.back().total},
               {"layers", static_cast<int>(res.trace.size())}};
  config::save_json_file(verdict, join(dir, "verdict.json"));

  std::cout.precision(12);
  std::cout << "objective " << res.trace.front().total << " -> " << res.trace.back().total
            << " over " << res.trace.size() << " layers (lower bound " << bound << ")\n"
            << "max rise " << v.max_rise << ", final delta " << v.final_delta << "\n"
            << (pass ? "convergence check passed\n" : "convergence check FAILED\n");
  return pass ? 0 : 1;
}

int run_gradcheck(const json& args, const std::string& dir) {
  model::Hyperparams hp = config::hyperparams_from_json(args.at("hyperparams"));
  int n = args.at("nodes").get<int>();
  double tol = args.at("tol").get<double>();
  double h = args.at("step").get<double>();

  // small labeled graph with noisy features; every parameter stays in play
  UndirectedGraph g = gen_hetero_sbm(n, 2, 0.6, 0.3, 0.4, hp.seed);
  assign_random_splits(g, 0.6, 0.2, hp.seed + 1);
  hp.validate(g.num_classes);
  BipartiteClusterGraph bip = build_bipartite(g, hp.n_global, hp.n_local);
  std::vector<int> train_nodes = g.nodes_in_split(g.train_mask);

  std::mt19937_64 rng(hp.seed);
  model::ModelParams params =
      model::ModelParams::init(static_cast<int>(g.features.cols()), g.num_classes, hp, rng);

  auto loss_on = [&](ad::Tape& tape, const model::ModelParams& p, bool with_grad) {
    model::BoundModel bound = model::bind(tape, p, hp, with_grad);
    model::ForwardResult fwd =
        model::forward(tape, bound, g.features, bip, hp, /*training=*/false, nullptr);
    Tensor loss = ad::cross_entropy(fwd.logits, g.labels, train_nodes);
    if (hp.omega1 > 0)
      loss = ad::add(loss, ad::scale(model::orthogonality_loss(bound.cluster_table), hp.omega1));
    if (hp.omega2 > 0)
      loss = ad::add(loss, ad::scale(model::similarity_loss(fwd.z_final, bound.cluster_table,
                                                            g.labels, g.num_classes, train_nodes),
                                     hp.omega2));
    return std::pair<model::BoundModel, Tensor>(bound, loss);
  };

  ad::Tape tape;
  auto [bound, loss] = loss_on(tape, params, true);
  ad::GradientMap grads = tape.backward(loss);

  // finite differences, one parameter tensor at a time
  json per_tensor = json::object();
  double worst = 0.0;
  std::string worst_name;
  int slot = 0;
  params.for_each([&](const std::string& name, const Mat& value) {
    auto value_at = [&](const Mat& candidate) {
      model::ModelParams probe = params;
      int k = 0;
      probe.for_each([&](const std::string&, Mat& m) {
        if (k == slot) m = candidate;
        ++k;
      });
      ad::Tape local;
      return loss_on(local, probe, false).second.scalar();
    };
    Mat numeric = ad::finite_diff_grad(value_at, value, h);
    const Mat* analytic = grads.find(bound.ordered[static_cast<size_t>(slot)]);
    Mat a = analytic ? *analytic : Mat::Zero(value.rows(), value.cols()).eval();
    double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
    double rel = (a - numeric).cwiseAbs().maxCoeff() / scale;
    per_tensor[name] = rel;
    if (rel > worst) {
      worst = rel;
      worst_name = name;
    }
    ++slot;
  });

  bool pass = worst < tol;
  write_manifest("gradcheck", args, dir);
  config::save_json_file(json{{"pass", pass},
                              {"tol", tol},
                              {"max_rel_err", worst},
                              {"worst_tensor", worst_name},
                              {"per_tensor", per_tensor}},
                         join(dir, "gradcheck.json"));

  std::cout.precision(6);
  std::cout << "max rel err " << worst << " (" << worst_name << "), tol " << tol << "\n"
            << (pass ? "gradient check passed\n" : "gradient check FAILED\n");
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// wiring

struct Common {
  std::string config, out_dir;
  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON config or a manifest from an earlier run");
    cmd->add_option("--out-dir", out_dir, "artifact directory (or env DCGNN_OUT_DIR)");
  }
};

void add_train(CLI::App& app, int& rc) {
  auto cmd = app.add_subcommand("train", "train a model on a labeled graph");
  auto common = std::make_shared<Common>();
  auto gi = std::make_shared<GraphInput>();
  auto hpf = std::make_shared<HpFlags>();
  common->attach(cmd);
  gi->attach(cmd);
  hpf->attach(cmd);
  cmd->callback([cmd, common, gi, hpf, &rc] {
    json args = GraphInput::defaults();
    args["hyperparams"] = config::hyperparams_to_json({});
    args = resolve_args("train", common->config, args);
    gi->apply(cmd, args);
    resolve_hyperparams(cmd, *hpf, args);
    rc = run_train(args, resolve_out_dir(common->out_dir));
  });
}

void add_eval(CLI::App& app, int& rc) {
  auto cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  auto common = std::make_shared<Common>();
  auto gi = std::make_shared<GraphInput>();
  auto hpf = std::make_shared<HpFlags>();
  auto checkpoint = std::make_shared<std::string>();
  auto split = std::make_shared<std::string>("test");
  common->attach(cmd);
  gi->attach(cmd);
  hpf->attach(cmd);
  cmd->add_option("--checkpoint", *checkpoint, "checkpoint JSON from train");
  cmd->add_option("--split", *split, "train, valid, or test");
  cmd->callback([cmd, common, gi, hpf, checkpoint, split, &rc] {
    json args = GraphInput::defaults();
    args["hyperparams"] = config::hyperparams_to_json({});
    args["checkpoint"] = "";
    args["split"] = "test";
    args = resolve_args("eval", common->config, args);
    gi->apply(cmd, args);
    resolve_hyperparams(cmd, *hpf, args);
    put_if_passed(cmd, "--checkpoint", *checkpoint, args, "checkpoint");
    put_if_passed(cmd, "--split", *split, args, "split");
    if (args.at("checkpoint").get<std::string>().empty())
      throw IoError("eval needs --checkpoint");
    rc = run_eval(args, resolve_out_dir(common->out_dir));
  });
}

void add_sinkhorn(CLI::App& app, int& rc) {
  auto cmd = app.add_subcommand("sinkhorn", "entropic transport between uniform or given marginals");
  auto common = std::make_shared<Common>();
  struct Opts {
    std::string cost, row_marginals, col_marginals;
    double lambda = 2.0, tol = 1e-9, min_entry = 1e-30;
    int iterations = 5, max_iters = 10000;
    bool to_convergence = false, stabilize = false;
  };
  auto o = std::make_shared<Opts>();
  common->attach(cmd);
  cmd->add_option("--cost", o->cost, "cost matrix CSV");
  cmd->add_option("--row-marginals", o->row_marginals, "row mass CSV (default uniform)");
  cmd->add_option("--col-marginals", o->col_marginals, "column mass CSV (default uniform)");
  cmd->add_option("--lambda", o->lambda, "entropic sharpness");
  cmd->add_option("--iterations", o->iterations, "fixed rescaling sweeps");
  cmd->add_flag("--to-convergence", o->to_convergence, "sweep until the residual target");
  cmd->add_option("--tol", o->tol, "residual target for --to-convergence");
  cmd->add_option("--max-iters", o->max_iters, "sweep cap for --to-convergence");
  cmd->add_option("--min-entry", o->min_entry, "kernel floor");
  cmd->add_flag("--stabilize", o->stabilize, "rescale the cost by its max first");
  cmd->callback([cmd, common, o, &rc] {
    json args{{"cost", ""},          {"row_marginals", ""},      {"col_marginals", ""},
              {"lambda", 2.0},       {"iterations", 5},          {"to_convergence", false},
              {"tol", 1e-9},         {"max_iters", 10000},       {"min_entry", 1e-30},
              {"stabilize", false}};
    args = resolve_args("sinkhorn", common->config, args);
    put_if_passed(cmd, "--cost", o->cost, args, "cost");
    put_if_passed(cmd, "--row-marginals", o->row_marginals, args, "row_marginals");
    put_if_passed(cmd, "--col-marginals", o->col_marginals, args, "col_marginals");
    put_if_passed(cmd, "--lambda", o->lambda, args, "lambda");
    put_if_passed(cmd, "--iterations", o->iterations, args, "iterations");
    put_if_passed(cmd, "--to-convergence", o->to_convergence, args, "to_convergence");
    put_if_passed(cmd, "--tol", o->tol, args, "tol");
    put_if_passed(cmd, "--max-iters", o->max_iters, args, "max_iters");
    put_if_passed(cmd, "--min-entry", o->min_entry, args, "min_entry");
    put_if_passed(cmd, "--stabilize", o->stabilize, args, "stabilize");
    if (args.at("cost").get<std::string>().empty()) throw IoError("sinkhorn needs --cost");
    rc = run_sinkhorn(args, resolve_out_dir(common->out_dir));
  });
}

void add_resistance(CLI::App& app, int& rc) {
  auto cmd = app.add_subcommand("resistance", "effective resistance diagnostics");
  auto common = std::make_shared<Common>();
  auto gi = std::make_shared<GraphInput>();
  auto max_clusters = std::make_shared<int>(-1);
  common->attach(cmd);
  gi->attach(cmd);
  cmd->add_option("--max-clusters", *max_clusters,
                  "also sweep cluster augmentations 0..M per side into heatmap.csv");
  cmd->callback([cmd, common, gi, max_clusters, &rc] {
    json args = GraphInput::defaults();
    args["max_clusters"] = -1;
    args = resolve_args("resistance", common->config, args);
    gi->apply(cmd, args);
    put_if_passed(cmd, "--max-clusters", *max_clusters, args, "max_clusters");
    rc = run_resistance(args, resolve_out_dir(common->out_dir));
  });
}

void add_homophily(CLI::App& app, int& rc) {
  auto cmd = app.add_subcommand("homophily", "class mixing matrix of a labeled graph");
  auto common = std::make_shared<Common>();
  auto gi = std::make_shared<GraphInput>();
  common->attach(cmd);
  gi->attach(cmd);
  cmd->callback([cmd, common, gi, &rc] {
    json args = GraphInput::defaults();
    args = resolve_args("homophily", common->config, args);
    gi->apply(cmd, args);
    rc = run_homophily(args, resolve_out_dir(common->out_dir));
  });
}

void add_generate(CLI::App& app, int& rc) {
  auto cmd = app.add_subcommand("generate", "synthetic graph generators");
  auto common = std::make_shared<Common>();
  struct Opts {
    std::string kind = "erdos-renyi";
    int n = 100, classes = 2, depth = 2, trees = 1;
    double p = 0.1, p_in = 0.05, p_out = 0.05, noise = 0.5, train_frac = 0.6, valid_frac = 0.2;
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  common->attach(cmd);
  cmd->add_option("--kind", o->kind, "erdos-renyi, sbm, tree-match, or tree-forest");
  cmd->add_option("--n", o->n, "nodes (erdos-renyi, sbm)");
  cmd->add_option("--p", o->p, "edge probability (erdos-renyi)");
  cmd->add_option("--classes", o->classes, "classes (sbm)");
  cmd->add_option("--p-in", o->p_in, "within-class edge probability (sbm)");
  cmd->add_option("--p-out", o->p_out, "cross-class edge probability (sbm)");
  cmd->add_option("--noise", o->noise, "feature noise level (sbm)");
  cmd->add_option("--depth", o->depth, "tree depth (tree-match, tree-forest)");
  cmd->add_option("--trees", o->trees, "trees in the forest (tree-forest)");
  cmd->add_option("--train-frac", o->train_frac, "training fraction (sbm; 0 skips splits)");
  cmd->add_option("--valid-frac", o->valid_frac, "validation fraction (sbm)");
  cmd->add_option("--seed", o->seed, "generator seed");
  cmd->callback([cmd, common, o, &rc] {
    json args{{"kind", "erdos-renyi"}, {"n", 100},        {"p", 0.1},
              {"classes", 2},          {"p_in", 0.05},    {"p_out", 0.05},
              {"noise", 0.5},          {"depth", 2},      {"trees", 1},
              {"train_frac", 0.6},     {"valid_frac", 0.2}, {"seed", 1}};
    args = resolve_args("generate", common->config, args);
    put_if_passed(cmd, "--kind", o->kind, args, "kind");
    put_if_passed(cmd, "--n", o->n, args, "n");
    put_if_passed(cmd, "--p", o->p, args, "p");
    put_if_passed(cmd, "--classes", o->classes, args, "classes");
    put_if_passed(cmd, "--p-in", o->p_in, args, "p_in");
    put_if_passed(cmd, "--p-out", o->p_out, args, "p_out");
    put_if_passed(cmd, "--noise", o->noise, args, "noise");
    put_if_passed(cmd, "--depth", o->depth, args, "depth");
    put_if_passed(cmd, "--trees", o->trees, args, "trees");
    put_if_passed(cmd, "--train-frac", o->train_frac, args, "train_frac");
    put_if_passed(cmd, "--valid-frac", o->valid_frac, args, "valid_frac");
    put_if_passed(cmd, "--seed", o->seed, args, "seed");
    rc = run_generate(args, resolve_out_dir(common->out_dir));
  });
}

void add_convergence_check(CLI::App& app, int& rc) {
  auto cmd = app.add_subcommand("convergence-check",
                                "verify the layer objective descends on a graph");
  auto common = std::make_shared<Common>();
  auto gi = std::make_shared<GraphInput>();
  auto hpf = std::make_shared<HpFlags>();
  auto d = std::make_shared<int>(8);
  auto settle_tol = std::make_shared<double>(1e-4);
  common->attach(cmd);
  gi->attach(cmd);
  hpf->attach(cmd);
  cmd->add_option("--d", *d, "embedding width when the graph has no features");
  cmd->add_option("--settle-tol", *settle_tol, "required closeness of the last two totals");
  cmd->callback([cmd, common, gi, hpf, d, settle_tol, &rc] {
    json args = GraphInput::defaults();
    model::Hyperparams base;
    base.layers = 20;  // long enough to flatten out on desk-size graphs
    args["hyperparams"] = config::hyperparams_to_json(base);
    args["d"] = 8;
    args["settle_tol"] = 1e-4;
    args = resolve_args("convergence-check", common->config, args);
    gi->apply(cmd, args);
    resolve_hyperparams(cmd, *hpf, args);
    put_if_passed(cmd, "--d", *d, args, "d");
    put_if_passed(cmd, "--settle-tol", *settle_tol, args, "settle_tol");
    rc = run_convergence_check(args, resolve_out_dir(common->out_dir));
  });
}

void add_gradcheck(CLI::App& app, int& rc) {
  auto cmd = app.add_subcommand("gradcheck",
                                "compare training gradients against finite differences");
  auto common = std::make_shared<Common>();
  auto hpf = std::make_shared<HpFlags>();
  auto nodes = std::make_shared<int>(6);
  auto tol = std::make_shared<double>(1e-3);
  auto step = std::make_shared<double>(1e-5);
  common->attach(cmd);
  hpf->attach(cmd);
  cmd->add_option("--nodes", *nodes, "size of the synthetic check graph");
  cmd->add_option("--tol", *tol, "max allowed relative error");
  cmd->add_option("--step", *step, "finite difference step");
  cmd->callback([cmd, common, hpf, nodes, tol, step, &rc] {
    model::Hyperparams base;
    base.hidden_channels = 4;  // keeps the finite difference sweep quick
    base.omega1 = 0.05;        // nonzero weights so both penalties are exercised
    base.omega2 = 0.1;
    json args{{"nodes", 6}, {"tol", 1e-3}, {"step", 1e-5}};
    args["hyperparams"] = config::hyperparams_to_json(base);
    args = resolve_args("gradcheck", common->config, args);
    resolve_hyperparams(cmd, *hpf, args);
    put_if_passed(cmd, "--nodes", *nodes, args, "nodes");
    put_if_passed(cmd, "--tol", *tol, args, "tol");
    put_if_passed(cmd, "--step", *step, args, "step");
    rc = run_gradcheck(args, resolve_out_dir(common->out_dir));
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentiable cluster message passing toolkit"};
  app.require_subcommand(1);

  int rc = 0;
  add_train(app, rc);
  add_eval(app, rc);
  add_sinkhorn(app, rc);
  add_resistance(app, rc);
  add_homophily(app, rc);
  add_generate(app, rc);
  add_convergence_check(app, rc);
  add_gradcheck(app, rc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int r = app.exit(e);
    return r == 0 ? 0 : 2;  // help exits clean, bad flags are input errors
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {  // shape and domain errors
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {  // file and config errors
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return rc;
}
