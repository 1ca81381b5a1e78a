// Python bindings for the core operations: solvers, graph tools, the
// embedding layers, training, and the diagnostics.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <random>

#include "dcgnn/analysis.hpp"
#include "dcgnn/config.hpp"
#include "dcgnn/dc_layer.hpp"
#include "dcgnn/errors.hpp"
#include "dcgnn/graph.hpp"
#include "dcgnn/model.hpp"
#include "dcgnn/sinkhorn.hpp"
#include "dcgnn/tensor.hpp"

namespace py = pybind11;
using namespace dcgnn;
using ad::Mat;
using ad::Vec;

namespace {

ot::MarginalPair marginals_for(const Mat& cost, const std::optional<Vec>& row,
                               const std::optional<Vec>& col) {
  ot::MarginalPair marg = ot::MarginalPair::uniform(static_cast<int>(cost.rows()),
                                                    static_cast<int>(cost.cols()));
  if (row) marg.row = *row;
  if (col) marg.col = *col;
  marg.validate();
  return marg;
}

const std::vector<std::uint8_t>& split_mask(const UndirectedGraph& g, const std::string& split) {
  if (split == "train") return g.train_mask;
  if (split == "valid") return g.valid_mask;
  if (split == "test") return g.test_mask;
  throw DomainError("unknown split \"" + split + "\" (expected train, valid, or test)");
}

}  // namespace

PYBIND11_MODULE(_dcgnn, m) {
  m.doc() = "differentiable cluster message passing: solvers, graphs, training, diagnostics";

  // graphs ------------------------------------------------------------------
  py::class_<UndirectedGraph>(m, "Graph")
      .def(py::init<>())
      .def_readonly("n", &UndirectedGraph::n)
      .def_readonly("edges", &UndirectedGraph::edges)
      .def_readwrite("features", &UndirectedGraph::features)
      .def_readwrite("labels", &UndirectedGraph::labels)
      .def_readwrite("num_classes", &UndirectedGraph::num_classes)
      .def_readwrite("train_mask", &UndirectedGraph::train_mask)
      .def_readwrite("valid_mask", &UndirectedGraph::valid_mask)
      .def_readwrite("test_mask", &UndirectedGraph::test_mask)
      .def("degree", &UndirectedGraph::degree, py::arg("u"))
      .def("has_features", &UndirectedGraph::has_features)
      .def("has_labels", &UndirectedGraph::has_labels)
      .def("validate", &UndirectedGraph::validate)
      .def("__repr__", [](const UndirectedGraph& g) {
        return "Graph(" + std::to_string(g.n) + " nodes, " + std::to_string(g.edges.size()) +
               " edges)";
      });

  m.def("build_graph", &UndirectedGraph::build, py::arg("n"), py::arg("edges"),
        py::arg("strict") = false, "graph from an explicit edge list");
  m.def("load_graph_json", &load_graph_json, py::arg("path"), py::arg("strict") = false);
  m.def("save_graph_json", &save_graph_json, py::arg("graph"), py::arg("path"));
  m.def("gen_erdos_renyi", &gen_erdos_renyi, py::arg("n"), py::arg("p"), py::arg("seed"));
  m.def("gen_hetero_sbm", &gen_hetero_sbm, py::arg("n"), py::arg("classes"), py::arg("p_in"),
        py::arg("p_out"), py::arg("feature_noise"), py::arg("seed"),
        "two-block and beyond stochastic block model with noisy one-hot features");
  m.def("gen_tree_neighbors_match", &gen_tree_neighbors_match, py::arg("depth"), py::arg("seed"));
  m.def("gen_tree_neighbors_match_forest", &gen_tree_neighbors_match_forest, py::arg("depth"),
        py::arg("trees"), py::arg("seed"));
  m.def("assign_random_splits", &assign_random_splits, py::arg("graph"), py::arg("train_frac"),
        py::arg("valid_frac"), py::arg("seed"));

  // transport solver --------------------------------------------------------
  m.def(
      "sinkhorn",
      [](const Mat& cost, double lam, int iterations, bool to_convergence, double tol,
         int max_iters, double min_entry, const std::optional<Vec>& row_marginals,
         const std::optional<Vec>& col_marginals, bool stabilize) {
        ot::MarginalPair marg = marginals_for(cost, row_marginals, col_marginals);
        ad::Tape tape;
        ad::Tensor mt = tape.leaf(cost, false);
        if (stabilize) mt = ot::stabilize_cost(mt);
        ot::Coupling c =
            to_convergence
                ? ot::sinkhorn_to_convergence(mt, marg, lam, tol, max_iters, min_entry)
                : ot::sinkhorn_knopp(mt, marg, {lam, iterations, min_entry});
        return py::make_tuple(Mat(c.p.values()), c.row_err, c.col_err);
      },
      py::arg("cost"), py::arg("lam") = 2.0, py::arg("iterations") = 5,
      py::arg("to_convergence") = false, py::arg("tol") = 1e-9, py::arg("max_iters") = 10000,
      py::arg("min_entry") = 1e-30, py::arg("row_marginals") = std::nullopt,
      py::arg("col_marginals") = std::nullopt, py::arg("stabilize") = false,
      "entropic coupling as (plan, row_err, col_err); marginals default to uniform");

  m.def(
      "ot_lp",
      [](const Mat& cost, const std::optional<Vec>& row_marginals,
         const std::optional<Vec>& col_marginals) {
        ot::LpSolution sol = ot::ot_lp_oracle(cost, marginals_for(cost, row_marginals, col_marginals));
        return py::make_tuple(sol.cost, sol.plan);
      },
      py::arg("cost"), py::arg("row_marginals") = std::nullopt,
      py::arg("col_marginals") = std::nullopt,
      "exact transport optimum as (cost, plan), for small instances");

  m.def("transport_cost", &ot::transport_cost, py::arg("plan"), py::arg("cost"));
  m.def("entropy", &ot::entropy, py::arg("plan"));

  // embedding layers --------------------------------------------------------
  py::class_<dc::LayerConfig>(m, "LayerConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &dc::LayerConfig::alpha)
      .def_readwrite("beta", &dc::LayerConfig::beta)
      .def_readwrite("lam", &dc::LayerConfig::lambda)
      .def_readwrite("t_global", &dc::LayerConfig::t_global)
      .def_readwrite("t_local", &dc::LayerConfig::t_local)
      .def_readwrite("use_message_transform", &dc::LayerConfig::use_message_transform)
      .def_readwrite("stabilize_costs", &dc::LayerConfig::stabilize_costs)
      .def_readwrite("grad_through_assignments", &dc::LayerConfig::grad_through_assignments)
      .def_readwrite("run_to_convergence", &dc::LayerConfig::run_to_convergence)
      .def_readwrite("convergence_tol", &dc::LayerConfig::convergence_tol)
      .def_readwrite("min_entry", &dc::LayerConfig::min_entry)
      .def_readwrite("message_dropout", &dc::LayerConfig::message_dropout)
      .def_readwrite("layer_norm", &dc::LayerConfig::layer_norm)
      .def_property(
          "activation",
          [](const dc::LayerConfig& c) { return config::activation_to_name(c.activation); },
          [](dc::LayerConfig& c, const std::string& s) {
            c.activation = config::activation_from_name(s);
          })
      .def_property(
          "aggregation",
          [](const dc::LayerConfig& c) { return config::aggregation_to_name(c.aggregation); },
          [](dc::LayerConfig& c, const std::string& s) {
            c.aggregation = config::aggregation_from_name(s);
          })
      .def("validate", &dc::LayerConfig::validate);

  py::class_<dc::ObjectiveBreakdown>(m, "ObjectiveBreakdown")
      .def_readonly("global_term", &dc::ObjectiveBreakdown::global_term)
      .def_readonly("local_term", &dc::ObjectiveBreakdown::local_term)
      .def_readonly("fidelity_term", &dc::ObjectiveBreakdown::fidelity_term)
      .def_readonly("global_entropy", &dc::ObjectiveBreakdown::global_entropy)
      .def_readonly("local_entropy", &dc::ObjectiveBreakdown::local_entropy)
      .def_readonly("total", &dc::ObjectiveBreakdown::total)
      .def("__repr__", [](const dc::ObjectiveBreakdown& b) {
        return "ObjectiveBreakdown(total=" + std::to_string(b.total) + ")";
      });

  m.def(
      "dc_embed",
      [](const UndirectedGraph& g, const Mat& features, const Mat& cluster_table, int n_local,
         const dc::LayerConfig& cfg, int layers, bool monitor,
         std::optional<std::uint64_t> dropout_seed) {
        BipartiteClusterGraph bip =
            build_bipartite(g, static_cast<int>(cluster_table.rows()), n_local);
        ad::Tape tape;
        ad::Tensor x = tape.leaf(features, false);
        ad::Tensor ct = tape.leaf(cluster_table, false);
        std::mt19937_64 rng(dropout_seed.value_or(0));
        dc::MsgPassingResult res = dc::dc_msgpassing(x, ct, bip, cfg, layers, nullptr, monitor,
                                                     dropout_seed ? &rng : nullptr);
        return py::make_tuple(Mat(res.state.z.values()), res.trace);
      },
      py::arg("graph"), py::arg("features"), py::arg("cluster_table"), py::arg("n_local") = 2,
      py::arg("config") = dc::LayerConfig{}, py::arg("layers") = 2, py::arg("monitor") = false,
      py::arg("dropout_seed") = std::nullopt,
      "runs the cluster message passing layers; returns (embeddings, per-layer objective trace)");

  m.def(
      "objective_lower_bound",
      [](const UndirectedGraph& g, int n_global, int n_local, double alpha, double lam) {
        return dc::objective_lower_bound(build_bipartite(g, n_global, n_local), alpha, lam);
      },
      py::arg("graph"), py::arg("n_global"), py::arg("n_local"), py::arg("alpha"), py::arg("lam"),
      "entropy floor of the layer objective for the given cluster layout");

  // training ----------------------------------------------------------------
  py::class_<model::Hyperparams>(m, "Hyperparams")
      .def(py::init<>())
      .def_readwrite("layer", &model::Hyperparams::layer)
      .def_readwrite("layers", &model::Hyperparams::layers)
      .def_readwrite("hidden_channels", &model::Hyperparams::hidden_channels)
      .def_readwrite("n_global", &model::Hyperparams::n_global)
      .def_readwrite("n_local", &model::Hyperparams::n_local)
      .def_readwrite("encoder_depth", &model::Hyperparams::encoder_depth)
      .def_readwrite("lr", &model::Hyperparams::lr)
      .def_readwrite("weight_decay", &model::Hyperparams::weight_decay)
      .def_readwrite("epochs", &model::Hyperparams::epochs)
      .def_readwrite("dropout", &model::Hyperparams::dropout)
      .def_readwrite("omega1", &model::Hyperparams::omega1)
      .def_readwrite("omega2", &model::Hyperparams::omega2)
      .def_readwrite("seed", &model::Hyperparams::seed)
      .def("validate", &model::Hyperparams::validate, py::arg("num_classes") = 0);

  py::class_<model::Metrics>(m, "Metrics")
      .def_readonly("accuracy", &model::Metrics::accuracy)
      .def_readonly("roc_auc", &model::Metrics::roc_auc)
      .def("__repr__", [](const model::Metrics& mm) {
        std::string s = "Metrics(accuracy=" + std::to_string(mm.accuracy);
        if (mm.roc_auc) s += ", roc_auc=" + std::to_string(*mm.roc_auc);
        return s + ")";
      });

  py::class_<model::EpochRow>(m, "EpochRow")
      .def_readonly("epoch", &model::EpochRow::epoch)
      .def_readonly("train_loss", &model::EpochRow::train_loss)
      .def_readonly("ce", &model::EpochRow::ce)
      .def_readonly("ortho", &model::EpochRow::ortho)
      .def_readonly("sim", &model::EpochRow::sim)
      .def_readonly("val_metric", &model::EpochRow::val_metric)
      .def_readonly("test_metric", &model::EpochRow::test_metric);

  py::class_<model::ModelParams>(m, "ModelParams")
      .def("save", [](const model::ModelParams& p,
                      const std::string& path) { model::save_checkpoint(path, p); },
           py::arg("path"));
  m.def("load_checkpoint", &model::load_checkpoint, py::arg("path"));

  py::class_<model::TrainResult>(m, "TrainResult")
      .def_readonly("params", &model::TrainResult::params)
      .def_readonly("history", &model::TrainResult::history)
      .def_readonly("best_epoch", &model::TrainResult::best_epoch)
      .def_readonly("best_val", &model::TrainResult::best_val)
      .def_readonly("best_test", &model::TrainResult::best_test);

  m.def("train", &model::train, py::arg("graph"), py::arg("hyperparams"),
        "full-graph training; returns the best validation snapshot and the epoch history");
  m.def(
      "evaluate",
      [](const model::ModelParams& params, const UndirectedGraph& g,
         const model::Hyperparams& hp, const std::string& split) {
        BipartiteClusterGraph bip = build_bipartite(g, hp.n_global, hp.n_local);
        return model::evaluate(params, g, bip, hp, split_mask(g, split));
      },
      py::arg("params"), py::arg("graph"), py::arg("hyperparams"), py::arg("split") = "test");

  // diagnostics -------------------------------------------------------------
  m.def("effective_resistance", &analysis::effective_resistance, py::arg("graph"), py::arg("u"),
        py::arg("v"));
  m.def(
      "total_effective_resistance",
      [](const UndirectedGraph& g, int n_tracked) {
        analysis::ResistanceReport r = analysis::total_effective_resistance(g, n_tracked);
        return py::make_tuple(r.pairwise, r.r_tot);
      },
      py::arg("graph"), py::arg("n_tracked") = -1,
      "all-pairs effective resistances and their tracked-pair total");
  m.def("resistance_heatmap", &analysis::resistance_heatmap, py::arg("graph"),
        py::arg("global_counts"), py::arg("local_counts"),
        "total resistance after cluster augmentation; rows follow local counts");
  m.def(
      "homophily_matrix",
      [](const UndirectedGraph& g) {
        analysis::HomophilyMatrix h = analysis::homophily_matrix(g);
        return py::make_tuple(h.h, h.edge_homophily);
      },
      py::arg("graph"), "(class mixing matrix, fraction of same-label edge ends)");
  m.def("dirichlet_energy", &analysis::dirichlet_energy, py::arg("z"), py::arg("graph"));
  m.def("connected_components", &analysis::connected_components, py::arg("graph"));
}
