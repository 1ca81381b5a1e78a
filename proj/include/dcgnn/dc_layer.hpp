#pragma once

#include <optional>
#include <random>
#include <vector>

#include "dcgnn/graph.hpp"
#include "dcgnn/sinkhorn.hpp"
#include "dcgnn/tensor.hpp"

namespace dcgnn::dc {

using ad::Mat;
using ad::Tensor;
using ad::Vec;

enum class Activation { kNone, kTanh };
enum class Aggregation {
  kWeighted,  // per-row normalizer derived from the objective; exact closed form
  kSum        // unit local weight per row (experimental; exact on regular graphs)
};

struct LayerConfig {
  double alpha = 0.5;    // balance between shared clusters and per-node clusters
  double beta = 0.5;     // pull toward the anchor features
  double lambda = 2.0;   // entropic sharpness of the assignment solver
  int t_global = 5;      // rescaling steps for the shared assignment
  int t_local = 5;       // rescaling steps for each per-node assignment
  bool use_message_transform = false;
  Activation activation = Activation::kNone;
  Aggregation aggregation = Aggregation::kWeighted;
  bool stabilize_costs = true;        // divide costs by their max before exp
  bool grad_through_assignments = true;
  bool run_to_convergence = false;    // iterate the solver until residual < tol
  double convergence_tol = 1e-9;
  double min_entry = 1e-30;
  double message_dropout = 0.0;  // applied to messages; active only with an rng
  bool layer_norm = false;       // row-normalize messages after activation
  void validate() const;
};

// node embeddings plus the shared and per-node cluster embeddings
struct EmbeddingState {
  Tensor z;                     // |V| x d
  Tensor c_global;              // |Omega| x d
  std::vector<Tensor> c_local;  // node i: |Gamma| x d
  Tensor x;                     // anchor features, |V| x d
};

struct AssignmentState {
  ot::Coupling p_global;               // |V| x |Omega|
  std::vector<ot::Coupling> p_local;   // node i: |N_i^+| x |Gamma|
  double max_marginal_error() const;
};

// every term of the clustering objective, evaluated on raw squared distances
struct ObjectiveBreakdown {
  double global_term = 0.0;
  double local_term = 0.0;
  double fidelity_term = 0.0;
  double global_entropy = 0.0;
  double local_entropy = 0.0;
  double total = 0.0;
};

// optional learnable mixing of the two message streams, owned by the caller
struct LayerTransforms {
  std::optional<Tensor> w_global;  // d x d
  std::optional<Tensor> w_local;   // d x d
};

// Solves the entropic assignment problems for the current embeddings: one
// shared |V| x |Omega| coupling and one small coupling per ego-neighborhood.
AssignmentState assignment_update(const EmbeddingState& emb, const BipartiteClusterGraph& bip,
                                  const LayerConfig& cfg);

// Closed-form refit of cluster embeddings: each cluster row becomes the
// assignment-weighted mean of its members.
void cluster_update(const AssignmentState& assign, EmbeddingState& emb,
                    const BipartiteClusterGraph& bip);

// Closed-form refit of node embeddings: per row a convex-like combination of
// the anchor, the shared-cluster message and the scattered local messages.
// Transforms, activation, dropout and layer norm apply to the messages only;
// pass rng to enable dropout (training mode).
void node_update(const AssignmentState& assign, EmbeddingState& emb,
                 const BipartiteClusterGraph& bip, const LayerConfig& cfg,
                 const LayerTransforms* transforms = nullptr, std::mt19937_64* rng = nullptr);

// Evaluates every objective term at the given state, on raw distances and
// plain values (no tape traffic).
ObjectiveBreakdown objective(const EmbeddingState& emb, const AssignmentState& assign,
                             const BipartiteClusterGraph& bip, const LayerConfig& cfg);

// Entropy floor of the objective: the distance terms are nonnegative and each
// coupling's entropy is at most the log of its cell count.
double objective_lower_bound(const BipartiteClusterGraph& bip, double alpha, double lambda);

struct MsgPassingResult {
  EmbeddingState state;
  std::vector<ObjectiveBreakdown> trace;  // one entry per layer when monitored
};

// Runs `layers` rounds of assignment + cluster + node updates starting from
// z = x, with per-node clusters seeded by blends of each node's features and
// its neighbor mean. `transforms`, when given, must hold one entry per layer.
MsgPassingResult dc_msgpassing(const Tensor& x, const Tensor& cluster_table,
                               const BipartiteClusterGraph& bip, const LayerConfig& cfg,
                               int layers, const std::vector<LayerTransforms>* transforms = nullptr,
                               bool monitor = false, std::mt19937_64* rng = nullptr);

struct ConvergenceVerdict {
  bool monotone = false;  // no step rises by more than 1e-6
  bool settled = false;   // last two totals within settle_tol
  bool pass = false;
  double max_rise = 0.0;
  double final_delta = 0.0;
};

ConvergenceVerdict convergence_monitor(const std::vector<ObjectiveBreakdown>& trace,
                                       double settle_tol = 1e-6);

}  // namespace dcgnn::dc
