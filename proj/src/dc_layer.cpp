#include "dcgnn/dc_layer.hpp"

#include <cmath>
#include <string>

#include "dcgnn/errors.hpp"

namespace dcgnn::dc {

void LayerConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) throw DomainError("alpha must lie in [0,1]");
  if (beta < 0.0) throw DomainError("beta must be nonnegative");
  if (lambda <= 0.0) throw DomainError("lambda must be positive");
  if (t_global < 1 || t_local < 1) throw DomainError("rescaling step counts must be at least 1");
  if (convergence_tol <= 0.0) throw DomainError("convergence tolerance must be positive");
  if (min_entry <= 0.0) throw DomainError("entry floor must be positive");
  if (message_dropout < 0.0 || message_dropout >= 1.0)
    throw DomainError("message dropout must lie in [0,1)");
}

double AssignmentState::max_marginal_error() const {
  double worst = std::max(p_global.row_err, p_global.col_err);
  for (const auto& c : p_local) worst = std::max({worst, c.row_err, c.col_err});
  return worst;
}

namespace {

ot::Coupling solve_assignment(const Tensor& cost, const ot::MarginalPair& marg,
                              const LayerConfig& cfg, int fixed_steps) {
  Tensor m = cfg.stabilize_costs ? ot::stabilize_cost(cost) : cost;
  if (cfg.run_to_convergence)
    return ot::sinkhorn_to_convergence(m, marg, cfg.lambda, cfg.convergence_tol, 100000,
                                       cfg.min_entry);
  return ot::sinkhorn_knopp(m, marg, {cfg.lambda, fixed_steps, cfg.min_entry});
}

void check_layer_graph(const BipartiteClusterGraph& bip) {
  if (bip.n_global < 1 || bip.n_local < 1)
    throw DomainError("message passing needs at least one shared and one per-node cluster");
}

// per-row weight of the local message stream in the update denominator
Vec local_weights(const BipartiteClusterGraph& bip, Aggregation agg) {
  Vec sigma = Vec::Ones(bip.n);
  if (agg == Aggregation::kWeighted) {
    sigma.setZero();
    for (int u = 0; u < bip.n; ++u) {
      double w = 1.0 / bip.ego_size(u);
      for (int i : bip.ego[u]) sigma(i) += w;
    }
  }
  return sigma;
}

Tensor dress_message(Tensor msg, const std::optional<Tensor>& transform, const LayerConfig& cfg,
                     std::mt19937_64* rng) {
  if (cfg.use_message_transform && transform) msg = ad::matmul(msg, *transform);
  if (cfg.activation == Activation::kTanh) msg = ad::tanh(msg);
  if (cfg.layer_norm) msg = ad::layer_norm_rows(msg);
  if (cfg.message_dropout > 0.0 && rng != nullptr) {
    std::bernoulli_distribution keep(1.0 - cfg.message_dropout);
    Mat mask(msg.rows(), msg.cols());
    for (int i = 0; i < mask.rows(); ++i)
      for (int j = 0; j < mask.cols(); ++j)
        mask(i, j) = keep(*rng) ? 1.0 / (1.0 - cfg.message_dropout) : 0.0;
    msg = ad::hadamard(msg, msg.tape()->leaf(mask, false));
  }
  return msg;
}

}  // namespace

AssignmentState assignment_update(const EmbeddingState& emb, const BipartiteClusterGraph& bip,
                                  const LayerConfig& cfg) {
  cfg.validate();
  check_layer_graph(bip);
  if (!emb.z.values().allFinite() || !emb.c_global.values().allFinite())
    throw NumericError("assignment update fed non-finite embeddings");
  if (emb.z.rows() != bip.n) throw ShapeError("embedding row count does not match the graph");
  if (static_cast<int>(emb.c_local.size()) != bip.n)
    throw ShapeError("one per-node cluster block required per node");

  AssignmentState out;
  out.p_global = solve_assignment(ad::pairwise_sq_dist(emb.z, emb.c_global),
                                  ot::MarginalPair::uniform(bip.n, bip.n_global), cfg,
                                  cfg.t_global);
  out.p_local.reserve(bip.n);
  for (int u = 0; u < bip.n; ++u) {
    Tensor zu = ad::gather_rows(emb.z, bip.ego[u]);
    out.p_local.push_back(solve_assignment(
        ad::pairwise_sq_dist(zu, emb.c_local[u]),
        ot::MarginalPair::uniform(bip.ego_size(u), bip.n_local), cfg, cfg.t_local));
  }
  if (!cfg.grad_through_assignments) {
    out.p_global.p = ad::detach(out.p_global.p);
    for (auto& c : out.p_local) c.p = ad::detach(c.p);
  }
  return out;
}

void cluster_update(const AssignmentState& assign, EmbeddingState& emb,
                    const BipartiteClusterGraph& bip) {
  check_layer_graph(bip);
  emb.c_global = ad::scale(ad::matmul(ad::transpose(assign.p_global.p), emb.z),
                           static_cast<double>(bip.n_global));
  for (int u = 0; u < bip.n; ++u) {
    Tensor zu = ad::gather_rows(emb.z, bip.ego[u]);
    emb.c_local[u] = ad::scale(ad::matmul(ad::transpose(assign.p_local[u].p), zu),
                               static_cast<double>(bip.n_local));
  }
}

void node_update(const AssignmentState& assign, EmbeddingState& emb,
                 const BipartiteClusterGraph& bip, const LayerConfig& cfg,
                 const LayerTransforms* transforms, std::mt19937_64* rng) {
  cfg.validate();
  check_layer_graph(bip);
  const int n = bip.n;

  Tensor g_msg = ad::matmul(assign.p_global.p, emb.c_global);
  std::vector<Tensor> parts;
  std::vector<int> targets;
  parts.reserve(n);
  for (int u = 0; u < n; ++u) {
    parts.push_back(ad::matmul(assign.p_local[u].p, emb.c_local[u]));
    targets.insert(targets.end(), bip.ego[u].begin(), bip.ego[u].end());
  }
  Tensor l_msg = ad::scatter_rows(ad::concat_rows(parts), targets, n);

  g_msg = dress_message(g_msg, transforms ? transforms->w_global : std::nullopt, cfg, rng);
  l_msg = dress_message(l_msg, transforms ? transforms->w_local : std::nullopt, cfg, rng);

  Tensor combined = ad::add(ad::add(ad::scale(g_msg, cfg.alpha), ad::scale(l_msg, 1.0 - cfg.alpha)),
                            ad::scale(emb.x, cfg.beta));
  Vec sigma = local_weights(bip, cfg.aggregation);
  Vec inv(n);
  for (int i = 0; i < n; ++i)
    inv(i) = 1.0 / (cfg.alpha / n + cfg.beta + (1.0 - cfg.alpha) * sigma(i));
  emb.z = ad::scale_rows(combined, inv);
}

ObjectiveBreakdown objective(const EmbeddingState& emb, const AssignmentState& assign,
                             const BipartiteClusterGraph& bip, const LayerConfig& cfg) {
  cfg.validate();
  check_layer_graph(bip);
  const Mat& z = emb.z.values();
  const Mat& cg = emb.c_global.values();
  const Mat& pg = assign.p_global.p.values();

  ObjectiveBreakdown out;
  for (int i = 0; i < bip.n; ++i)
    for (int j = 0; j < bip.n_global; ++j)
      out.global_term += pg(i, j) * (z.row(i) - cg.row(j)).squaredNorm();
  out.global_entropy = ot::entropy(pg);

  for (int u = 0; u < bip.n; ++u) {
    const Mat& pu = assign.p_local[u].p.values();
    const Mat& cu = emb.c_local[u].values();
    for (int a = 0; a < bip.ego_size(u); ++a)
      for (int j = 0; j < bip.n_local; ++j)
        out.local_term += pu(a, j) * (z.row(bip.ego[u][a]) - cu.row(j)).squaredNorm();
    out.local_entropy += ot::entropy(pu);
  }
  out.fidelity_term = (z - emb.x.values()).squaredNorm();
  out.total = cfg.alpha * out.global_term + (1.0 - cfg.alpha) * out.local_term +
              cfg.beta * out.fidelity_term - cfg.alpha / cfg.lambda * out.global_entropy -
              (1.0 - cfg.alpha) / cfg.lambda * out.local_entropy;
  return out;
}

double objective_lower_bound(const BipartiteClusterGraph& bip, double alpha, double lambda) {
  check_layer_graph(bip);
  if (alpha < 0.0 || alpha > 1.0) throw DomainError("alpha must lie in [0,1]");
  if (lambda <= 0.0) throw DomainError("lambda must be positive");
  double bound = alpha / lambda * std::log(1.0 / (static_cast<double>(bip.n) * bip.n_global));
  for (int i = 0; i < bip.n; ++i)
    bound += (1.0 - alpha) / lambda *
             std::log(1.0 / (static_cast<double>(bip.ego_size(i)) * bip.n_local));
  return bound;
}

MsgPassingResult dc_msgpassing(const Tensor& x, const Tensor& cluster_table,
                               const BipartiteClusterGraph& bip, const LayerConfig& cfg,
                               int layers, const std::vector<LayerTransforms>* transforms,
                               bool monitor, std::mt19937_64* rng) {
  cfg.validate();
  check_layer_graph(bip);
  if (layers < 1) throw DomainError("at least one layer required");
  if (x.rows() != bip.n) throw ShapeError("feature rows do not match the node count");
  if (cluster_table.rows() != bip.n_global || cluster_table.cols() != x.cols())
    throw ShapeError("cluster table must be cluster-count x feature-dim");
  if (x.tape() != cluster_table.tape())
    throw ShapeError("features and cluster table must live on one tape");
  if (cfg.use_message_transform && !transforms)
    throw DomainError("transforms requested but none supplied");
  if (cfg.use_message_transform && static_cast<int>(transforms->size()) != layers)
    throw ShapeError("one transform set per layer required");

  EmbeddingState st;
  st.x = x;
  st.z = x;
  st.c_global = cluster_table;
  st.c_local.reserve(bip.n);
  ad::Tape* tape = x.tape();
  for (int u = 0; u < bip.n; ++u) {
    // rows blend the node's own features into its neighborhood mean
    int ego = bip.ego_size(u), deg = ego - 1;
    Mat w = Mat::Zero(bip.n_local, ego);
    for (int k = 0; k < bip.n_local; ++k) {
      double t = bip.n_local == 1 ? 0.0 : static_cast<double>(k) / (bip.n_local - 1);
      if (deg == 0) {
        w(k, 0) = 1.0;
      } else {
        w(k, 0) = 1.0 - t;
        for (int a = 1; a < ego; ++a) w(k, a) = t / deg;
      }
    }
    st.c_local.push_back(ad::matmul(tape->leaf(w, false), ad::gather_rows(x, bip.ego[u])));
  }

  MsgPassingResult out;
  for (int layer = 0; layer < layers; ++layer) {
    AssignmentState assign = assignment_update(st, bip, cfg);
    cluster_update(assign, st, bip);
    const LayerTransforms* tf =
        (cfg.use_message_transform && transforms) ? &(*transforms)[layer] : nullptr;
    node_update(assign, st, bip, cfg, tf, rng);
    if (monitor) out.trace.push_back(objective(st, assign, bip, cfg));
  }
  out.state = st;
  return out;
}

ConvergenceVerdict convergence_monitor(const std::vector<ObjectiveBreakdown>& trace,
                                       double settle_tol) {
  if (settle_tol <= 0.0) throw DomainError("settle tolerance must be positive");
  ConvergenceVerdict v;
  v.monotone = true;
  v.settled = true;
  if (trace.size() >= 2) {
    for (size_t t = 0; t + 1 < trace.size(); ++t)
      v.max_rise = std::max(v.max_rise, trace[t + 1].total - trace[t].total);
    v.monotone = v.max_rise <= 1e-6;
    v.final_delta = std::abs(trace.back().total - trace[trace.size() - 2].total);
    v.settled = v.final_delta < settle_tol;
  }
  v.pass = v.monotone && v.settled;
  return v;
}

}  // namespace dcgnn::dc
