#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dcgnn/dc_layer.hpp"
#include "dcgnn/graph.hpp"
#include "dcgnn/tensor.hpp"

// Full node-classification model: MLP encoder, a stack of cluster
// message-passing layers, and a linear readout. Trained with Adam on
// cross entropy plus optional cluster-table penalties.

namespace dcgnn::model {

using ad::Mat;
using ad::Tape;
using ad::Tensor;

struct Hyperparams {
  dc::LayerConfig layer;
  int layers = 2;
  int hidden_channels = 16;
  int n_global = 4;  // shared cluster-nodes
  int n_local = 2;   // cluster-nodes per neighborhood
  int encoder_depth = 1;  // 1 = linear encoder, 2 adds a relu hidden layer
  double lr = 0.01;
  double weight_decay = 0.0;  // decoupled, applied to every parameter
  int epochs = 100;
  double dropout = 0.0;  // on encoded features while training
  double omega1 = 0.0;   // weight of the cluster-table orthogonality penalty
  double omega2 = 0.0;   // weight of the class-prototype similarity penalty
  std::uint64_t seed = 1;

  // num_classes = 0 skips the checks that need label information.
  void validate(int num_classes = 0) const;
};

// Plain parameter storage. Leaves for a training step are created by bind();
// the traversal order of for_each is the canonical parameter order shared by
// bind, gradient collection, Adam state, and checkpoints.
struct ModelParams {
  std::vector<Mat> enc_w, enc_b;
  Mat cluster_table;
  std::vector<Mat> tf_global, tf_local;  // empty unless message transforms are on
  Mat out_w, out_b;

  static ModelParams init(int in_dim, int num_classes, const Hyperparams& hp,
                          std::mt19937_64& rng);
  void for_each(const std::function<void(const std::string&, Mat&)>& fn);
  void for_each(const std::function<void(const std::string&, const Mat&)>& fn) const;
};

// Parameters entered on a tape, with role handles for the forward pass.
struct BoundModel {
  std::vector<Tensor> ordered;  // canonical order, see ModelParams::for_each
  std::vector<Tensor> enc_w, enc_b;
  Tensor cluster_table;
  std::vector<dc::LayerTransforms> transforms;
  Tensor out_w, out_b;
};

BoundModel bind(Tape& tape, const ModelParams& params, const Hyperparams& hp,
                bool requires_grad);

struct ForwardResult {
  Tensor logits;   // |V| x classes
  Tensor z_final;  // message-passing output before the readout
};

// Encoder -> feature dropout (training only) -> message-passing stack ->
// readout. Deterministic when training is false or rng is null.
ForwardResult forward(Tape& tape, const BoundModel& m, const Mat& features,
                      const BipartiteClusterGraph& bip, const Hyperparams& hp,
                      bool training, std::mt19937_64* rng);

// || G/||G||_F - I/sqrt(k) ||_F for the Gram matrix G of the cluster rows.
// Scale invariant; zero exactly when the rows are orthogonal with equal
// norms. Throws DomainError on an all-zero table.
Tensor orthogonality_loss(const Tensor& cluster_table);

// Contiguous equal-size blocks of the cluster table, one per class. For every
// labeled training node, take the best cosine similarity to each class block
// and combine them as s_own + log(sum over other classes of exp(-s)), averaged
// over training nodes and divided by the cluster count. Rows with norm below
// 1e-12 count as similarity zero.
Tensor similarity_loss(const Tensor& z, const Tensor& cluster_table,
                       const std::vector<int>& labels, int num_classes,
                       const std::vector<int>& train_nodes);

struct Metrics {
  double accuracy = 0.0;
  std::optional<double> roc_auc;  // binary tasks only
};

// Mann-Whitney AUC with ties resolved by average ranks. labels must be 0/1
// with both classes present.
double rank_auc(const std::vector<double>& scores, const std::vector<int>& labels);

Metrics evaluate(const ModelParams& params, const UndirectedGraph& g,
                 const BipartiteClusterGraph& bip, const Hyperparams& hp,
                 const std::vector<std::uint8_t>& split_mask);

struct AdamState {
  std::vector<Mat> m, v;
  long step = 0;
};

// Standard Adam with bias correction and decoupled weight decay. grads must
// follow the canonical parameter order; missing gradients are passed as
// zero matrices by the caller.
void adam_step(ModelParams& params, const std::vector<Mat>& grads, AdamState& state,
               double lr, double weight_decay, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0, ce = 0.0, ortho = 0.0, sim = 0.0;
  double val_metric = 0.0, test_metric = 0.0;
};

struct TrainResult {
  ModelParams params;  // best validation snapshot
  std::vector<EpochRow> history;
  int best_epoch = 0;
  Metrics best_val, best_test;
};

// Full-graph training. The graph must carry features, labels, and a nonempty
// training split; empty validation or test splits fall back to the training
// split. Selection metric is AUC for binary tasks, accuracy otherwise.
// Throws NumericError if the loss stops being finite.
TrainResult train(const UndirectedGraph& g, const Hyperparams& hp);

// epoch,train_loss,ce,ortho,sim,val_metric,test_metric
void write_metrics_csv(const std::string& path, const std::vector<EpochRow>& history);

// JSON tensor dump with shape headers; load rebuilds the parameter layout
// from the stored names.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace dcgnn::model
