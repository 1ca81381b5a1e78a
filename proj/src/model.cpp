#include "dcgnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dcgnn/errors.hpp"

namespace dcgnn::model {

using json = nlohmann::json;

void Hyperparams::validate(int num_classes) const {
  layer.validate();
  if (layers < 1) throw DomainError("model needs at least one message-passing layer");
  if (hidden_channels < 1) throw DomainError("hidden_channels must be at least 1");
  if (n_global < 1 || n_local < 1) throw DomainError("cluster counts must be at least 1");
  if (encoder_depth != 1 && encoder_depth != 2)
    throw DomainError("encoder_depth must be 1 or 2");
  if (lr <= 0.0) throw DomainError("learning rate must be positive");
  if (weight_decay < 0.0) throw DomainError("weight decay must be nonnegative");
  if (epochs < 1) throw DomainError("epochs must be at least 1");
  if (dropout < 0.0 || dropout >= 1.0) throw DomainError("dropout must lie in [0, 1)");
  if (omega1 < 0.0 || omega2 < 0.0) throw DomainError("penalty weights must be nonnegative");
  if (omega2 > 0.0 && num_classes > 0) {
    if (num_classes < 2) throw DomainError("similarity penalty needs at least two classes");
    if (n_global % num_classes != 0)
      throw DomainError("n_global must be a multiple of the class count when omega2 > 0");
  }
}

namespace {

Mat uniform_init(std::mt19937_64& rng, int rows, int cols, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

}  // namespace

ModelParams ModelParams::init(int in_dim, int num_classes, const Hyperparams& hp,
                              std::mt19937_64& rng) {
  if (in_dim < 1) throw DomainError("feature dimension must be at least 1");
  if (num_classes < 2) throw DomainError("need at least two classes");
  ModelParams p;
  int h = hp.hidden_channels;
  int fan = in_dim;
  for (int k = 0; k < hp.encoder_depth; ++k) {
    p.enc_w.push_back(uniform_init(rng, fan, h, 1.0 / std::sqrt(static_cast<double>(fan))));
    p.enc_b.push_back(Mat::Zero(1, h));
    fan = h;
  }
  p.cluster_table = uniform_init(rng, hp.n_global, h, 1.0 / std::sqrt(static_cast<double>(h)));
  if (hp.layer.use_message_transform) {
    for (int l = 0; l < hp.layers; ++l) {
      p.tf_global.push_back(Mat(Mat::Identity(h, h)) + uniform_init(rng, h, h, 0.01));
      p.tf_local.push_back(Mat(Mat::Identity(h, h)) + uniform_init(rng, h, h, 0.01));
    }
  }
  p.out_w = uniform_init(rng, h, num_classes, 1.0 / std::sqrt(static_cast<double>(h)));
  p.out_b = Mat::Zero(1, num_classes);
  return p;
}

void ModelParams::for_each(const std::function<void(const std::string&, Mat&)>& fn) {
  for (size_t k = 0; k < enc_w.size(); ++k) {
    fn("enc_w" + std::to_string(k), enc_w[k]);
    fn("enc_b" + std::to_string(k), enc_b[k]);
  }
  fn("cluster_table", cluster_table);
  for (size_t l = 0; l < tf_global.size(); ++l) {
    fn("tf_global" + std::to_string(l), tf_global[l]);
    fn("tf_local" + std::to_string(l), tf_local[l]);
  }
  fn("out_w", out_w);
  fn("out_b", out_b);
}

void ModelParams::for_each(const std::function<void(const std::string&, const Mat&)>& fn) const {
  const_cast<ModelParams*>(this)->for_each(
      [&](const std::string& name, Mat& m) { fn(name, m); });
}

BoundModel bind(Tape& tape, const ModelParams& params, const Hyperparams& hp,
                bool requires_grad) {
  BoundModel b;
  auto enter = [&](const Mat& m) {
    Tensor t = tape.leaf(m, requires_grad);
    b.ordered.push_back(t);
    return t;
  };
  for (size_t k = 0; k < params.enc_w.size(); ++k) {
    b.enc_w.push_back(enter(params.enc_w[k]));
    b.enc_b.push_back(enter(params.enc_b[k]));
  }
  b.cluster_table = enter(params.cluster_table);
  for (size_t l = 0; l < params.tf_global.size(); ++l) {
    dc::LayerTransforms tf;
    tf.w_global = enter(params.tf_global[l]);
    tf.w_local = enter(params.tf_local[l]);
    b.transforms.push_back(tf);
  }
  b.out_w = enter(params.out_w);
  b.out_b = enter(params.out_b);
  if (hp.layer.use_message_transform &&
      static_cast<int>(b.transforms.size()) != hp.layers)
    throw ShapeError("message transforms do not match the layer count");
  return b;
}

ForwardResult forward(Tape& tape, const BoundModel& m, const Mat& features,
                      const BipartiteClusterGraph& bip, const Hyperparams& hp,
                      bool training, std::mt19937_64* rng) {
  if (features.rows() != bip.n) throw ShapeError("feature rows do not match the node count");
  if (m.enc_w.empty()) throw ShapeError("model has no encoder weights");
  Tensor h = tape.leaf(features, false);
  for (size_t k = 0; k < m.enc_w.size(); ++k) {
    h = ad::add_row_vector(ad::matmul(h, m.enc_w[k]), m.enc_b[k]);
    if (k + 1 < m.enc_w.size()) h = ad::relu(h);
  }
  if (training && hp.dropout > 0.0 && rng != nullptr) {
    std::bernoulli_distribution keep(1.0 - hp.dropout);
    Mat mask(h.rows(), h.cols());
    for (int r = 0; r < h.rows(); ++r)
      for (int c = 0; c < h.cols(); ++c)
        mask(r, c) = keep(*rng) ? 1.0 / (1.0 - hp.dropout) : 0.0;
    h = ad::hadamard(h, tape.leaf(mask, false));
  }
  const std::vector<dc::LayerTransforms>* tf =
      hp.layer.use_message_transform ? &m.transforms : nullptr;
  dc::MsgPassingResult mp = dc::dc_msgpassing(h, m.cluster_table, bip, hp.layer, hp.layers,
                                              tf, false, training ? rng : nullptr);
  ForwardResult out;
  out.z_final = mp.state.z;
  out.logits = ad::add_row_vector(ad::matmul(mp.state.z, m.out_w), m.out_b);
  return out;
}

Tensor orthogonality_loss(const Tensor& cluster_table) {
  int k = cluster_table.rows();
  if (k < 1) throw ShapeError("empty cluster table");
  Tensor gram = ad::matmul(cluster_table, ad::transpose(cluster_table));
  if (gram.values().cwiseAbs().maxCoeff() == 0.0)
    throw DomainError("orthogonality loss is undefined for an all-zero cluster table");
  Mat target = Mat::Identity(k, k) / std::sqrt(static_cast<double>(k));
  Tensor normalized = ad::div(gram, ad::frobenius_norm(gram));
  return ad::frobenius_norm(ad::sub(normalized, cluster_table.tape()->leaf(target, false)));
}

Tensor similarity_loss(const Tensor& z, const Tensor& cluster_table,
                       const std::vector<int>& labels, int num_classes,
                       const std::vector<int>& train_nodes) {
  const int n = z.rows();
  const int k = cluster_table.rows();
  if (num_classes < 2) throw DomainError("similarity loss needs at least two classes");
  if (k % num_classes != 0)
    throw DomainError("cluster count must be a multiple of the class count");
  if (train_nodes.empty()) throw DomainError("similarity loss over an empty node set");
  if (static_cast<int>(labels.size()) != n)
    throw ShapeError("label count does not match the embedding rows");
  for (int i : train_nodes) {
    if (i < 0 || i >= n) throw DomainError("training node index out of range");
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw DomainError("training node with an out-of-range label");
  }

  Tape* tape = z.tape();
  Tensor cos = ad::matmul(ad::l2_row_normalize(z), ad::transpose(ad::l2_row_normalize(cluster_table)));
  const Mat& sv = cos.values();
  const int block = k / num_classes;
  Tensor ones = tape->leaf(Mat::Ones(k, 1), false);

  // best similarity per class block; gradient flows through the argmax cell
  std::vector<Tensor> best;
  for (int cls = 0; cls < num_classes; ++cls) {
    Mat pick = Mat::Zero(n, k);
    for (int i = 0; i < n; ++i) {
      int arg = cls * block;
      for (int j = cls * block + 1; j < (cls + 1) * block; ++j)
        if (sv(i, j) > sv(i, arg)) arg = j;
      pick(i, arg) = 1.0;
    }
    best.push_back(ad::matmul(ad::hadamard(cos, tape->leaf(pick, false)), ones));
  }

  Tensor total = ad::exp(ad::neg(best[0]));
  for (int cls = 1; cls < num_classes; ++cls)
    total = ad::add(total, ad::exp(ad::neg(best[cls])));
  Tensor own = tape->leaf(Mat::Zero(n, 1), false);
  for (int cls = 0; cls < num_classes; ++cls) {
    Mat indicator = Mat::Zero(n, 1);
    for (int i = 0; i < n; ++i)
      if (labels[i] == cls) indicator(i, 0) = 1.0;
    own = ad::add(own, ad::hadamard(best[cls], tape->leaf(indicator, false)));
  }
  Tensor others = ad::sub(total, ad::exp(ad::neg(own)));
  Tensor per_node = ad::add(own, ad::log(others));
  Tensor picked = ad::gather_rows(per_node, train_nodes);
  return ad::scale(ad::sum(picked),
                   1.0 / (static_cast<double>(k) * static_cast<double>(train_nodes.size())));
}

double rank_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("score and label counts differ");
  const size_t n = scores.size();
  long n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw DomainError("AUC needs 0/1 labels");
    n_pos += l;
  }
  long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DomainError("AUC needs both classes present");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  double pos_ranks = 0.0;
  for (size_t t = 0; t < n; ++t)
    if (labels[t] == 1) pos_ranks += rank[t];
  double u = pos_ranks - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

double split_metric(const Metrics& m, int num_classes) {
  if (num_classes == 2 && m.roc_auc) return *m.roc_auc;
  return m.accuracy;
}

Metrics metrics_from_logits(const Mat& logits, const UndirectedGraph& g,
                            const std::vector<int>& nodes) {
  if (nodes.empty()) throw DomainError("evaluation over an empty split");
  Metrics out;
  int correct = 0;
  for (int i : nodes) {
    int arg = 0;
    for (int c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, arg)) arg = c;
    if (arg == g.labels[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(nodes.size());
  if (g.num_classes == 2) {
    std::vector<double> scores;
    std::vector<int> lab;
    for (int i : nodes) {
      scores.push_back(logits(i, 1) - logits(i, 0));
      lab.push_back(g.labels[i]);
    }
    bool both = std::count(lab.begin(), lab.end(), 1) > 0 &&
                std::count(lab.begin(), lab.end(), 0) > 0;
    if (both) out.roc_auc = rank_auc(scores, lab);
  }
  return out;
}

Mat eval_logits(const ModelParams& params, const UndirectedGraph& g,
                const BipartiteClusterGraph& bip, const Hyperparams& hp) {
  Tape tape;
  BoundModel bound = bind(tape, params, hp, false);
  return forward(tape, bound, g.features, bip, hp, false, nullptr).logits.values();
}

}  // namespace

Metrics evaluate(const ModelParams& params, const UndirectedGraph& g,
                 const BipartiteClusterGraph& bip, const Hyperparams& hp,
                 const std::vector<std::uint8_t>& split_mask) {
  if (!g.has_features()) throw DomainError("graph has no node features");
  if (!g.has_labels()) throw DomainError("graph has no labels");
  std::vector<int> nodes = g.nodes_in_split(split_mask);
  return metrics_from_logits(eval_logits(params, g, bip, hp), g, nodes);
}

void adam_step(ModelParams& params, const std::vector<Mat>& grads, AdamState& state,
               double lr, double weight_decay, double beta1, double beta2, double eps) {
  std::vector<Mat*> slots;
  params.for_each([&](const std::string&, Mat& m) { slots.push_back(&m); });
  if (grads.size() != slots.size())
    throw ShapeError("gradient count does not match the parameter count");
  if (state.m.empty()) {
    for (Mat* p : slots) {
      state.m.push_back(Mat::Zero(p->rows(), p->cols()));
      state.v.push_back(Mat::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != slots.size())
    throw ShapeError("optimizer state does not match the parameter count");
  ++state.step;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t k = 0; k < slots.size(); ++k) {
    Mat& p = *slots[k];
    const Mat& g = grads[k];
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw ShapeError("gradient shape does not match its parameter");
    state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g;
    state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g.cwiseProduct(g);
    Mat mhat = state.m[k] / bc1;
    Mat vhat = state.v[k] / bc2;
    p -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
    if (weight_decay > 0.0) p -= lr * weight_decay * p;
  }
}

TrainResult train(const UndirectedGraph& g, const Hyperparams& hp) {
  if (!g.has_features()) throw DomainError("graph has no node features");
  if (!g.has_labels()) throw DomainError("graph has no labels");
  hp.validate(g.num_classes);
  std::vector<int> train_nodes = g.nodes_in_split(g.train_mask);
  if (train_nodes.empty()) throw DomainError("empty training split");
  std::vector<int> valid_nodes = g.nodes_in_split(g.valid_mask);
  std::vector<int> test_nodes = g.nodes_in_split(g.test_mask);
  if (valid_nodes.empty()) valid_nodes = train_nodes;
  if (test_nodes.empty()) test_nodes = train_nodes;

  BipartiteClusterGraph bip = build_bipartite(g, hp.n_global, hp.n_local);
  std::mt19937_64 rng(hp.seed);
  ModelParams params =
      ModelParams::init(static_cast<int>(g.features.cols()), g.num_classes, hp, rng);
  AdamState opt;

  TrainResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    Tape tape;
    BoundModel bound = bind(tape, params, hp, true);
    ForwardResult fwd = forward(tape, bound, g.features, bip, hp, true, &rng);
    Tensor ce = ad::cross_entropy(fwd.logits, g.labels, train_nodes);
    Tensor loss = ce;
    double ortho_val = 0.0, sim_val = 0.0;
    if (hp.omega1 > 0.0) {
      Tensor o = orthogonality_loss(bound.cluster_table);
      ortho_val = o.scalar();
      loss = ad::add(loss, ad::scale(o, hp.omega1));
    }
    if (hp.omega2 > 0.0) {
      Tensor s = similarity_loss(fwd.z_final, bound.cluster_table, g.labels, g.num_classes,
                                 train_nodes);
      sim_val = s.scalar();
      loss = ad::add(loss, ad::scale(s, hp.omega2));
    }
    if (!std::isfinite(loss.scalar()))
      throw NumericError("training diverged at epoch " + std::to_string(epoch));

    ad::GradientMap grads = tape.backward(loss);
    std::vector<Mat> gvec;
    for (const Tensor& t : bound.ordered) {
      const Mat* gm = grads.find(t);
      gvec.push_back(gm ? *gm : Mat(Mat::Zero(t.rows(), t.cols())));
    }
    adam_step(params, gvec, opt, hp.lr, hp.weight_decay);

    Mat logits = eval_logits(params, g, bip, hp);
    Metrics val = metrics_from_logits(logits, g, valid_nodes);
    Metrics test = metrics_from_logits(logits, g, test_nodes);
    EpochRow row;
    row.epoch = epoch;
    row.train_loss = loss.scalar();
    row.ce = ce.scalar();
    row.ortho = ortho_val;
    row.sim = sim_val;
    row.val_metric = split_metric(val, g.num_classes);
    row.test_metric = split_metric(test, g.num_classes);
    result.history.push_back(row);

    if (row.val_metric > best) {
      best = row.val_metric;
      result.params = params;
      result.best_epoch = epoch;
      result.best_val = val;
      result.best_test = test;
    }
  }
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochRow>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open metrics file for writing: " + path);
  out << "epoch,train_loss,ce,ortho,sim,val_metric,test_metric\n";
  out.precision(17);
  for (const EpochRow& r : history)
    out << r.epoch << ',' << r.train_loss << ',' << r.ce << ',' << r.ortho << ',' << r.sim
        << ',' << r.val_metric << ',' << r.test_metric << '\n';
  if (!out) throw IoError("failed while writing metrics file: " + path);
}

namespace {

json tensor_to_json(const Mat& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<size_t>(m.size()));
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = std::move(data);
  return j;
}

Mat tensor_from_json(const json& j, const std::string& name) {
  if (!j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw IoError("checkpoint tensor " + name + " is missing shape headers");
  int rows = j["rows"].get<int>();
  int cols = j["cols"].get<int>();
  std::vector<double> data = j["data"].get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<long long>(rows) * cols != static_cast<long long>(data.size()))
    throw IoError("checkpoint tensor " + name + " has inconsistent shape headers");
  Mat m(rows, cols);
  size_t idx = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = data[idx++];
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  json j;
  j["format"] = "dcgnn-model";
  j["version"] = 1;
  json tensors = json::object();
  params.for_each([&](const std::string& name, const Mat& m) { tensors[name] = tensor_to_json(m); });
  j["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed while writing checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != "dcgnn-model")
    throw IoError("checkpoint " + path + " has an unknown format field");
  if (j.value("version", 0) != 1)
    throw IoError("checkpoint " + path + " has an unsupported version");
  if (!j.contains("tensors")) throw IoError("checkpoint " + path + " has no tensors");
  const json& tensors = j["tensors"];

  ModelParams p;
  for (int k = 0;; ++k) {
    std::string wname = "enc_w" + std::to_string(k);
    std::string bname = "enc_b" + std::to_string(k);
    if (!tensors.contains(wname)) break;
    if (!tensors.contains(bname)) throw IoError("checkpoint misses " + bname);
    p.enc_w.push_back(tensor_from_json(tensors[wname], wname));
    p.enc_b.push_back(tensor_from_json(tensors[bname], bname));
  }
  if (p.enc_w.empty()) throw IoError("checkpoint " + path + " has no encoder weights");
  if (!tensors.contains("cluster_table"))
    throw IoError("checkpoint " + path + " has no cluster table");
  p.cluster_table = tensor_from_json(tensors["cluster_table"], "cluster_table");
  for (int l = 0;; ++l) {
    std::string gname = "tf_global" + std::to_string(l);
    std::string lname = "tf_local" + std::to_string(l);
    if (!tensors.contains(gname)) break;
    if (!tensors.contains(lname)) throw IoError("checkpoint misses " + lname);
    p.tf_global.push_back(tensor_from_json(tensors[gname], gname));
    p.tf_local.push_back(tensor_from_json(tensors[lname], lname));
  }
  if (!tensors.contains("out_w") || !tensors.contains("out_b"))
    throw IoError("checkpoint " + path + " has no readout weights");
  p.out_w = tensor_from_json(tensors["out_w"], "out_w");
  p.out_b = tensor_from_json(tensors["out_b"], "out_b");
  return p;
}

}  // namespace dcgnn::model
