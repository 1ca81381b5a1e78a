#include "dcgnn/tensor.hpp"

#include <cmath>
#include <string>

namespace dcgnn::ad {

namespace {

void check_valid(const Tensor& t) {
  if (!t.valid()) throw ShapeError("operation on default-constructed tensor");
}

void check_same_tape(const Tensor& a, const Tensor& b) {
  check_valid(a);
  check_valid(b);
  if (a.tape() != b.tape()) throw ShapeError("operands recorded on different tapes");
}

bool is_scalar(const Tensor& t) { return t.rows() == 1 && t.cols() == 1; }

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void check_elementwise(const Tensor& a, const Tensor& b, const char* op) {
  check_same_tape(a, b);
  if (is_scalar(a) || is_scalar(b)) return;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b));
}

Mat scalar_mat(double v) { return Mat::Constant(1, 1, v); }

}  // namespace

int Tensor::rows() const { return values().rows(); }
int Tensor::cols() const { return values().cols(); }
bool Tensor::requires_grad() const {
  check_valid(*this);
  return tape_->requires_grad(id_);
}
const Mat& Tensor::values() const {
  check_valid(*this);
  return tape_->values(id_);
}
double Tensor::scalar() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("scalar() on " + shape_str(*this) + " tensor");
  return values()(0, 0);
}

const Mat& GradientMap::at(const Tensor& t) const {
  const Mat* g = find(t);
  if (!g) throw DomainError("no gradient recorded for tensor " + std::to_string(t.id()));
  return *g;
}

Tensor Tape::leaf(Mat values, bool requires_grad) {
  Node n;
  n.values = std::move(values);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::record(Mat values, const std::vector<Tensor>& inputs, BackwardFn backward) {
  Node n;
  n.values = std::move(values);
  if (!n.values.allFinite()) throw NumericError("non-finite values produced by recorded op");
  n.inputs.reserve(inputs.size());
  for (const Tensor& in : inputs) {
    if (!in.valid() || in.tape() != this) throw ShapeError("input recorded on a different tape");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || in.requires_grad();
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

int Tape::GradSink::target_of(int slot) const {
  if (slot < 0 || slot >= static_cast<int>(inputs_->size()))
    throw ShapeError("gradient contribution to a slot the op does not have");
  return (*inputs_)[slot];
}

void Tape::GradSink::operator()(int slot, const Mat& contribution) const {
  int target = target_of(slot);
  // requires_grad=false tensors never receive gradient contributions.
  if (!tape_->requires_grad(target)) return;
  const Mat& tv = tape_->values(target);
  if (contribution.rows() != tv.rows() || contribution.cols() != tv.cols())
    throw ShapeError("gradient contribution shape mismatch");
  if ((*has_grad_)[target]) {
    (*grads_)[target] += contribution;
  } else {
    (*grads_)[target] = contribution;
    (*has_grad_)[target] = 1;
  }
}

void Tape::GradSink::add_rows(int slot, const Mat& rows, const std::vector<int>& idx) const {
  int target = target_of(slot);
  if (!tape_->requires_grad(target)) return;
  const Mat& tv = tape_->values(target);
  if (rows.cols() != tv.cols() || rows.rows() != static_cast<int>(idx.size()))
    throw ShapeError("gradient contribution shape mismatch");
  Mat& g = (*grads_)[target];
  if (!(*has_grad_)[target]) {
    g = Mat::Zero(tv.rows(), tv.cols());
    (*has_grad_)[target] = 1;
  }
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= tv.rows())
      throw ShapeError("gradient contribution row out of range");
    g.row(idx[k]) += rows.row(static_cast<int>(k));
  }
}

GradientMap Tape::backward(const Tensor& loss) const {
  if (!loss.valid() || loss.tape() != this) throw ShapeError("loss does not belong to this tape");
  if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("backward expects a 1x1 loss");
  std::vector<Mat> grads(nodes_.size());
  std::vector<char> has_grad(nodes_.size(), 0);
  grads[loss.id()] = Mat::Ones(1, 1);
  has_grad[loss.id()] = 1;
  GradSink sink;
  sink.tape_ = this;
  sink.grads_ = &grads;
  sink.has_grad_ = &has_grad;
  for (int id = loss.id(); id >= 0; --id) {
    if (!has_grad[id]) continue;
    const Node& node = nodes_[id];
    if (!node.backward) continue;
    sink.inputs_ = &node.inputs;
    node.backward(node.values, grads[id], sink);
  }
  GradientMap out;
  for (size_t id = 0; id < nodes_.size(); ++id)
    if (has_grad[id] && nodes_[id].requires_grad) out.set(static_cast<int>(id), std::move(grads[id]));
  return out;
}

namespace {

template <class F, class G>
Tensor unary_op(const Tensor& a, F fwd, G bwd) {
  check_valid(a);
  const Mat* av = &a.values();
  return a.tape()->record(fwd(*av), {a},
                          [av, bwd](const Mat& out, const Mat& gout, const Tape::GradSink& sink) {
                            sink(0, bwd(gout, *av, out));
                          });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_elementwise(a, b, "add");
  const Mat* av = &a.values();
  const Mat* bv = &b.values();
  const bool sa = is_scalar(a) && !is_scalar(b), sb = is_scalar(b) && !is_scalar(a);
  Mat out = sa   ? Mat((bv->array() + (*av)(0, 0)).matrix())
            : sb ? Mat((av->array() + (*bv)(0, 0)).matrix())
                 : Mat(*av + *bv);
  return a.tape()->record(std::move(out), {a, b},
                          [sa, sb](const Mat&, const Mat& g, const Tape::GradSink& sink) {
                            sink(0, sa ? scalar_mat(g.sum()) : g);
                            sink(1, sb ? scalar_mat(g.sum()) : g);
                          });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_elementwise(a, b, "sub");
  const Mat* av = &a.values();
  const Mat* bv = &b.values();
  const bool sa = is_scalar(a) && !is_scalar(b), sb = is_scalar(b) && !is_scalar(a);
  Mat out = sa   ? Mat(((*av)(0, 0) - bv->array()).matrix())
            : sb ? Mat((av->array() - (*bv)(0, 0)).matrix())
                 : Mat(*av - *bv);
  return a.tape()->record(std::move(out), {a, b},
                          [sa, sb](const Mat&, const Mat& g, const Tape::GradSink& sink) {
                            sink(0, sa ? scalar_mat(g.sum()) : g);
                            sink(1, sb ? scalar_mat(-g.sum()) : Mat(-g));
                          });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_elementwise(a, b, "hadamard");
  const Mat* av = &a.values();
  const Mat* bv = &b.values();
  const bool sa = is_scalar(a) && !is_scalar(b), sb = is_scalar(b) && !is_scalar(a);
  Mat out = sa   ? Mat((*av)(0, 0) * (*bv))
            : sb ? Mat((*bv)(0, 0) * (*av))
                 : Mat(av->cwiseProduct(*bv));
  return a.tape()->record(
      std::move(out), {a, b},
      [av, bv, sa, sb](const Mat&, const Mat& g, const Tape::GradSink& sink) {
        sink(0, sa ? scalar_mat(g.cwiseProduct(*bv).sum())
                   : sb ? Mat((*bv)(0, 0) * g) : Mat(g.cwiseProduct(*bv)));
        sink(1, sb ? scalar_mat(g.cwiseProduct(*av).sum())
                   : sa ? Mat((*av)(0, 0) * g) : Mat(g.cwiseProduct(*av)));
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_elementwise(a, b, "div");
  if ((b.values().array() == 0.0).any()) throw DomainError("division by zero entry");
  const Mat* av = &a.values();
  const Mat* bv = &b.values();
  const bool sa = is_scalar(a) && !is_scalar(b), sb = is_scalar(b) && !is_scalar(a);
  Mat out = sa   ? Mat(((*av)(0, 0) / bv->array()).matrix())
            : sb ? Mat(*av / (*bv)(0, 0))
                 : Mat(av->cwiseQuotient(*bv));
  return a.tape()->record(
      std::move(out), {a, b},
      [av, bv, sa, sb](const Mat& out, const Mat& g, const Tape::GradSink& sink) {
        if (sa) {
          sink(0, scalar_mat(g.cwiseQuotient(*bv).sum()));
          sink(1, Mat(-g.cwiseProduct(out).cwiseQuotient(*bv)));
        } else if (sb) {
          double s = (*bv)(0, 0);
          sink(0, Mat(g / s));
          sink(1, scalar_mat(-g.cwiseProduct(out).sum() / s));
        } else {
          sink(0, Mat(g.cwiseQuotient(*bv)));
          sink(1, Mat(-g.cwiseProduct(out).cwiseQuotient(*bv)));
        }
      });
}

Tensor scale(const Tensor& a, double s) {
  return unary_op(
      a, [s](const Mat& x) { return Mat(s * x); },
      [s](const Mat& g, const Mat&, const Mat&) { return Mat(s * g); });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary_op(
      a, [](const Mat& x) { return Mat(x.array().exp().matrix()); },
      [](const Mat& g, const Mat&, const Mat& out) { return Mat(g.cwiseProduct(out)); });
}

Tensor log(const Tensor& a) {
  check_valid(a);
  if ((a.values().array() <= 0.0).any()) throw DomainError("log of nonpositive entry");
  return unary_op(
      a, [](const Mat& x) { return Mat(x.array().log().matrix()); },
      [](const Mat& g, const Mat& x, const Mat&) { return Mat(g.cwiseQuotient(x)); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, [](const Mat& x) { return Mat(x.array().tanh().matrix()); },
      [](const Mat& g, const Mat&, const Mat& out) {
        return Mat(g.cwiseProduct((1.0 - out.array().square()).matrix()));
      });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, [](const Mat& x) { return Mat(x.cwiseMax(0.0)); },
      [](const Mat& g, const Mat& x, const Mat&) {
        return Mat((x.array() > 0.0).select(g, Mat::Zero(g.rows(), g.cols())));
      });
}

Tensor clamp_min(const Tensor& a, double floor) {
  return unary_op(
      a, [floor](const Mat& x) { return Mat(x.cwiseMax(floor)); },
      [floor](const Mat& g, const Mat& x, const Mat&) {
        return Mat((x.array() > floor).select(g, Mat::Zero(g.rows(), g.cols())));
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b);
  if (a.cols() != b.rows())
    throw ShapeError("matmul: shapes " + shape_str(a) + " and " + shape_str(b));
  const Mat* av = &a.values();
  const Mat* bv = &b.values();
  return a.tape()->record((*av) * (*bv), {a, b},
                          [av, bv](const Mat&, const Mat& gout, const Tape::GradSink& sink) {
                            sink(0, Mat(gout * bv->transpose()));
                            sink(1, Mat(av->transpose() * gout));
                          });
}

Tensor transpose(const Tensor& a) {
  return unary_op(
      a, [](const Mat& x) { return Mat(x.transpose()); },
      [](const Mat& g, const Mat&, const Mat&) { return Mat(g.transpose()); });
}

Tensor pairwise_sq_dist(const Tensor& z, const Tensor& c) {
  check_same_tape(z, c);
  if (z.cols() != c.cols())
    throw ShapeError("pairwise_sq_dist: feature dims " + shape_str(z) + " vs " + shape_str(c));
  const Mat* zv = &z.values();
  const Mat* cv = &c.values();
  const int n = z.rows(), k = c.rows();
  Mat out(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) out(i, j) = (zv->row(i) - cv->row(j)).squaredNorm();
  return z.tape()->record(std::move(out), {z, c},
                          [zv, cv](const Mat&, const Mat& gout, const Tape::GradSink& sink) {
                            // d/dz_i = sum_j g_ij * 2 (z_i - c_j); symmetric in c.
                            Vec grow = gout.rowwise().sum();
                            Vec gcol = gout.colwise().sum();
                            sink(0, Mat(2.0 * (grow.asDiagonal() * (*zv) - gout * (*cv))));
                            sink(1, Mat(2.0 * (gcol.asDiagonal() * (*cv) - gout.transpose() * (*zv))));
                          });
}

namespace {

Tensor axis_normalize(const Tensor& t, const Vec& targets, bool rows) {
  check_valid(t);
  const Mat* tv = &t.values();
  const int axis_count = rows ? t.rows() : t.cols();
  if (targets.size() != axis_count)
    throw ShapeError("normalize: target length does not match axis size");
  Vec sums = rows ? Vec(tv->rowwise().sum()) : Vec(tv->colwise().sum().transpose());
  for (int i = 0; i < axis_count; ++i)
    if (sums(i) <= 0.0)
      throw DomainError(std::string(rows ? "row " : "column ") + std::to_string(i) +
                        " has nonpositive sum; cannot rescale to marginal");
  Vec factor = targets.cwiseQuotient(sums);
  Mat out = rows ? Mat(factor.asDiagonal() * (*tv)) : Mat((*tv) * factor.asDiagonal());
  return t.tape()->record(
      std::move(out), {t},
      [tv, targets, sums, rows](const Mat&, const Mat& gout, const Tape::GradSink& sink) {
        // y_ij = t_i x_ij / s_i  =>  dx_ik = (t_i/s_i) (g_ik - sum_j g_ij x_ij / s_i)
        Mat g(gout.rows(), gout.cols());
        if (rows) {
          for (int i = 0; i < gout.rows(); ++i) {
            double dot = gout.row(i).dot(tv->row(i));
            g.row(i) = (targets(i) / sums(i)) * (gout.row(i).array() - dot / sums(i)).matrix();
          }
        } else {
          for (int j = 0; j < gout.cols(); ++j) {
            double dot = gout.col(j).dot(tv->col(j));
            g.col(j) = (targets(j) / sums(j)) * (gout.col(j).array() - dot / sums(j)).matrix();
          }
        }
        sink(0, g);
      });
}

}  // namespace

Tensor row_normalize(const Tensor& t, const Vec& targets) { return axis_normalize(t, targets, true); }
Tensor col_normalize(const Tensor& t, const Vec& targets) { return axis_normalize(t, targets, false); }

Tensor sum(const Tensor& t) {
  return unary_op(
      t, [](const Mat& x) { return scalar_mat(x.sum()); },
      [](const Mat& g, const Mat& x, const Mat&) {
        return Mat(Mat::Constant(x.rows(), x.cols(), g(0, 0)));
      });
}

Tensor frobenius_norm(const Tensor& t) {
  return unary_op(
      t, [](const Mat& x) { return scalar_mat(x.norm()); },
      [](const Mat& g, const Mat& x, const Mat& out) {
        double n = std::max(out(0, 0), 1e-300);
        return Mat((g(0, 0) / n) * x);
      });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     const std::vector<int>& mask) {
  check_valid(logits);
  if (static_cast<int>(labels.size()) != logits.rows())
    throw ShapeError("cross_entropy: one label per logit row required");
  if (mask.empty()) throw DomainError("cross_entropy: empty node mask");
  const int c = logits.cols();
  for (int i : mask) {
    if (i < 0 || i >= logits.rows()) throw ShapeError("cross_entropy: mask index out of range");
    if (labels[i] < 0 || labels[i] >= c) throw DomainError("cross_entropy: label out of range");
  }
  const Mat* lv = &logits.values();
  double total = 0.0;
  for (int i : mask) {
    double mx = lv->row(i).maxCoeff();
    double lse = std::log((lv->row(i).array() - mx).exp().sum()) + mx;
    total += lse - (*lv)(i, labels[i]);
  }
  return logits.tape()->record(
      scalar_mat(total / static_cast<double>(mask.size())), {logits},
      [lv, labels, mask](const Mat&, const Mat& gout, const Tape::GradSink& sink) {
        Mat g = Mat::Zero(lv->rows(), lv->cols());
        double w = gout(0, 0) / static_cast<double>(mask.size());
        for (int i : mask) {
          double mx = lv->row(i).maxCoeff();
          Eigen::RowVectorXd p = (lv->row(i).array() - mx).exp();
          p /= p.sum();
          g.row(i) += w * p;
          g(i, labels[i]) -= w;
        }
        sink(0, g);
      });
}

Tensor gather_rows(const Tensor& t, const std::vector<int>& idx) {
  check_valid(t);
  const Mat* tv = &t.values();
  Mat out(static_cast<int>(idx.size()), t.cols());
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= t.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<int>(k)) = tv->row(idx[k]);
  }
  return t.tape()->record(std::move(out), {t},
                          [idx](const Mat&, const Mat& gout, const Tape::GradSink& sink) {
                            sink.add_rows(0, gout, idx);
                          });
}

Tensor scatter_rows(const Tensor& t, const std::vector<int>& idx, int n_rows) {
  check_valid(t);
  if (static_cast<int>(idx.size()) != t.rows())
    throw ShapeError("scatter_rows: one target index per row required");
  const Mat* tv = &t.values();
  Mat out = Mat::Zero(n_rows, t.cols());
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= n_rows) throw ShapeError("scatter_rows: index out of range");
    out.row(idx[k]) += tv->row(static_cast<int>(k));
  }
  return t.tape()->record(std::move(out), {t},
                          [idx](const Mat&, const Mat& gout, const Tape::GradSink& sink) {
                            Mat g(static_cast<int>(idx.size()), gout.cols());
                            for (size_t k = 0; k < idx.size(); ++k)
                              g.row(static_cast<int>(k)) = gout.row(idx[k]);
                            sink(0, g);
                          });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  int cols = parts[0].cols();
  int rows = 0;
  for (const Tensor& p : parts) {
    check_same_tape(parts[0], p);
    if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Mat out(rows, cols);
  std::vector<int> offsets(parts.size()), heights(parts.size());
  int at = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    offsets[k] = at;
    heights[k] = parts[k].rows();
    out.middleRows(at, heights[k]) = parts[k].values();
    at += heights[k];
  }
  return parts[0].tape()->record(
      std::move(out), parts,
      [offsets, heights](const Mat&, const Mat& gout, const Tape::GradSink& sink) {
        for (size_t k = 0; k < offsets.size(); ++k)
          sink(static_cast<int>(k), Mat(gout.middleRows(offsets[k], heights[k])));
      });
}

Tensor scale_rows(const Tensor& t, const Vec& factors) {
  check_valid(t);
  if (factors.size() != t.rows()) throw ShapeError("scale_rows: factor length mismatch");
  return t.tape()->record(Mat(factors.asDiagonal() * t.values()), {t},
                          [factors](const Mat&, const Mat& gout, const Tape::GradSink& sink) {
                            sink(0, Mat(factors.asDiagonal() * gout));
                          });
}

Tensor add_row_vector(const Tensor& t, const Tensor& row) {
  check_same_tape(t, row);
  if (row.rows() != 1 || row.cols() != t.cols())
    throw ShapeError("add_row_vector: expected 1x" + std::to_string(t.cols()) + " row");
  Mat out = t.values().rowwise() + row.values().row(0);
  return t.tape()->record(std::move(out), {t, row},
                          [](const Mat&, const Mat& gout, const Tape::GradSink& sink) {
                            sink(0, gout);
                            sink(1, Mat(gout.colwise().sum()));
                          });
}

Tensor l2_row_normalize(const Tensor& t) {
  check_valid(t);
  const Mat* tv = &t.values();
  const double guard = 1e-12;
  Vec norms = tv->rowwise().norm();
  Mat out(t.rows(), t.cols());
  for (int i = 0; i < t.rows(); ++i)
    out.row(i) =
        norms(i) < guard ? Eigen::RowVectorXd::Zero(t.cols()).eval() : Eigen::RowVectorXd(tv->row(i) / norms(i));
  return t.tape()->record(std::move(out), {t},
                          [norms, guard](const Mat& out, const Mat& gout, const Tape::GradSink& sink) {
                            Mat g = Mat::Zero(out.rows(), out.cols());
                            for (int i = 0; i < out.rows(); ++i) {
                              if (norms(i) < guard) continue;
                              double dot = gout.row(i).dot(out.row(i));
                              g.row(i) = (gout.row(i) - dot * out.row(i)) / norms(i);
                            }
                            sink(0, g);
                          });
}

Tensor layer_norm_rows(const Tensor& t, double eps) {
  check_valid(t);
  if (t.cols() < 1) throw ShapeError("layer_norm_rows: empty rows");
  const Mat* tv = &t.values();
  const int n = t.rows(), c = t.cols();
  Vec inv_std(n);
  Mat out(n, c);
  for (int i = 0; i < n; ++i) {
    double mean = tv->row(i).mean();
    double var = (tv->row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    out.row(i) = ((tv->row(i).array() - mean) * inv_std(i)).matrix();
  }
  return t.tape()->record(
      std::move(out), {t},
      [inv_std, c](const Mat& out, const Mat& gout, const Tape::GradSink& sink) {
        Mat g(gout.rows(), c);
        for (int i = 0; i < gout.rows(); ++i) {
          double gmean = gout.row(i).mean();
          double gydot = gout.row(i).dot(out.row(i)) / c;
          g.row(i) =
              inv_std(i) * (gout.row(i).array() - gmean - out.row(i).array() * gydot).matrix();
        }
        sink(0, g);
      });
}

Tensor scale_by_max(const Tensor& t) {
  check_valid(t);
  const Mat* tv = &t.values();
  int ar = 0, ac = 0;
  double mx = tv->size() > 0 ? tv->maxCoeff(&ar, &ac) : 0.0;
  if (mx <= 0.0) {
    return t.tape()->record(Mat(*tv), {t},
                            [](const Mat&, const Mat& gout, const Tape::GradSink& sink) {
                              sink(0, gout);
                            });
  }
  return t.tape()->record(Mat(*tv / mx), {t},
                          [mx, ar, ac](const Mat& out, const Mat& gout, const Tape::GradSink& sink) {
                            // y = x / x_max; the max entry collects -<g, y>/x_max.
                            Mat g = gout / mx;
                            g(ar, ac) -= gout.cwiseProduct(out).sum() / mx;
                            sink(0, g);
                          });
}

Tensor detach(const Tensor& t) {
  check_valid(t);
  return t.tape()->leaf(t.values(), false);
}

Mat finite_diff_grad(const std::function<double(const Mat&)>& f, const Mat& x, double h) {
  Mat g(x.rows(), x.cols());
  Mat probe = x;
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) {
      double orig = probe(i, j);
      probe(i, j) = orig + h;
      double up = f(probe);
      probe(i, j) = orig - h;
      double down = f(probe);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

}  // namespace dcgnn::ad
