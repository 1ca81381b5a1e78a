#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "dcgnn/errors.hpp"

// Reverse-mode autodiff over dense 2-d tensors. A Tape owns all recorded
// values; Tensor is a cheap handle (tape pointer + node id). Values are
// immutable once recorded, so handles stay valid for the tape's lifetime
// and concurrent reads are safe. Recording is single-writer.

namespace dcgnn::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

class Tape;

class Tensor {
 public:
  Tensor() = default;

  int rows() const;
  int cols() const;
  bool requires_grad() const;
  const Mat& values() const;
  // Value of the single entry; requires a 1x1 tensor.
  double scalar() const;
  double value(int r, int c) const { return values()(r, c); }

  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Gradients keyed by tensor id, each the same shape as its tensor.
class GradientMap {
 public:
  const Mat* find(const Tensor& t) const {
    auto it = grads_.find(t.id());
    return it == grads_.end() ? nullptr : &it->second;
  }
  const Mat& at(const Tensor& t) const;
  void set(int id, Mat g) { grads_[id] = std::move(g); }
  size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<int, Mat> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(Mat values, bool requires_grad = false);
  Tensor constant(Mat values) { return leaf(std::move(values), false); }
  Tensor zeros(int rows, int cols) { return constant(Mat::Zero(rows, cols)); }
  Tensor full(int rows, int cols, double v) { return constant(Mat::Constant(rows, cols, v)); }

  // Routes gradient contributions into the inputs of the node being
  // differentiated. operator() takes a full-shape contribution; add_rows adds
  // rows.row(k) into row idx[k] of the slot's gradient (duplicates add),
  // skipping the dense zero fill that a full-shape contribution would need.
  // Row-sparse ops (gathers) must use add_rows: with one gather per graph
  // node, full-shape contributions would make the reverse pass quadratic.
  class GradSink {
   public:
    void operator()(int slot, const Mat& contribution) const;
    void add_rows(int slot, const Mat& rows, const std::vector<int>& idx) const;

   private:
    friend class Tape;
    GradSink() = default;
    int target_of(int slot) const;
    const Tape* tape_ = nullptr;
    const std::vector<int>* inputs_ = nullptr;
    std::vector<Mat>* grads_ = nullptr;
    std::vector<char>* has_grad_ = nullptr;
  };
  using BackwardFn = std::function<void(const Mat& out, const Mat& gout, const GradSink& sink)>;

  // Records an op node. The backward fn receives the recorded output values,
  // the output gradient, and a sink that routes per-slot contributions to the
  // inputs; contributions to non-grad inputs are dropped. Exposed so
  // composite modules can register fused ops with hand-derived backward rules.
  Tensor record(Mat values, const std::vector<Tensor>& inputs, BackwardFn backward);

  // Reverse pass from a scalar loss. Traverses nodes in reverse creation
  // order (a valid topological order), visiting each at most once, and
  // returns gradients for every requires_grad node that was reached.
  GradientMap backward(const Tensor& loss) const;

  size_t size() const { return nodes_.size(); }
  const Mat& values(int id) const { return nodes_[id].values; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Mat values;
    std::vector<int> inputs;
    BackwardFn backward;  // empty for leaves
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;  // deque: value references stay stable
};

// Elementwise ops accept equal shapes or a 1x1 operand broadcast to the other.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // DomainError on entries <= 0
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// D[i][j] = squared euclidean distance between row i of z and row j of c.
Tensor pairwise_sq_dist(const Tensor& z, const Tensor& c);

// Rescales each row/column to the target sum. Zero (or negative) row/column
// sums raise DomainError; exact feasibility of the touched marginal holds to
// floating-point roundoff.
Tensor row_normalize(const Tensor& t, const Vec& targets);
Tensor col_normalize(const Tensor& t, const Vec& targets);

Tensor sum(const Tensor& t);             // 1x1
Tensor frobenius_norm(const Tensor& t);  // 1x1; subgradient 0 at the origin

// Mean negative log-softmax-likelihood over the rows listed in mask.
// Stabilized with per-row max subtraction.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     const std::vector<int>& mask);

Tensor gather_rows(const Tensor& t, const std::vector<int>& idx);
// out has n_rows rows; row idx[k] accumulates input row k (duplicates add).
Tensor scatter_rows(const Tensor& t, const std::vector<int>& idx, int n_rows);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor scale_rows(const Tensor& t, const Vec& factors);
Tensor add_row_vector(const Tensor& t, const Tensor& row);

// Rows rescaled to unit l2 norm; rows with norm < 1e-12 map to zero rows
// (and receive zero gradient).
Tensor l2_row_normalize(const Tensor& t);
Tensor layer_norm_rows(const Tensor& t, double eps = 1e-5);

// x / max(x) with the gradient routed through the (first) argmax entry.
// Identity when max(x) <= 0.
Tensor scale_by_max(const Tensor& t);

// Re-enters the values as a non-grad leaf, cutting the backward path.
Tensor detach(const Tensor& t);

// Central-difference gradient of f at x, used as the reference oracle for
// backward implementations.
Mat finite_diff_grad(const std::function<double(const Mat&)>& f, const Mat& x,
                     double h = 1e-5);

}  // namespace dcgnn::ad
