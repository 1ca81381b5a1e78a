#pragma once

#include "dcgnn/tensor.hpp"

namespace dcgnn::ot {

using ad::Mat;
using ad::Tensor;
using ad::Vec;

// Row/column mass targets of a coupling. Both must be strictly positive and
// sum to 1.
struct MarginalPair {
  Vec row;
  Vec col;
  static MarginalPair uniform(int n, int k);
  void validate() const;
};

struct SinkhornConfig {
  double lambda = 2.0;   // entropic sharpness; larger = closer to the LP plan
  int iterations = 5;    // alternating rescalings, row first
  double min_entry = 1e-30;
  void validate() const;
};

struct Coupling {
  Tensor p;
  // max-abs marginal residuals of p's values against the targets
  double row_err = 0.0;
  double col_err = 0.0;
};

// Divides the cost by its max entry so exp(-lambda m) stays well-scaled.
// Entries must be nonnegative; all-zero costs pass through unchanged.
Tensor stabilize_cost(const Tensor& m);

// Matrix scaling of exp(-lambda m), floored at min_entry, for a fixed number
// of alternating row/column rescalings. Fully recorded on the tape, so
// gradients flow through the unrolled iterations.
Coupling sinkhorn_knopp(const Tensor& m, const MarginalPair& marg, const SinkhornConfig& cfg);

// Row+column sweeps until both marginal residuals drop below tol.
// NumericError if max_iters sweeps do not suffice.
Coupling sinkhorn_to_convergence(const Tensor& m, const MarginalPair& marg, double lambda,
                                 double tol = 1e-9, int max_iters = 10000,
                                 double min_entry = 1e-30);

// Value-level scaling loop from an arbitrary positive starting matrix;
// exposes the fixed point independently of the exp(-lambda m) parameterization.
Mat scale_to_marginals(Mat b, const MarginalPair& marg, double tol = 1e-9, int max_iters = 10000);

struct LpSolution {
  double cost;
  Mat plan;
};

// Exact solution of the linear transportation problem by successive shortest
// augmenting paths, for desk-size instances (n*k <= 64). Serves as the
// ground-truth reference for the entropic solver.
LpSolution ot_lp_oracle(const Mat& m, const MarginalPair& marg);

double entropy(const Mat& p);                        // -sum p log p, 0 log 0 = 0
double transport_cost(const Mat& p, const Mat& m);   // <P, M>

}  // namespace dcgnn::ot
