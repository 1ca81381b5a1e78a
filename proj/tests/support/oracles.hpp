#pragma once

// Brute-force reference solvers used only by tests. Deliberately simple and
// slow; correctness over speed.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dcgnn/tensor.hpp"

namespace dcgnn::testing {

using OMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Exact transportation LP by enumerating every basis. A basic feasible
// solution lives on a spanning tree of the bipartite supply/demand graph
// (n + k vertices, n + k - 1 cells), so we try every cell subset of that
// size, keep the ones forming a spanning tree, solve the unique tree flow
// by leaf peeling, and take the cheapest nonnegative one.
inline double lp_by_tree_enumeration(const OMat& m, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& v) {
  const int n = static_cast<int>(u.size());
  const int k = static_cast<int>(v.size());
  const int cells = n * k;
  const int need = n + k - 1;
  if (cells > 16) throw std::runtime_error("enumeration oracle is for tiny instances only");

  std::vector<int> comb(need);
  std::iota(comb.begin(), comb.end(), 0);
  double best = std::numeric_limits<double>::infinity();

  auto advance = [&]() {
    int i = need - 1;
    while (i >= 0 && comb[i] == cells - need + i) --i;
    if (i < 0) return false;
    ++comb[i];
    for (int j = i + 1; j < need; ++j) comb[j] = comb[j - 1] + 1;
    return true;
  };

  do {
    // connectivity check: need edges over n + k vertices, connected => tree
    std::vector<std::vector<int>> inc(n + k);  // incident edge slots
    for (int e = 0; e < need; ++e) {
      int i = comb[e] / k, j = comb[e] % k;
      inc[i].push_back(e);
      inc[n + j].push_back(e);
    }
    std::vector<bool> seen(n + k, false);
    std::vector<int> stack{0};
    seen[0] = true;
    int reached = 1;
    while (!stack.empty()) {
      int x = stack.back();
      stack.pop_back();
      for (int e : inc[x]) {
        int i = comb[e] / k, j = n + comb[e] % k;
        int other = (x == i) ? j : i;
        if (!seen[other]) {
          seen[other] = true;
          ++reached;
          stack.push_back(other);
        }
      }
    }
    if (reached != n + k) continue;

    // unique flow on the tree by repeatedly resolving leaves
    std::vector<double> rem(n + k);
    for (int i = 0; i < n; ++i) rem[i] = u(i);
    for (int j = 0; j < k; ++j) rem[n + j] = v(j);
    std::vector<int> deg(n + k);
    std::vector<bool> done(need, false);
    for (int x = 0; x < n + k; ++x) deg[x] = static_cast<int>(inc[x].size());
    std::vector<double> flow(need, 0.0);
    std::vector<int> leaves;
    for (int x = 0; x < n + k; ++x)
      if (deg[x] == 1) leaves.push_back(x);
    int solved = 0;
    while (!leaves.empty()) {
      int x = leaves.back();
      leaves.pop_back();
      if (deg[x] != 1) continue;
      int edge = -1;
      for (int e : inc[x])
        if (!done[e]) edge = e;
      int i = comb[edge] / k, j = n + comb[edge] % k;
      double f = rem[x];
      flow[edge] = f;
      done[edge] = true;
      ++solved;
      rem[i] -= f;
      rem[j] -= f;
      --deg[i];
      --deg[j];
      int other = (x == i) ? j : i;
      if (deg[other] == 1) leaves.push_back(other);
    }
    if (solved != need) continue;

    bool feasible = true;
    double cost = 0.0;
    for (int e = 0; e < need; ++e) {
      if (flow[e] < -1e-12) {
        feasible = false;
        break;
      }
      cost += flow[e] * m(comb[e] / k, comb[e] % k);
    }
    if (feasible && cost < best) best = cost;
  } while (advance());

  if (!std::isfinite(best)) throw std::runtime_error("enumeration found no feasible basis");
  return best;
}

// Plain full-batch gradient descent over a set of matrices; `build` must
// assemble the scalar loss from fresh leaves handed to it in order. Used to
// cross-check closed-form minimizers.
inline std::vector<OMat> gd_minimize(
    const std::function<dcgnn::ad::Tensor(dcgnn::ad::Tape&, const std::vector<dcgnn::ad::Tensor>&)>&
        build,
    std::vector<OMat> params, double lr, int steps) {
  for (int s = 0; s < steps; ++s) {
    dcgnn::ad::Tape tape;
    std::vector<dcgnn::ad::Tensor> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.leaf(p, true));
    dcgnn::ad::GradientMap grads = tape.backward(build(tape, leaves));
    for (size_t k = 0; k < params.size(); ++k)
      if (const OMat* g = grads.find(leaves[k])) params[k] -= lr * (*g);
  }
  return params;
}

}  // namespace dcgnn::testing
