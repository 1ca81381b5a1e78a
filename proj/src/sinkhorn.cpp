#include "dcgnn/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dcgnn/errors.hpp"

namespace dcgnn::ot {

MarginalPair MarginalPair::uniform(int n, int k) {
  if (n < 1 || k < 1) throw DomainError("marginals need at least one entry per side");
  MarginalPair m;
  m.row = Vec::Constant(n, 1.0 / n);
  m.col = Vec::Constant(k, 1.0 / k);
  return m;
}

void MarginalPair::validate() const {
  if (row.size() < 1 || col.size() < 1) throw DomainError("empty marginal");
  for (const Vec* v : {&row, &col}) {
    if ((v->array() <= 0.0).any()) throw DomainError("marginals must be strictly positive");
    if (std::abs(v->sum() - 1.0) > 1e-12)
      throw DomainError("marginal does not sum to 1 (got " + std::to_string(v->sum()) + ")");
  }
}

void SinkhornConfig::validate() const {
  if (lambda <= 0.0) throw DomainError("lambda must be positive");
  if (iterations < 1) throw DomainError("iteration count must be at least 1");
  if (min_entry <= 0.0) throw DomainError("entry floor must be positive");
}

Tensor stabilize_cost(const Tensor& m) {
  if ((m.values().array() < 0.0).any()) throw DomainError("cost entries must be nonnegative");
  return ad::scale_by_max(m);
}

namespace {

void check_cost_shape(const Tensor& m, const MarginalPair& marg) {
  marg.validate();
  if (m.rows() != marg.row.size() || m.cols() != marg.col.size())
    throw ShapeError("cost is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " but marginals are " + std::to_string(marg.row.size()) + "/" +
                     std::to_string(marg.col.size()));
}

void fill_residuals(Coupling& c, const MarginalPair& marg) {
  const Mat& p = c.p.values();
  c.row_err = (p.rowwise().sum() - marg.row).cwiseAbs().maxCoeff();
  c.col_err = (p.colwise().sum().transpose() - marg.col).cwiseAbs().maxCoeff();
}

}  // namespace

Coupling sinkhorn_knopp(const Tensor& m, const MarginalPair& marg, const SinkhornConfig& cfg) {
  cfg.validate();
  check_cost_shape(m, marg);
  Tensor b = ad::clamp_min(ad::exp(ad::scale(m, -cfg.lambda)), cfg.min_entry);
  for (int t = 0; t < cfg.iterations; ++t)
    b = (t % 2 == 0) ? ad::row_normalize(b, marg.row) : ad::col_normalize(b, marg.col);
  Coupling out;
  out.p = b;
  fill_residuals(out, marg);
  return out;
}

Coupling sinkhorn_to_convergence(const Tensor& m, const MarginalPair& marg, double lambda,
                                 double tol, int max_iters, double min_entry) {
  SinkhornConfig probe{lambda, 1, min_entry};
  probe.validate();
  if (tol <= 0.0) throw DomainError("tolerance must be positive");
  check_cost_shape(m, marg);
  Tensor b = ad::clamp_min(ad::exp(ad::scale(m, -lambda)), min_entry);
  Coupling out;
  for (int sweep = 0; sweep < max_iters; ++sweep) {
    b = ad::col_normalize(ad::row_normalize(b, marg.row), marg.col);
    out.p = b;
    fill_residuals(out, marg);
    if (out.row_err <= tol && out.col_err <= tol) return out;
  }
  throw NumericError("sinkhorn did not reach residual " + std::to_string(tol) + " within " +
                     std::to_string(max_iters) + " sweeps");
}

Mat scale_to_marginals(Mat b, const MarginalPair& marg, double tol, int max_iters) {
  marg.validate();
  if (b.rows() != marg.row.size() || b.cols() != marg.col.size())
    throw ShapeError("matrix shape does not match marginals");
  if ((b.array() <= 0.0).any()) throw DomainError("scaling requires strictly positive entries");
  for (int sweep = 0; sweep < max_iters; ++sweep) {
    for (int i = 0; i < b.rows(); ++i) b.row(i) *= marg.row(i) / b.row(i).sum();
    for (int j = 0; j < b.cols(); ++j) b.col(j) *= marg.col(j) / b.col(j).sum();
    double row_err = (b.rowwise().sum() - marg.row).cwiseAbs().maxCoeff();
    double col_err = (b.colwise().sum().transpose() - marg.col).cwiseAbs().maxCoeff();
    if (row_err <= tol && col_err <= tol) return b;
  }
  throw NumericError("matrix scaling did not converge");
}

LpSolution ot_lp_oracle(const Mat& m, const MarginalPair& marg) {
  marg.validate();
  const int n = static_cast<int>(marg.row.size());
  const int k = static_cast<int>(marg.col.size());
  if (m.rows() != n || m.cols() != k) throw ShapeError("cost shape does not match marginals");
  if (n * k > 64) throw DomainError("oracle restricted to instances with at most 64 cells");

  // Successive shortest augmenting paths on the bipartite flow network.
  // Vertices: sources 0..n-1 (supply u_i), sinks n..n+k-1 (demand v_j).
  // Node potentials keep every residual arc nonnegative so plain Dijkstra
  // finds the paths and the parent pointers can never cycle.
  const double eps = 1e-14;
  const double inf = std::numeric_limits<double>::infinity();
  Mat flow = Mat::Zero(n, k);
  Vec supply = marg.row, demand = marg.col;
  const int V = n + k;
  std::vector<double> phi(V, 0.0);
  for (int j = 0; j < k; ++j) phi[n + j] = m.col(j).minCoeff();
  int guard = 0;
  while (supply.sum() >= 1e-12) {
    if (++guard > 8 * V * n * k) throw NumericError("transport oracle failed to terminate");

    std::vector<double> dist(V, inf);
    std::vector<int> parent(V, -1);
    std::vector<bool> settled(V, false);
    for (int i = 0; i < n; ++i)
      if (supply(i) > eps) dist[i] = 0.0;
    for (int step = 0; step < V; ++step) {
      int x = -1;
      for (int y = 0; y < V; ++y)
        if (!settled[y] && dist[y] < inf && (x < 0 || dist[y] < dist[x])) x = y;
      if (x < 0) break;
      settled[x] = true;
      if (x < n) {
        for (int j = 0; j < k; ++j) {
          double w = m(x, j) + phi[x] - phi[n + j];  // reduced cost, >= 0
          if (w < 0.0) w = 0.0;                      // clip rounding dust
          if (dist[x] + w < dist[n + j]) {
            dist[n + j] = dist[x] + w;
            parent[n + j] = x;
          }
        }
      } else {
        int j = x - n;
        for (int i = 0; i < n; ++i) {
          if (flow(i, j) <= eps) continue;
          double w = -m(i, j) + phi[x] - phi[i];
          if (w < 0.0) w = 0.0;
          if (dist[x] + w < dist[i]) {
            dist[i] = dist[x] + w;
            parent[i] = x;
          }
        }
      }
    }

    int best_sink = -1;
    for (int j = 0; j < k; ++j)
      if (demand(j) > eps && dist[n + j] < inf && (best_sink < 0 || dist[n + j] < dist[best_sink]))
        best_sink = n + j;
    if (best_sink < 0) throw NumericError("transport oracle found no augmenting path");

    // walk back to a source, collecting the bottleneck
    std::vector<int> path;  // vertices sink..source
    for (int at = best_sink; at >= 0; at = parent[at]) {
      path.push_back(at);
      if (static_cast<int>(path.size()) > V) throw NumericError("transport oracle path cycled");
    }
    int source = path.back();
    double delta = std::min(supply(source), demand(best_sink - n));
    for (size_t s = 0; s + 1 < path.size(); ++s) {
      int from = path[s + 1];
      if (from < n) continue;  // forward arc, unbounded
      delta = std::min(delta, flow(path[s], from - n));  // backward arc j->i
    }
    for (size_t s = 0; s + 1 < path.size(); ++s) {
      int to = path[s], from = path[s + 1];
      if (from < n)
        flow(from, to - n) += delta;  // source -> sink
      else
        flow(to, from - n) -= delta;  // sink -> source (undo)
    }
    supply(source) -= delta;
    demand(best_sink - n) -= delta;

    for (int x = 0; x < V; ++x)
      if (dist[x] < inf) phi[x] += dist[x];
  }

  double row_err = (flow.rowwise().sum() - marg.row).cwiseAbs().maxCoeff();
  double col_err = (flow.colwise().sum().transpose() - marg.col).cwiseAbs().maxCoeff();
  if (row_err > 1e-9 || col_err > 1e-9 || (flow.array() < -1e-12).any())
    throw NumericError("transport oracle produced an infeasible plan");
  return {flow.cwiseProduct(m).sum(), std::move(flow)};
}

double entropy(const Mat& p) {
  double h = 0.0;
  for (int i = 0; i < p.rows(); ++i)
    for (int j = 0; j < p.cols(); ++j) {
      double v = p(i, j);
      if (v < 0.0) throw DomainError("entropy of negative entry");
      if (v > 0.0) h -= v * std::log(v);
    }
  return h;
}

double transport_cost(const Mat& p, const Mat& m) {
  if (p.rows() != m.rows() || p.cols() != m.cols()) throw ShapeError("coupling/cost shape mismatch");
  return p.cwiseProduct(m).sum();
}

}  // namespace dcgnn::ot
