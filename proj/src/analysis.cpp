#include "dcgnn/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <string>

#include "dcgnn/errors.hpp"

namespace dcgnn::analysis {

namespace {

constexpr double kZeroEigenvalue = 1e-10;

Eigen::MatrixXd laplacian(const UndirectedGraph& g) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(g.n, g.n);
  for (auto [u, v] : g.edges) {
    l(u, u) += 1.0;
    l(v, v) += 1.0;
    l(u, v) -= 1.0;
    l(v, u) -= 1.0;
  }
  return l;
}

std::string component_summary(const std::vector<std::vector<int>>& comps) {
  std::ostringstream out;
  out << comps.size() << " components with sizes ";
  for (size_t i = 0; i < comps.size(); ++i) {
    if (i) out << ", ";
    out << comps[i].size();
  }
  return out.str();
}

}  // namespace

std::vector<std::vector<int>> connected_components(const UndirectedGraph& g) {
  std::vector<int> comp(g.n, -1);
  std::vector<std::vector<int>> out;
  for (int s = 0; s < g.n; ++s) {
    if (comp[s] >= 0) continue;
    int id = static_cast<int>(out.size());
    out.emplace_back();
    std::queue<int> q;
    q.push(s);
    comp[s] = id;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      out[id].push_back(u);
      for (int v : g.adj[u])
        if (comp[v] < 0) {
          comp[v] = id;
          q.push(v);
        }
    }
    std::sort(out[id].begin(), out[id].end());
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  return out;
}

double effective_resistance(const UndirectedGraph& g, int u, int v) {
  if (u < 0 || u >= g.n || v < 0 || v >= g.n) throw DomainError("vertex index out of range");
  if (u == v) return 0.0;

  std::vector<std::vector<int>> comps = connected_components(g);
  const std::vector<int>* home = nullptr;
  for (const auto& c : comps)
    if (std::binary_search(c.begin(), c.end(), u)) {
      home = &c;
      break;
    }
  if (!std::binary_search(home->begin(), home->end(), v))
    throw DomainError("infinite resistance: vertices " + std::to_string(u) + " and " +
                      std::to_string(v) + " are in different components");

  // compress to the shared component and solve (L + J/m) y = 1_u - 1_v;
  // the rank-one shift is invertible and agrees with the pseudoinverse on
  // vectors orthogonal to the all-ones direction
  const int m = static_cast<int>(home->size());
  std::vector<int> pos(g.n, -1);
  for (int i = 0; i < m; ++i) pos[(*home)[i]] = i;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
  for (auto [a, b] : g.edges) {
    if (pos[a] < 0 || pos[b] < 0) continue;
    int x = pos[a], y = pos[b];
    l(x, x) += 1.0;
    l(y, y) += 1.0;
    l(x, y) -= 1.0;
    l(y, x) -= 1.0;
  }
  l.array() += 1.0 / static_cast<double>(m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(pos[u]) = 1.0;
  rhs(pos[v]) = -1.0;
  Eigen::VectorXd y = l.ldlt().solve(rhs);
  return y(pos[u]) - y(pos[v]);
}

ResistanceReport total_effective_resistance(const UndirectedGraph& g, int n_tracked) {
  if (g.n < 1) throw DomainError("empty graph");
  if (n_tracked < 0) n_tracked = g.n;
  if (n_tracked > g.n) throw ShapeError("tracked more vertices than the graph has");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian(g));
  if (eig.info() != Eigen::Success) throw NumericError("Laplacian eigendecomposition failed");
  const Eigen::VectorXd& vals = eig.eigenvalues();
  int zeros = 0;
  for (int i = 0; i < vals.size(); ++i)
    if (vals(i) < kZeroEigenvalue) ++zeros;
  if (zeros != 1)
    throw DomainError("graph is disconnected: " + component_summary(connected_components(g)));

  // pseudoinverse restricted to the nonzero spectrum
  Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(g.n, g.n);
  for (int i = 0; i < vals.size(); ++i)
    if (vals(i) >= kZeroEigenvalue)
      pinv += (1.0 / vals(i)) * eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose();

  ResistanceReport report;
  report.pairwise = Mat::Zero(n_tracked, n_tracked);
  for (int a = 0; a < n_tracked; ++a)
    for (int b = a + 1; b < n_tracked; ++b) {
      double r = pinv(a, a) + pinv(b, b) - 2.0 * pinv(a, b);
      if (r < 0.0 && r > -1e-12) r = 0.0;
      report.pairwise(a, b) = r;
      report.pairwise(b, a) = r;
      report.r_tot += r;
    }
  return report;
}

Mat resistance_heatmap(const UndirectedGraph& g, const std::vector<int>& global_counts,
                       const std::vector<int>& local_counts) {
  if (global_counts.empty() || local_counts.empty())
    throw DomainError("heatmap needs at least one cluster count per axis");
  Mat grid(static_cast<int>(local_counts.size()), static_cast<int>(global_counts.size()));
  for (size_t r = 0; r < local_counts.size(); ++r)
    for (size_t c = 0; c < global_counts.size(); ++c) {
      if (local_counts[r] < 0 || global_counts[c] < 0)
        throw DomainError("cluster counts must be nonnegative");
      UndirectedGraph flat = augment_with_clusters(g, global_counts[c], local_counts[r]);
      grid(static_cast<int>(r), static_cast<int>(c)) =
          total_effective_resistance(flat, g.n).r_tot;
    }
  return grid;
}

HomophilyMatrix homophily_matrix(const UndirectedGraph& g) {
  if (!g.has_labels()) throw DomainError("homophily needs labels on every node");
  for (int i = 0; i < g.n; ++i)
    if (g.labels[i] < 0)
      throw DomainError("homophily needs labels on every node; node " + std::to_string(i) +
                        " is unlabeled");
  int classes = g.num_classes;
  HomophilyMatrix out;
  out.h = Mat::Zero(classes, classes);
  if (g.edges.empty()) return out;

  int equal = 0;
  for (auto [u, v] : g.edges) {
    out.h(g.labels[u], g.labels[v]) += 1.0;
    out.h(g.labels[v], g.labels[u]) += 1.0;
    if (g.labels[u] == g.labels[v]) ++equal;
  }
  for (int c = 0; c < classes; ++c) {
    double row = out.h.row(c).sum();
    if (row > 0.0) out.h.row(c) /= row;
  }
  out.edge_homophily = static_cast<double>(equal) / static_cast<double>(g.num_edges());
  return out;
}

double dirichlet_energy(const Mat& z, const UndirectedGraph& g) {
  if (z.rows() != g.n) throw ShapeError("embedding rows do not match the node count");
  double norm2 = z.squaredNorm();
  if (norm2 == 0.0) throw DomainError("Dirichlet energy of an all-zero embedding");
  double acc = 0.0;
  for (auto [u, v] : g.edges) {
    double su = 1.0 / std::sqrt(1.0 + static_cast<double>(g.degree(u)));
    double sv = 1.0 / std::sqrt(1.0 + static_cast<double>(g.degree(v)));
    acc += (z.row(u) * su - z.row(v) * sv).squaredNorm();
  }
  return acc / norm2;
}

}  // namespace dcgnn::analysis
