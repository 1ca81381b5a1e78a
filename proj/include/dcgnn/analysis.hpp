#pragma once

#include <vector>

#include "dcgnn/graph.hpp"
#include "dcgnn/tensor.hpp"

// Graph diagnostics built on the Laplacian: effective resistance between
// vertices, total resistance under cluster-node augmentation, class homophily,
// and a degree-normalized Dirichlet energy of node embeddings.

namespace dcgnn::analysis {

using ad::Mat;
using ad::Vec;

// Resistance distance between one pair, computed by a linear solve against
// the Laplacian restricted to the pair's connected component. Throws
// DomainError when u and v are not connected.
double effective_resistance(const UndirectedGraph& g, int u, int v);

struct ResistanceReport {
  Mat pairwise;        // symmetric, zero diagonal, restricted to tracked nodes
  double r_tot = 0.0;  // sum over unordered tracked pairs
};

// All-pairs resistances from one eigendecomposition of the Laplacian
// (eigenvalues below 1e-10 count as zero). n_tracked < 0 tracks every vertex;
// otherwise only the first n_tracked vertices enter the report, which is how
// augmented graphs are restricted to their original nodes. Throws DomainError
// on disconnected graphs, naming the component sizes.
ResistanceReport total_effective_resistance(const UndirectedGraph& g, int n_tracked = -1);

// r_tot over the original node pairs after wiring in cluster vertices:
// entry (i, j) augments with local_counts[i] per-node clusters and
// global_counts[j] shared clusters. Cell (0, 0) is the base graph.
Mat resistance_heatmap(const UndirectedGraph& g, const std::vector<int>& global_counts,
                       const std::vector<int>& local_counts);

struct HomophilyMatrix {
  Mat h;                        // classes x classes, rows with edges sum to 1
  double edge_homophily = 0.0;  // fraction of edges joining equal labels
};

// Row c1 of h holds the distribution of neighbor classes over all edge
// endpoints labeled c1 (each undirected edge counted in both directions).
// Every node must be labeled.
HomophilyMatrix homophily_matrix(const UndirectedGraph& g);

// (sum over edges of || z_u/sqrt(1+deg_u) - z_v/sqrt(1+deg_v) ||^2) / ||Z||_F^2.
// Scale invariant; zero for an edgeless graph; DomainError on an all-zero Z.
double dirichlet_energy(const Mat& z, const UndirectedGraph& g);

// Connected components as sorted vertex lists, largest first (ties by lowest
// vertex). Helper shared by the resistance routines and error messages.
std::vector<std::vector<int>> connected_components(const UndirectedGraph& g);

}  // namespace dcgnn::analysis
