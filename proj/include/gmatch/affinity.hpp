// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

#include "gmatch/core.hpp"
#include "gmatch/graph.hpp"

namespace gmatch {

// Canonical detection-major vectorization of pair (i, j), 0-based.
inline int pair_index(int i, int j, int nt) { return i * nt + j; }

// Vertex affinity B[i,j] = h_i . h_j (cosine for unit features).
Mat vertex_affinity(const ViewGraph& gd, const ViewGraph& gt);
Mat vertex_affinity_serial(const ViewGraph& gd, const ViewGraph& gt);

// Edge affinity Me[u,v] = e_u . e_v over all ordered edge pairs; empty when
// either graph has fewer than two vertices.
Mat edge_affinity(const ViewGraph& gd, const ViewGraph& gt);
Mat edge_affinity_serial(const ViewGraph& gd, const ViewGraph& gt);

// Expanded sparse quadratic affinity: M[p(i,j), p(i',j')] = Me[(i,i'),(j,j')]
// for i != i', j != j'; zero elsewhere. Symmetric for complete graphs.
SpMat expand_affinity(const Mat& me, int nd, int nt);
SpMat expand_affinity_serial(const Mat& me, int nd, int nt);

// Gershgorin lower bound on the smallest eigenvalue of (n-1)^2 I - M:
// (n-1)^2 minus the largest absolute row sum of M.
double convexity_margin(const SpMat& m, int n);

struct AffinityPair {
  Mat B;
  Mat Me;
  SpMat M;
  int nd = 0;
  int nt = 0;
};

AffinityPair build_affinity(const ViewGraph& gd, const ViewGraph& gt);

// Pulls gradients w.r.t. B and M back to the unit vertex features that the
// affinities (including the concatenated edge features) were built from.
struct AffinityGrads {
  Mat g_fd;
  Mat g_ft;
};
AffinityGrads affinity_backward(const Mat& fd, const Mat& ft, const Mat& g_b,
                                const SpMat& g_m);

}  // namespace gmatch
