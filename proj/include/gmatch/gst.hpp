// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

#include <utility>
#include <vector>

#include "gmatch/core.hpp"

namespace gmatch {

// Bipartite gate adjacency between detections and tracklets.
struct GateGraph {
  int nd = 0;
  int nt = 0;
  std::vector<std::vector<char>> adj;   // nd x nt

  bool gated(int i, int j) const { return adj[i][j] != 0; }
};

// Edge (i,j) present iff B > sigma, squared Mahalanobis < kappa and IoU > 0.
GateGraph build_gate_graph(const Mat& b, const Mat& maha2, const Mat& iou_dt,
                           double sigma, double kappa);

// A connected piece of the gate graph.
struct Component {
  std::vector<int> dets;
  std::vector<int> tracks;

  int size() const { return static_cast<int>(dets.size() + tracks.size()); }
};

// Connected components by depth-first traversal, sorted by total vertex count
// descending (stable by smallest vertex index); isolated vertices become
// singletons.
std::vector<Component> ficc(const GateGraph& g);

// Minimum-cost maximal matching of a rectangular assignment problem.
// row_to[i] is the assigned column or -1; returns the total cost over
// assigned pairs.
double hungarian(const Mat& cost, std::vector<int>& row_to);

struct Assignment {
  std::vector<std::pair<int, int>> pairs;   // (detection, tracklet), global ids
  double cost = 0.0;
};

// Pairwise cost to the rest of the graph: for each matched pair, a bipartite
// matching over the complement vertex sets on the corresponding M entries,
// maximized and negated.
double edge_cost_approx(const std::vector<std::pair<int, int>>& pi_c, const SpMat& m,
                        const Component& comp, int nd, int nt);

// -pi^T M_c pi + 2 * edge_term - b_c^T pi.
double component_cost(const std::vector<std::pair<int, int>>& pi_c, const SpMat& m,
                      const Mat& b, double edge_term);

struct GstOptions {
  int max_enum = 16;          // component vertex-count bound for enumeration
  bool qp_fallback = true;    // oversized components fall back to a restricted QP
  bool parallel = true;
};

// Exhaustive best assignment within one component, using the partitioned cost.
Assignment enumerate_component(const Component& comp, const SpMat& m, const Mat& b,
                               const GateGraph& gates, int max_enum = 16);

struct GstResult {
  std::vector<std::pair<int, int>> matches;
  double cost = 0.0;                  // sum of per-component costs
  std::vector<int> fallback_components;
};

GstResult gst_solve(const SpMat& m, const Mat& b, const GateGraph& gates,
                    const GstOptions& opts = {});

// Exact minimizer of the quadratic assignment cost -pi^T M pi - b^T pi over
// all gate-consistent partial matchings. Oracle-sized inputs only.
Assignment brute_force_qap(const SpMat& m, const Mat& b, const GateGraph& gates);

}  // namespace gmatch
