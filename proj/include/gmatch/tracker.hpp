// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "gmatch/core.hpp"
#include "gmatch/gcn.hpp"
#include "gmatch/graph.hpp"
#include "gmatch/io.hpp"

namespace gmatch {

// --- constant-velocity Kalman motion model --------------------------------

KalmanState kf_initiate(const BBox& box);
KalmanState kf_predict(const KalmanState& state);
KalmanState kf_update(const KalmanState& state, const BBox& measurement);
double mahalanobis2(const KalmanState& state, const BBox& measurement);

// --- association -----------------------------------------------------------

// Repeated global argmax with row/column deletion; lexicographic tie-break.
std::vector<std::pair<int, int>> greedy_round(const Mat& x);

enum class SolverKind { Qp, Gst };

struct TrackerConfig {
  double sigma = 0.6;        // appearance threshold (0.7 static with geometry)
  double kappa = 9.4877;     // squared-Mahalanobis gate, chi^2 0.95 at 4 dof
  int max_age = 100;         // frames a tracklet survives without updates
  SolverKind solver = SolverKind::Qp;
  bool use_geo = false;
  bool run_interpolation = false;
  bool zero_quadratic = false;   // bipartite baseline: force M = 0
  int gcn_layers = 1;
  int max_enum = 16;
  AggregateMethod aggregate = AggregateMethod::mean();
  SolveOptions qp;

  static TrackerConfig defaults(bool geo) {
    TrackerConfig c;
    c.use_geo = geo;
    c.sigma = geo ? 0.7 : 0.6;
    return c;
  }
};

// Keeps a match only when B > sigma, d^2 < kappa and IoU > 0.
std::vector<std::pair<int, int>> apply_constraints(
    const std::vector<std::pair<int, int>>& matches, const Mat& b, const Mat& maha2,
    const Mat& iou_dt, const TrackerConfig& cfg);

// Hungarian on 1 - IoU between leftover detections and tracklets; pairs with
// zero overlap never match.
std::vector<std::pair<int, int>> iou_fallback(const std::vector<int>& det_ids,
                                              const std::vector<int>& track_ids,
                                              const Mat& iou_dt);

struct TrackerState {
  std::vector<Tracklet> live;
  int next_id = 1;
  std::vector<MotRecord> outputs;
  int frame = 0;
};

struct FrameEvents {
  std::vector<std::pair<int, int>> matches;       // (detection idx, tracklet id)
  std::vector<std::pair<int, int>> fallback_matches;
  std::vector<int> new_ids;
  std::vector<int> retired_ids;
  bool solver_degraded = false;
};

// One online association step: predict, build graphs, enhance, match, filter,
// fall back on IoU, update lifecycles.
FrameEvents tracker_step(TrackerState& state, const std::vector<Detection>& detections,
                         const TrackerConfig& cfg, const GcnParams* params = nullptr);

// Per-id linear interpolation of missing frames; no extrapolation.
std::vector<MotRecord> interpolate(const std::vector<MotRecord>& trajectories);

}  // namespace gmatch
