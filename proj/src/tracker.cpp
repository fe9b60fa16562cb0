// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include "gmatch/tracker.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "gmatch/affinity.hpp"
#include "gmatch/diffmatch.hpp"
#include "gmatch/gst.hpp"

namespace gmatch {

namespace {

// DeepSORT-style noise scales, proportional to box height
constexpr double kStdWeightPos = 1.0 / 20.0;
constexpr double kStdWeightVel = 1.0 / 160.0;
constexpr double kMinBoxSize = 1e-3;

using Mat8 = Eigen::Matrix<double, 8, 8>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Vec4 = Eigen::Matrix<double, 4, 1>;

Mat8 transition() {
  Mat8 f = Mat8::Identity();
  for (int i = 0; i < 4; ++i) f(i, i + 4) = 1.0;
  return f;
}

Vec4 measurement_of(const BBox& b) { return Vec4(b.cx, b.cy, b.w, b.h); }

Mat4 measurement_noise(double h) {
  const double sp = kStdWeightPos * std::max(h, kMinBoxSize);
  return Vec4(sp * sp, sp * sp, sp * sp, sp * sp).asDiagonal();
}

Mat8 process_noise(double h) {
  const double sp = kStdWeightPos * std::max(h, kMinBoxSize);
  const double sv = kStdWeightVel * std::max(h, kMinBoxSize);
  Vec8 d;
  d << sp * sp, sp * sp, sp * sp, sp * sp, sv * sv, sv * sv, sv * sv, sv * sv;
  return d.asDiagonal();
}

}  // namespace

KalmanState kf_initiate(const BBox& box) {
  KalmanState s;
  s.mean.head<4>() = measurement_of(box);
  const double h = std::max(box.h, kMinBoxSize);
  const double sp = 2.0 * kStdWeightPos * h;
  const double sv = 10.0 * kStdWeightVel * h;
  Vec8 d;
  d << sp * sp, sp * sp, sp * sp, sp * sp, sv * sv, sv * sv, sv * sv, sv * sv;
  s.covariance = d.asDiagonal();
  return s;
}

KalmanState kf_predict(const KalmanState& state) {
  KalmanState s;
  const Mat8 f = transition();
  s.mean = f * state.mean;
  s.covariance = f * state.covariance * f.transpose() + process_noise(s.mean(3));
  return s;
}

KalmanState kf_update(const KalmanState& state, const BBox& measurement) {
  KalmanState s = state;
  const Vec4 z = measurement_of(measurement);
  const Mat4 r = measurement_noise(measurement.h);

  const Eigen::Matrix<double, 4, 8> h = Eigen::Matrix<double, 4, 8>::Identity();
  const Mat4 innov_cov = state.covariance.topLeftCorner<4, 4>() + r;
  const Vec4 innov = z - state.mean.head<4>();
  const Eigen::Matrix<double, 8, 4> gain =
      state.covariance.leftCols<4>() * innov_cov.llt().solve(Mat4::Identity());

  s.mean = state.mean + gain * innov;
  s.covariance = state.covariance - gain * h * state.covariance;

  // re-symmetrize and clamp in case of numerical drift
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Mat8> eig(s.covariance);
  if (eig.eigenvalues().minCoeff() < 0.0) {
    const Vec8 fixed = eig.eigenvalues().cwiseMax(0.0);
    s.covariance = eig.eigenvectors() * fixed.asDiagonal() * eig.eigenvectors().transpose();
  }
  s.mean(2) = std::max(s.mean(2), kMinBoxSize);
  s.mean(3) = std::max(s.mean(3), kMinBoxSize);
  return s;
}

double mahalanobis2(const KalmanState& state, const BBox& measurement) {
  const Mat4 innov_cov =
      state.covariance.topLeftCorner<4, 4>() + measurement_noise(state.mean(3));
  const Vec4 innov = measurement_of(measurement) - state.mean.head<4>();
  return innov.dot(innov_cov.llt().solve(innov));
}

std::vector<std::pair<int, int>> greedy_round(const Mat& x) {
  if (!x.allFinite()) throw InvalidFeature("greedy_round: non-finite scores");
  std::vector<std::pair<int, int>> out;
  std::vector<char> row_used(x.rows(), 0), col_used(x.cols(), 0);
  const int rounds = static_cast<int>(std::min(x.rows(), x.cols()));
  for (int k = 0; k < rounds; ++k) {
    int bi = -1, bj = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < x.rows(); ++i) {
      if (row_used[i]) continue;
      for (int j = 0; j < x.cols(); ++j) {
        if (col_used[j]) continue;
        if (x(i, j) > best) {
          best = x(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0) break;
    row_used[bi] = 1;
    col_used[bj] = 1;
    out.emplace_back(bi, bj);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<int, int>> apply_constraints(
    const std::vector<std::pair<int, int>>& matches, const Mat& b, const Mat& maha2,
    const Mat& iou_dt, const TrackerConfig& cfg) {
  std::vector<std::pair<int, int>> kept;
  for (const auto& [i, j] : matches)
    if (b(i, j) > cfg.sigma && maha2(i, j) < cfg.kappa && iou_dt(i, j) > 0.0)
      kept.emplace_back(i, j);
  return kept;
}

std::vector<std::pair<int, int>> iou_fallback(const std::vector<int>& det_ids,
                                              const std::vector<int>& track_ids,
                                              const Mat& iou_dt) {
  std::vector<std::pair<int, int>> out;
  if (det_ids.empty() || track_ids.empty()) return out;
  constexpr double kForbidden = 1e6;
  Mat cost(det_ids.size(), track_ids.size());
  for (std::size_t a = 0; a < det_ids.size(); ++a)
    for (std::size_t c = 0; c < track_ids.size(); ++c) {
      const double v = iou_dt(det_ids[a], track_ids[c]);
      cost(a, c) = v > 0.0 ? 1.0 - v : kForbidden;
    }
  std::vector<int> row_to;
  hungarian(cost, row_to);
  for (std::size_t a = 0; a < det_ids.size(); ++a) {
    if (row_to[a] < 0) continue;
    if (cost(a, row_to[a]) >= kForbidden) continue;
    out.emplace_back(det_ids[a], track_ids[row_to[a]]);
  }
  return out;
}

namespace {

void retire_old(TrackerState& state, const TrackerConfig& cfg, FrameEvents& ev) {
  std::vector<Tracklet> keep;
  keep.reserve(state.live.size());
  for (Tracklet& t : state.live) {
    if (t.age_since_update > cfg.max_age)
      ev.retired_ids.push_back(t.id);
    else
      keep.push_back(std::move(t));
  }
  state.live = std::move(keep);
}

void spawn_tracklet(TrackerState& state, const Detection& det, FrameEvents& ev) {
  Tracklet t;
  t.id = state.next_id++;
  t.history.push_back(det);
  t.agg_feature = det.feature;
  t.kalman = kf_initiate(det.bbox);
  t.age_since_update = 0;
  ev.new_ids.push_back(t.id);
  state.live.push_back(std::move(t));
}

}  // namespace

FrameEvents tracker_step(TrackerState& state, const std::vector<Detection>& detections,
                         const TrackerConfig& cfg, const GcnParams* params) {
  FrameEvents ev;
  state.frame += 1;

  // predict all live tracklets and age them
  for (Tracklet& t : state.live) {
    t.kalman = kf_predict(t.kalman);
    t.age_since_update += 1;
  }

  // normalize incoming features
  std::vector<Detection> dets = detections;
  for (Detection& d : dets) d.feature = normalize_feature(d.feature).value;

  const int nd = static_cast<int>(dets.size());
  const int nt = static_cast<int>(state.live.size());

  std::vector<char> det_matched(nd, 0);
  std::vector<int> tracklet_for_det(nd, -1);

  if (nd > 0 && nt > 0) {
    ViewGraph gd = build_detection_graph(dets);
    ViewGraph gt = build_tracklet_graph(state.live, cfg.aggregate);

    // Cross-graph feature enhancement runs with trained parameters only; an
    // untrained pass of the message update compresses all affinities toward 1
    // and erases the margins the gates depend on.
    if (params) {
      GcnOut enhanced = gcn_forward(gd.vertex_features, gt.vertex_features, gd.boxes,
                                    gt.boxes, *params, cfg.use_geo);
      gd = build_view_graph(enhanced.hd, gd.boxes);
      gt = build_view_graph(enhanced.ht, gt.boxes);
    }

    AffinityPair aff = build_affinity(gd, gt);
    if (cfg.zero_quadratic) aff.M.setZero();

    Mat maha2(nd, nt), iou_dt(nd, nt);
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nt; ++j) {
        maha2(i, j) = mahalanobis2(state.live[j].kalman, dets[i].bbox);
        iou_dt(i, j) = iou(dets[i].bbox, state.live[j].kalman.box());
      }

    std::vector<std::pair<int, int>> raw;
    if (cfg.solver == SolverKind::Gst) {
      const GateGraph gates = build_gate_graph(aff.B, maha2, iou_dt, cfg.sigma, cfg.kappa);
      GstOptions gopt;
      gopt.max_enum = cfg.max_enum;
      raw = gst_solve(aff.M, aff.B, gates, gopt).matches;
    } else {
      ScoreMap fwd = gm_forward(aff.M, aff.B, cfg.qp);
      if (fwd.solution.status == QpStatus::Optimal) {
        raw = greedy_round(fwd.X);
      } else {
        // degrade to gated bipartite matching on -B
        ev.solver_degraded = true;
        constexpr double kForbidden = 1e6;
        Mat cost(nd, nt);
        for (int i = 0; i < nd; ++i)
          for (int j = 0; j < nt; ++j) {
            const bool gated = aff.B(i, j) > cfg.sigma && maha2(i, j) < cfg.kappa &&
                               iou_dt(i, j) > 0.0;
            cost(i, j) = gated ? -aff.B(i, j) : kForbidden;
          }
        std::vector<int> row_to;
        hungarian(cost, row_to);
        for (int i = 0; i < nd; ++i)
          if (row_to[i] >= 0 && cost(i, row_to[i]) < kForbidden)
            raw.emplace_back(i, row_to[i]);
      }
    }

    const auto kept = apply_constraints(raw, aff.B, maha2, iou_dt, cfg);
    for (const auto& [i, j] : kept) {
      det_matched[i] = 1;
      tracklet_for_det[i] = j;
      ev.matches.emplace_back(i, state.live[j].id);
    }

    // IoU association for what the filter left over
    std::vector<int> free_dets, free_tracks;
    std::vector<char> track_taken(nt, 0);
    for (const auto& [i, j] : kept) track_taken[j] = 1;
    for (int i = 0; i < nd; ++i)
      if (!det_matched[i]) free_dets.push_back(i);
    for (int j = 0; j < nt; ++j)
      if (!track_taken[j]) free_tracks.push_back(j);
    for (const auto& [i, j] : iou_fallback(free_dets, free_tracks, iou_dt)) {
      det_matched[i] = 1;
      tracklet_for_det[i] = j;
      ev.fallback_matches.emplace_back(i, state.live[j].id);
    }
  }

  // update matched tracklets
  for (int i = 0; i < nd; ++i) {
    if (tracklet_for_det[i] < 0) continue;
    Tracklet& t = state.live[tracklet_for_det[i]];
    t.history.push_back(dets[i]);
    t.kalman = kf_update(t.kalman, dets[i].bbox);
    t.age_since_update = 0;
    std::vector<Vec> feats;
    feats.reserve(t.history.size());
    for (const Detection& d : t.history) feats.push_back(d.feature);
    t.agg_feature = aggregate_tracklet_feature(feats, cfg.aggregate);
    state.outputs.push_back(MotRecord::from_center(state.frame, t.id, dets[i].bbox));
  }

  // leftover detections start new tracklets
  for (int i = 0; i < nd; ++i) {
    if (det_matched[i]) continue;
    spawn_tracklet(state, dets[i], ev);
    state.outputs.push_back(
        MotRecord::from_center(state.frame, state.live.back().id, dets[i].bbox));
  }

  retire_old(state, cfg, ev);
  return ev;
}

std::vector<MotRecord> interpolate(const std::vector<MotRecord>& trajectories) {
  std::map<int, std::map<int, MotRecord>> by_id;
  for (const MotRecord& r : trajectories) by_id[r.id][r.frame] = r;

  std::vector<MotRecord> out;
  for (auto& [id, frames] : by_id) {
    auto it = frames.begin();
    auto prev = it++;
    out.push_back(prev->second);
    for (; it != frames.end(); ++it, ++prev) {
      const int gap = it->first - prev->first;
      for (int k = 1; k < gap; ++k) {
        const double t = static_cast<double>(k) / gap;
        const MotRecord& a = prev->second;
        const MotRecord& b = it->second;
        MotRecord r = a;
        r.frame = prev->first + k;
        r.bb_left = a.bb_left + t * (b.bb_left - a.bb_left);
        r.bb_top = a.bb_top + t * (b.bb_top - a.bb_top);
        r.bb_width = a.bb_width + t * (b.bb_width - a.bb_width);
        r.bb_height = a.bb_height + t * (b.bb_height - a.bb_height);
        r.conf = std::min(a.conf, b.conf);
        out.push_back(r);
      }
      out.push_back(it->second);
    }
  }
  std::sort(out.begin(), out.end(), [](const MotRecord& a, const MotRecord& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  return out;
}

}  // namespace gmatch
