// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

#include <utility>
#include <vector>

#include "gmatch/core.hpp"

namespace gmatch {

constexpr double kNormEps = 1e-12;

// v / ||v||_2. Zero (or sub-epsilon) vectors come back unchanged with the
// degenerate flag set. Non-finite input throws InvalidFeature.
struct NormalizedFeature {
  Vec value;
  bool degenerate = false;
};
NormalizedFeature normalize_feature(const Vec& v);

// l2-normalized concatenation [h_i, h_i2]; for unit inputs this equals the
// concatenation scaled by 1/sqrt(2).
Vec edge_feature(const Vec& h_i, const Vec& h_i2);

// Rows of f are vertex features; returns the n(n-1) x 2d matrix of edge
// features for every ordered pair, in canonical edge order.
Mat edge_feature_matrix(const Mat& f);

// Complete directed graph over one view's entities.
struct ViewGraph {
  int n = 0;
  Mat vertex_features;          // n x d, unit rows (except flagged)
  Mat edge_features;            // n(n-1) x 2d, unit rows
  std::vector<BBox> boxes;      // n geometric vectors
  std::vector<char> degenerate; // per-vertex zero-feature flags

  int edge_count() const { return n > 1 ? n * (n - 1) : 0; }

  // Canonical enumeration of ordered pairs (i, j), i != j.
  static int edge_index(int i, int j, int n);
  static std::pair<int, int> edge_at(int u, int n);
};

// Builds a graph from raw per-vertex features (rows) and boxes. Features are
// l2-normalized; edge features are derived from the normalized vertices.
ViewGraph build_view_graph(const Mat& raw_features, const std::vector<BBox>& boxes);

ViewGraph build_detection_graph(const std::vector<Detection>& detections);

struct AggregateMethod {
  enum Kind { Mean, MovingAverage, Last } kind = Mean;
  double alpha = 0.5;

  static AggregateMethod mean() { return {Mean, 0.0}; }
  static AggregateMethod moving_average(double a) { return {MovingAverage, a}; }
  static AggregateMethod last() { return {Last, 0.0}; }
};

Vec aggregate_tracklet_feature(const std::vector<Vec>& history_features,
                               const AggregateMethod& method = AggregateMethod::mean());

// Vertex features from aggregated history features, boxes from the (already
// predicted) Kalman means.
ViewGraph build_tracklet_graph(const std::vector<Tracklet>& tracklets,
                               const AggregateMethod& method = AggregateMethod::mean());

}  // namespace gmatch
