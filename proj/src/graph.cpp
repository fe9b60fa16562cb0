// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include "gmatch/graph.hpp"

#include <cmath>

namespace gmatch {

double iou(const BBox& a, const BBox& b) {
  const double ix = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double iy = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

NormalizedFeature normalize_feature(const Vec& v) {
  if (!v.allFinite()) throw InvalidFeature("normalize_feature: non-finite input");
  const double norm = v.norm();
  if (norm <= kNormEps) return {v, true};
  return {v / norm, false};
}

Vec edge_feature(const Vec& h_i, const Vec& h_i2) {
  if (h_i.size() != h_i2.size())
    throw DimError("edge_feature: endpoint dimensions differ");
  Vec cat(h_i.size() + h_i2.size());
  cat << h_i, h_i2;
  return normalize_feature(cat).value;
}

int ViewGraph::edge_index(int i, int j, int n) {
  return i * (n - 1) + (j > i ? j - 1 : j);
}

std::pair<int, int> ViewGraph::edge_at(int u, int n) {
  const int i = u / (n - 1);
  int j = u % (n - 1);
  if (j >= i) ++j;
  return {i, j};
}

Mat edge_feature_matrix(const Mat& f) {
  const int n = static_cast<int>(f.rows());
  const int d = static_cast<int>(f.cols());
  if (n < 2) return Mat(0, 2 * d);
  Mat e(n * (n - 1), 2 * d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      Vec cat(2 * d);
      cat << f.row(i).transpose(), f.row(j).transpose();
      e.row(ViewGraph::edge_index(i, j, n)) = normalize_feature(cat).value.transpose();
    }
  }
  return e;
}

ViewGraph build_view_graph(const Mat& raw_features, const std::vector<BBox>& boxes) {
  ViewGraph g;
  g.n = static_cast<int>(raw_features.rows());
  if (static_cast<int>(boxes.size()) != g.n)
    throw DimError("build_view_graph: box count does not match feature rows");
  g.vertex_features = Mat(g.n, raw_features.cols());
  g.degenerate.assign(g.n, 0);
  for (int i = 0; i < g.n; ++i) {
    auto nf = normalize_feature(raw_features.row(i).transpose());
    g.vertex_features.row(i) = nf.value.transpose();
    g.degenerate[i] = nf.degenerate ? 1 : 0;
  }
  g.edge_features = edge_feature_matrix(g.vertex_features);
  g.boxes = boxes;
  return g;
}

ViewGraph build_detection_graph(const std::vector<Detection>& detections) {
  const int n = static_cast<int>(detections.size());
  if (n == 0) return ViewGraph{};
  const int d = static_cast<int>(detections[0].feature.size());
  Mat f(n, d);
  std::vector<BBox> boxes(n);
  for (int i = 0; i < n; ++i) {
    if (detections[i].feature.size() != d)
      throw DimError("build_detection_graph: inconsistent feature dimensions");
    f.row(i) = detections[i].feature.transpose();
    boxes[i] = detections[i].bbox;
  }
  return build_view_graph(f, boxes);
}

Vec aggregate_tracklet_feature(const std::vector<Vec>& history_features,
                               const AggregateMethod& method) {
  if (history_features.empty())
    throw EmptyTracklet("aggregate_tracklet_feature: empty history");
  switch (method.kind) {
    case AggregateMethod::Last:
      return history_features.back();
    case AggregateMethod::MovingAverage: {
      Vec a = history_features.front();
      for (std::size_t k = 1; k < history_features.size(); ++k)
        a = (1.0 - method.alpha) * a + method.alpha * history_features[k];
      return normalize_feature(a).value;
    }
    case AggregateMethod::Mean:
    default: {
      Vec sum = Vec::Zero(history_features.front().size());
      for (const Vec& f : history_features) sum += f;
      return normalize_feature(sum).value;
    }
  }
}

ViewGraph build_tracklet_graph(const std::vector<Tracklet>& tracklets,
                               const AggregateMethod& method) {
  const int n = static_cast<int>(tracklets.size());
  if (n == 0) return ViewGraph{};
  std::vector<BBox> boxes(n);
  Mat f;
  for (int i = 0; i < n; ++i) {
    const Tracklet& t = tracklets[i];
    std::vector<Vec> feats;
    feats.reserve(t.history.size());
    for (const Detection& d : t.history) feats.push_back(d.feature);
    Vec agg = aggregate_tracklet_feature(feats, method);
    if (f.size() == 0) f = Mat(n, agg.size());
    f.row(i) = agg.transpose();
    boxes[i] = t.kalman.box();
  }
  return build_view_graph(f, boxes);
}

}  // namespace gmatch
