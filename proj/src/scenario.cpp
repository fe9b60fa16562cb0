// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include "gmatch/scenario.hpp"

#include <cmath>
#include <random>

#include "gmatch/graph.hpp"

namespace gmatch {

namespace {

Vec random_unit(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = gauss(rng);
  return normalize_feature(v).value;
}

// random unit vector orthogonal to the row span of the given bases
Vec random_orthogonal(const Mat& bases, std::mt19937_64& rng) {
  Vec v = random_unit(static_cast<int>(bases.cols()), rng);
  const Eigen::HouseholderQR<Mat> qr(bases.transpose());
  const Mat q = qr.householderQ() * Mat::Identity(bases.cols(), bases.rows());
  v -= q * (q.transpose() * v);
  return normalize_feature(v).value;
}

struct Path {
  double x0, y0, vx, vy;
  BBox at(int frame, int frames) const {
    (void)frames;
    return BBox{x0 + vx * (frame - 1), y0 + vy * (frame - 1), 0.0, 0.0};
  }
};

}  // namespace

Scenario gen_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  Scenario s;
  s.config = config;
  s.seed = seed;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int k = config.targets;
  const int frames = config.frames;
  const int d = config.feat_dim;

  s.base_features = Mat(k, d);
  for (int t = 0; t < k; ++t) s.base_features.row(t) = random_unit(d, rng).transpose();

  // crossing pairs get orthogonal appearances so the configured corruption
  // weights are the cosines the tracker actually sees
  for (const CrossingSpec& c : config.crossings) {
    Vec front = s.base_features.row(c.front).transpose();
    Vec back = s.base_features.row(c.back).transpose();
    back -= back.dot(front) * front;
    s.base_features.row(c.back) = normalize_feature(back).value.transpose();
  }

  // one horizontal lane per target; crossing pairs share a lane and move in
  // opposite directions so they trade places at the midpoint frame
  std::vector<Path> paths(k);
  const double margin = 4.0 * config.box_w;
  const double span = config.arena_w - 2.0 * margin;
  for (int t = 0; t < k; ++t) {
    const double lane = config.arena_h * (t + 1.0) / (k + 1.0);
    paths[t] = Path{margin, lane, span / std::max(frames - 1, 1), 0.0};
  }
  for (const CrossingSpec& c : config.crossings) {
    const double lane = config.arena_h * (c.front + 1.0) / (k + 1.0);
    const double v = span / std::max(frames - 1, 1);
    paths[c.front] = Path{margin, lane, v, 0.0};
    paths[c.back] = Path{margin + span, lane, -v, 0.0};
  }

  std::vector<Vec> junk(k);
  for (int t = 0; t < k; ++t) junk[t] = random_orthogonal(s.base_features, rng);

  std::vector<std::vector<char>> dropped(k, std::vector<char>(frames + 1, 0));
  for (const OcclusionSpec& o : config.occlusions)
    for (int f = o.start; f < o.start + o.length && f <= frames; ++f)
      if (f >= 1) dropped[o.target][f] = 1;

  std::vector<Vec> feat_rows;
  for (int f = 1; f <= frames; ++f) {
    for (int t = 0; t < k; ++t) {
      const BBox center = paths[t].at(f, frames);
      BBox box{center.cx, center.cy, config.box_w, config.box_h};
      s.ground_truth.push_back(MotRecord::from_center(f, t + 1, box));
      if (dropped[t][f]) continue;

      BBox det_box = box;
      if (config.box_noise > 0.0) {
        det_box.cx += config.box_noise * gauss(rng);
        det_box.cy += config.box_noise * gauss(rng);
      }

      Vec base = s.base_features.row(t).transpose();
      Vec feat = base;
      for (const CrossingSpec& c : config.crossings) {
        const int cross_frame = (frames + 1) / 2;
        if (std::abs(f - cross_frame) > c.half_window) continue;
        if (t == c.front) {
          const double own = c.front_own;
          feat = own * base + std::sqrt(std::max(0.0, 1.0 - own * own)) * junk[t];
        } else if (t == c.back) {
          const Vec front_base = s.base_features.row(c.front).transpose();
          feat = c.back_own * base + c.back_steal * front_base;
        }
      }
      if (config.feat_noise > 0.0) {
        Vec noise(d);
        for (int i = 0; i < d; ++i) noise(i) = gauss(rng);
        feat += config.feat_noise * noise;
      }
      feat = normalize_feature(feat).value;

      s.detections.push_back(MotRecord::from_center(f, -1, det_box));
      feat_rows.push_back(feat);
    }
  }

  s.features = Mat(static_cast<Eigen::Index>(feat_rows.size()), d);
  for (std::size_t r = 0; r < feat_rows.size(); ++r)
    s.features.row(static_cast<Eigen::Index>(r)) = feat_rows[r].transpose();
  return s;
}

std::vector<Detection> scenario_frame(const Scenario& s, int frame) {
  std::vector<Detection> out;
  for (std::size_t r = 0; r < s.detections.size(); ++r) {
    if (s.detections[r].frame != frame) continue;
    Detection d;
    d.frame = frame;
    d.bbox = s.detections[r].center_box();
    d.feature = s.features.row(static_cast<Eigen::Index>(r)).transpose();
    out.push_back(std::move(d));
  }
  return out;
}

ScenarioConfig scenario_preset(const std::string& name) {
  ScenarioConfig c;
  if (name == "basic") {
    c.targets = 6;
    c.frames = 60;
  } else if (name == "crossing") {
    c.targets = 5;
    c.frames = 41;      // odd so the crossing boxes coincide at the middle frame
    c.arena_w = 800.0;  // slow approach keeps the boxes overlapping for frames
    c.feat_noise = 0.02;
    c.box_noise = 0.5;
    c.crossings.push_back(CrossingSpec{});
  } else if (name == "occlusion") {
    c.targets = 3;
    c.frames = 90;
    c.occlusions.push_back(OcclusionSpec{0, 21, 50});
  } else {
    throw ParseError("unknown scenario preset: " + name);
  }
  return c;
}

void apply_kv_config(ScenarioConfig& config,
                     const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [key, val] : kv) {
    if (key == "targets") config.targets = std::stoi(val);
    else if (key == "frames") config.frames = std::stoi(val);
    else if (key == "feat_dim") config.feat_dim = std::stoi(val);
    else if (key == "arena_w") config.arena_w = std::stod(val);
    else if (key == "arena_h") config.arena_h = std::stod(val);
    else if (key == "box_w") config.box_w = std::stod(val);
    else if (key == "box_h") config.box_h = std::stod(val);
    else if (key == "feat_noise") config.feat_noise = std::stod(val);
    else if (key == "box_noise") config.box_noise = std::stod(val);
    else if (key == "crossing" && val == "1") config.crossings.push_back(CrossingSpec{});
    else if (key == "occlusion" && val == "1") config.occlusions.push_back(OcclusionSpec{});
    else throw ParseError("unknown scenario config key: " + key);
  }
}

}  // namespace gmatch
