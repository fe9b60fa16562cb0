// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gmatch/core.hpp"
#include "gmatch/io.hpp"

namespace gmatch {

// Two targets trade places; around the crossing frame their detection
// features are corrupted the way mutual occlusion corrupts crops: the back
// box mostly shows the front identity, the front box is diluted by clutter.
struct CrossingSpec {
  int front = 0;
  int back = 1;
  double front_own = 0.35;   // own-base weight left in the front detection
  double back_own = 0.25;    // own-base weight left in the back detection
  double back_steal = 0.97;  // front-base weight leaking into the back detection
  int half_window = 3;       // corrupted frames on each side of the crossing
};

struct OcclusionSpec {
  int target = 0;
  int start = 20;    // first dropped frame (1-based)
  int length = 50;
};

struct ScenarioConfig {
  int targets = 6;
  int frames = 60;
  int feat_dim = 16;
  double arena_w = 1920.0;
  double arena_h = 1080.0;
  double box_w = 60.0;
  double box_h = 120.0;
  double feat_noise = 0.0;
  double box_noise = 0.0;
  std::vector<CrossingSpec> crossings;
  std::vector<OcclusionSpec> occlusions;
};

struct Scenario {
  ScenarioConfig config;
  std::uint64_t seed = 0;
  std::vector<MotRecord> ground_truth;
  std::vector<MotRecord> detections;   // id = -1, aligned with feature rows
  Mat features;                        // one row per detection record
  Mat base_features;                   // one unit row per identity
};

Scenario gen_scenario(const ScenarioConfig& config, std::uint64_t seed);

// Detections of one frame with features attached, ready for the tracker.
std::vector<Detection> scenario_frame(const Scenario& s, int frame);

ScenarioConfig scenario_preset(const std::string& name);
void apply_kv_config(ScenarioConfig& config,
                     const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace gmatch
