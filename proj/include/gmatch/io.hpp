// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

#include <string>
#include <vector>

#include "gmatch/core.hpp"
#include "gmatch/gcn.hpp"

namespace gmatch {

// One MOT CSV row: frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z.
// Boxes are corner format on disk; center format is used internally.
struct MotRecord {
  int frame = 1;
  int id = -1;
  double bb_left = 0.0;
  double bb_top = 0.0;
  double bb_width = 0.0;
  double bb_height = 0.0;
  double conf = 1.0;
  double x = -1.0;
  double y = -1.0;
  double z = -1.0;

  BBox center_box() const {
    return BBox::from_corner(bb_left, bb_top, bb_width, bb_height);
  }
  static MotRecord from_center(int frame, int id, const BBox& b, double conf = 1.0);
};

std::vector<MotRecord> read_mot(const std::string& path);
void write_mot(const std::string& path, const std::vector<MotRecord>& records);

// GMFEAT01: magic, u64 rows, u64 cols (little endian), row-major float32.
Mat read_features(const std::string& path);
void write_features(const std::string& path, const Mat& features);

// GMPARAM1 checkpoint: magic, u64 d_in, u64 d, u64 layer count, then the
// encoder and per-layer MLP tensors as row-major float32.
GcnParams read_params(const std::string& path);
void write_params(const std::string& path, const GcnParams& params);

// Simple "key = value" config text; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_kv_config(const std::string& path);

}  // namespace gmatch
