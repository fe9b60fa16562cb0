// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

#include <vector>

#include "gmatch/io.hpp"

namespace gmatch {

struct Metrics {
  double idf1 = 0.0;
  double mota = 0.0;
  int fp = 0;
  int fn = 0;
  int idsw = 0;
  int gt = 0;
};

// CLEAR-style frame-wise matching at IoU >= 0.5 with identity continuity,
// plus trajectory-level IDF1 via a global bipartite identity matching.
Metrics evaluate(const std::vector<MotRecord>& gt, const std::vector<MotRecord>& predictions);

}  // namespace gmatch
