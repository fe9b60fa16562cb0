// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include "gmatch/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "gmatch/gst.hpp"

namespace gmatch {

namespace {

constexpr double kIouThreshold = 0.5;
constexpr double kForbidden = 1e6;

struct FrameBoxes {
  std::vector<int> ids;
  std::vector<BBox> boxes;
};

std::map<int, FrameBoxes> by_frame(const std::vector<MotRecord>& records) {
  std::map<int, FrameBoxes> out;
  for (const MotRecord& r : records) {
    out[r.frame].ids.push_back(r.id);
    out[r.frame].boxes.push_back(r.center_box());
  }
  return out;
}

}  // namespace

Metrics evaluate(const std::vector<MotRecord>& gt, const std::vector<MotRecord>& predictions) {
  Metrics m;
  m.gt = static_cast<int>(gt.size());

  const auto gt_frames = by_frame(gt);
  const auto pr_frames = by_frame(predictions);

  std::set<int> frames;
  for (const auto& [f, _] : gt_frames) frames.insert(f);
  for (const auto& [f, _] : pr_frames) frames.insert(f);

  std::map<int, int> last_pred_of_gt;                   // identity continuity memory
  std::map<int, std::map<int, int>> overlap_frames;     // gt id -> pred id -> frames

  for (int f : frames) {
    const auto git = gt_frames.find(f);
    const auto pit = pr_frames.find(f);
    const int ng = git == gt_frames.end() ? 0 : static_cast<int>(git->second.ids.size());
    const int np = pit == pr_frames.end() ? 0 : static_cast<int>(pit->second.ids.size());

    // trajectory overlap counts for IDF1 (pairs that could match this frame)
    for (int a = 0; a < ng; ++a)
      for (int b = 0; b < np; ++b)
        if (iou(git->second.boxes[a], pit->second.boxes[b]) >= kIouThreshold)
          overlap_frames[git->second.ids[a]][pit->second.ids[b]] += 1;

    std::vector<int> gt_match(ng, -1);
    std::vector<char> pred_used(np, 0);

    // keep last frame's identity pairing when it still overlaps
    for (int a = 0; a < ng; ++a) {
      const auto it = last_pred_of_gt.find(git != gt_frames.end() ? git->second.ids[a] : -1);
      if (it == last_pred_of_gt.end()) continue;
      for (int b = 0; b < np; ++b) {
        if (pred_used[b] || pit->second.ids[b] != it->second) continue;
        if (iou(git->second.boxes[a], pit->second.boxes[b]) >= kIouThreshold) {
          gt_match[a] = b;
          pred_used[b] = 1;
        }
        break;
      }
    }

    // Hungarian on the rest
    std::vector<int> free_g, free_p;
    for (int a = 0; a < ng; ++a)
      if (gt_match[a] < 0) free_g.push_back(a);
    for (int b = 0; b < np; ++b)
      if (!pred_used[b]) free_p.push_back(b);
    if (!free_g.empty() && !free_p.empty()) {
      Mat cost(free_g.size(), free_p.size());
      for (std::size_t a = 0; a < free_g.size(); ++a)
        for (std::size_t b = 0; b < free_p.size(); ++b) {
          const double v = iou(git->second.boxes[free_g[a]], pit->second.boxes[free_p[b]]);
          cost(a, b) = v >= kIouThreshold ? 1.0 - v : kForbidden;
        }
      std::vector<int> row_to;
      hungarian(cost, row_to);
      for (std::size_t a = 0; a < free_g.size(); ++a) {
        if (row_to[a] < 0 || cost(a, row_to[a]) >= kForbidden) continue;
        gt_match[free_g[a]] = free_p[row_to[a]];
        pred_used[free_p[row_to[a]]] = 1;
      }
    }

    for (int a = 0; a < ng; ++a) {
      const int gid = git->second.ids[a];
      if (gt_match[a] < 0) {
        m.fn += 1;
        continue;
      }
      const int pid = pit->second.ids[gt_match[a]];
      const auto it = last_pred_of_gt.find(gid);
      if (it != last_pred_of_gt.end() && it->second != pid) m.idsw += 1;
      last_pred_of_gt[gid] = pid;
    }
    for (int b = 0; b < np; ++b)
      if (!pred_used[b]) m.fp += 1;
  }

  m.mota = m.gt > 0 ? 1.0 - static_cast<double>(m.fp + m.fn + m.idsw) / m.gt : 0.0;

  // IDF1: one-to-one identity matching maximizing total overlapping frames
  std::vector<int> gt_ids, pred_ids;
  {
    std::set<int> gset, pset;
    for (const MotRecord& r : gt) gset.insert(r.id);
    for (const MotRecord& r : predictions) pset.insert(r.id);
    gt_ids.assign(gset.begin(), gset.end());
    pred_ids.assign(pset.begin(), pset.end());
  }
  double idtp = 0.0;
  if (!gt_ids.empty() && !pred_ids.empty()) {
    Mat cost(gt_ids.size(), pred_ids.size());
    for (std::size_t a = 0; a < gt_ids.size(); ++a)
      for (std::size_t b = 0; b < pred_ids.size(); ++b) {
        int c = 0;
        const auto it = overlap_frames.find(gt_ids[a]);
        if (it != overlap_frames.end()) {
          const auto jt = it->second.find(pred_ids[b]);
          if (jt != it->second.end()) c = jt->second;
        }
        cost(a, b) = -static_cast<double>(c);
      }
    std::vector<int> row_to;
    idtp = -hungarian(cost, row_to);
  }
  const double denom = static_cast<double>(gt.size() + predictions.size());
  m.idf1 = denom > 0.0 ? 2.0 * idtp / denom : 0.0;
  return m;
}

}  // namespace gmatch
