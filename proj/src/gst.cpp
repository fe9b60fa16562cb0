// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include "gmatch/gst.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gmatch/affinity.hpp"
#include "gmatch/diffmatch.hpp"
#include "gmatch/threads.hpp"
#include "gmatch/tracker.hpp"

namespace gmatch {

GateGraph build_gate_graph(const Mat& b, const Mat& maha2, const Mat& iou_dt,
                           double sigma, double kappa) {
  if (b.rows() != maha2.rows() || b.rows() != iou_dt.rows() ||
      b.cols() != maha2.cols() || b.cols() != iou_dt.cols())
    throw DimError("build_gate_graph: matrix shapes differ");
  GateGraph g;
  g.nd = static_cast<int>(b.rows());
  g.nt = static_cast<int>(b.cols());
  g.adj.assign(g.nd, std::vector<char>(g.nt, 0));
  for (int i = 0; i < g.nd; ++i)
    for (int j = 0; j < g.nt; ++j)
      g.adj[i][j] = (b(i, j) > sigma && maha2(i, j) < kappa && iou_dt(i, j) > 0.0) ? 1 : 0;
  return g;
}

std::vector<Component> ficc(const GateGraph& g) {
  const int total = g.nd + g.nt;
  std::vector<char> visited(total, 0);
  std::vector<Component> comps;

  for (int start = 0; start < total; ++start) {
    if (visited[start]) continue;
    Component c;
    std::vector<int> stack{start};
    visited[start] = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      if (v < g.nd) {
        c.dets.push_back(v);
        for (int j = 0; j < g.nt; ++j)
          if (g.adj[v][j] && !visited[g.nd + j]) {
            visited[g.nd + j] = 1;
            stack.push_back(g.nd + j);
          }
      } else {
        const int j = v - g.nd;
        c.tracks.push_back(j);
        for (int i = 0; i < g.nd; ++i)
          if (g.adj[i][j] && !visited[i]) {
            visited[i] = 1;
            stack.push_back(i);
          }
      }
    }
    std::sort(c.dets.begin(), c.dets.end());
    std::sort(c.tracks.begin(), c.tracks.end());
    comps.push_back(std::move(c));
  }

  std::stable_sort(comps.begin(), comps.end(),
                   [](const Component& a, const Component& b) { return a.size() > b.size(); });
  return comps;
}

double hungarian(const Mat& cost, std::vector<int>& row_to) {
  const int nr = static_cast<int>(cost.rows());
  const int nc = static_cast<int>(cost.cols());
  row_to.assign(nr, -1);
  if (nr == 0 || nc == 0) return 0.0;
  if (!cost.allFinite()) throw InvalidFeature("hungarian: non-finite costs");

  const int n = std::max(nr, nc);
  const double inf = std::numeric_limits<double>::infinity();
  auto at = [&](int i, int j) { return (i < nr && j < nc) ? cost(i, j) : 0.0; };

  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    const int i = p[j];
    if (i >= 1 && i <= nr && j <= nc) {
      row_to[i - 1] = j - 1;
      total += cost(i - 1, j - 1);
    }
  }
  return total;
}

namespace {

// max-total bipartite matching value of the M entries between the edges
// leaving matched pair (i, j) and the complement vertex sets
double pair_edge_score(int i, int j, const SpMat& m, const std::vector<int>& out_d,
                       const std::vector<int>& out_t, int nt) {
  if (out_d.empty() || out_t.empty()) return 0.0;
  Mat w(out_d.size(), out_t.size());
  const int pij = pair_index(i, j, nt);
  for (std::size_t a = 0; a < out_d.size(); ++a)
    for (std::size_t c = 0; c < out_t.size(); ++c)
      w(a, c) = m.coeff(pij, pair_index(out_d[a], out_t[c], nt));
  std::vector<int> row_to;
  return -hungarian(Mat(-w), row_to);
}

}  // namespace

double edge_cost_approx(const std::vector<std::pair<int, int>>& pi_c, const SpMat& m,
                        const Component& comp, int nd, int nt) {
  std::vector<char> in_d(nd, 0), in_t(nt, 0);
  for (int i : comp.dets) in_d[i] = 1;
  for (int j : comp.tracks) in_t[j] = 1;
  std::vector<int> out_d, out_t;
  for (int i = 0; i < nd; ++i)
    if (!in_d[i]) out_d.push_back(i);
  for (int j = 0; j < nt; ++j)
    if (!in_t[j]) out_t.push_back(j);

  double total = 0.0;
  for (const auto& [i, j] : pi_c) total += pair_edge_score(i, j, m, out_d, out_t, nt);
  return -total;
}

double component_cost(const std::vector<std::pair<int, int>>& pi_c, const SpMat& m,
                      const Mat& b, double edge_term) {
  const int nt = static_cast<int>(b.cols());
  double quad = 0.0;
  for (const auto& [i, j] : pi_c)
    for (const auto& [i2, j2] : pi_c) {
      if (i == i2 || j == j2) continue;
      quad += m.coeff(pair_index(i, j, nt), pair_index(i2, j2, nt));
    }
  double lin = 0.0;
  for (const auto& [i, j] : pi_c) lin += b(i, j);
  return -quad + 2.0 * edge_term - lin;
}

namespace {

// Depth-first enumeration over gate-consistent partial matchings of the given
// detections. Option order is unmatched first, then tracklets ascending, and
// only strict improvements replace the incumbent, which fixes the tie-break.
struct Enumerator {
  const std::vector<int>& dets;
  const std::vector<int>& tracks;
  const GateGraph& gates;
  const SpMat& m;
  const Mat& b;
  const Mat* pair_scores;   // per gated (local det, local track), or nullptr
  int nt;

  std::vector<char> track_used;
  std::vector<std::pair<int, int>> current;
  double current_cost = 0.0;

  std::vector<std::pair<int, int>> best;
  double best_cost = std::numeric_limits<double>::infinity();

  double add_delta(int li, int lj) const {
    const int i = dets[li];
    const int j = tracks[lj];
    double quad = 0.0;
    const int pij = pair_index(i, j, nt);
    for (const auto& [i2, j2] : current) {
      if (i2 == i || j2 == j) continue;
      quad += m.coeff(pij, pair_index(i2, j2, nt));
      quad += m.coeff(pair_index(i2, j2, nt), pij);
    }
    double delta = -quad - b(i, j);
    if (pair_scores) delta -= 2.0 * (*pair_scores)(li, lj);
    return delta;
  }

  void run(std::size_t k) {
    if (k == dets.size()) {
      if (current_cost < best_cost) {
        best_cost = current_cost;
        best = current;
      }
      return;
    }
    // leave detection k unmatched
    run(k + 1);
    const int i = dets[k];
    for (std::size_t lj = 0; lj < tracks.size(); ++lj) {
      if (track_used[lj] || !gates.gated(i, tracks[lj])) continue;
      const double delta = add_delta(static_cast<int>(k), static_cast<int>(lj));
      track_used[lj] = 1;
      current.emplace_back(i, tracks[lj]);
      current_cost += delta;
      run(k + 1);
      current_cost -= delta;
      current.pop_back();
      track_used[lj] = 0;
    }
  }
};

}  // namespace

Assignment enumerate_component(const Component& comp, const SpMat& m, const Mat& b,
                               const GateGraph& gates, int max_enum) {
  if (comp.size() > max_enum)
    throw ComponentTooLarge("enumerate_component: component of size " +
                            std::to_string(comp.size()) + " exceeds bound " +
                            std::to_string(max_enum));
  const int nd = gates.nd;
  const int nt = gates.nt;

  Assignment out;
  if (comp.dets.empty() || comp.tracks.empty()) return out;

  // complement sets and per-pair edge scores, fixed for the whole component
  std::vector<char> in_d(nd, 0), in_t(nt, 0);
  for (int i : comp.dets) in_d[i] = 1;
  for (int j : comp.tracks) in_t[j] = 1;
  std::vector<int> out_d, out_t;
  for (int i = 0; i < nd; ++i)
    if (!in_d[i]) out_d.push_back(i);
  for (int j = 0; j < nt; ++j)
    if (!in_t[j]) out_t.push_back(j);

  Mat pair_scores = Mat::Zero(comp.dets.size(), comp.tracks.size());
  for (std::size_t li = 0; li < comp.dets.size(); ++li)
    for (std::size_t lj = 0; lj < comp.tracks.size(); ++lj)
      if (gates.gated(comp.dets[li], comp.tracks[lj]))
        pair_scores(li, lj) =
            pair_edge_score(comp.dets[li], comp.tracks[lj], m, out_d, out_t, nt);

  Enumerator en{comp.dets, comp.tracks, gates, m, b, &pair_scores, nt, {}, {}, 0.0, {}, 0.0};
  en.track_used.assign(comp.tracks.size(), 0);
  en.best_cost = std::numeric_limits<double>::infinity();
  en.run(0);

  out.pairs = en.best;
  out.cost = en.best_cost;
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

GstResult gst_solve(const SpMat& m, const Mat& b, const GateGraph& gates,
                    const GstOptions& opts) {
  const std::vector<Component> comps = ficc(gates);
  const int nc = static_cast<int>(comps.size());

  std::vector<Assignment> results(nc);
  std::vector<char> fellback(nc, 0);
  std::vector<char> oversized(nc, 0);

  const int threads = opts.parallel ? thread_count() : 1;
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (int c = 0; c < nc; ++c) {
    const Component& comp = comps[c];
    if (comp.dets.empty() || comp.tracks.empty()) continue;
    try {
      results[c] = enumerate_component(comp, m, b, gates, opts.max_enum);
    } catch (const ComponentTooLarge&) {
      if (!opts.qp_fallback) {
        oversized[c] = 1;   // rethrown outside the parallel region
        continue;
      }
      fellback[c] = 1;
      // restricted QP on the component, greedily rounded and gate-filtered
      const int cd = static_cast<int>(comp.dets.size());
      const int ct = static_cast<int>(comp.tracks.size());
      Mat bc(cd, ct);
      std::vector<Triplet> trips;
      for (int a = 0; a < cd; ++a)
        for (int e = 0; e < ct; ++e) {
          bc(a, e) = b(comp.dets[a], comp.tracks[e]);
          for (int a2 = 0; a2 < cd; ++a2)
            for (int e2 = 0; e2 < ct; ++e2) {
              if (a == a2 || e == e2) continue;
              const double val = m.coeff(pair_index(comp.dets[a], comp.tracks[e], gates.nt),
                                         pair_index(comp.dets[a2], comp.tracks[e2], gates.nt));
              if (val != 0.0) trips.emplace_back(a * ct + e, a2 * ct + e2, val);
            }
        }
      SpMat mc(cd * ct, cd * ct);
      mc.setFromTriplets(trips.begin(), trips.end());
      ScoreMap fwd = gm_forward(mc, bc);
      Assignment a;
      for (const auto& [li, lj] : greedy_round(fwd.X)) {
        const int i = comp.dets[li];
        const int j = comp.tracks[lj];
        if (gates.gated(i, j)) a.pairs.emplace_back(i, j);
      }
      std::sort(a.pairs.begin(), a.pairs.end());
      a.cost = component_cost(a.pairs, m, b, edge_cost_approx(a.pairs, m, comp, gates.nd, gates.nt));
      results[c] = std::move(a);
    }
  }

  for (int c = 0; c < nc; ++c)
    if (oversized[c])
      throw ComponentTooLarge("gst_solve: component " + std::to_string(c) +
                              " exceeds the enumeration bound");

  GstResult out;
  for (int c = 0; c < nc; ++c) {
    if (fellback[c]) out.fallback_components.push_back(c);
    out.cost += results[c].pairs.empty() ? 0.0 : results[c].cost;
    out.matches.insert(out.matches.end(), results[c].pairs.begin(), results[c].pairs.end());
  }
  std::sort(out.matches.begin(), out.matches.end());
  return out;
}

Assignment brute_force_qap(const SpMat& m, const Mat& b, const GateGraph& gates) {
  if (gates.nd + gates.nt > 14)
    throw OracleTooLarge("brute_force_qap: instance exceeds oracle bound");
  std::vector<int> dets(gates.nd), tracks(gates.nt);
  for (int i = 0; i < gates.nd; ++i) dets[i] = i;
  for (int j = 0; j < gates.nt; ++j) tracks[j] = j;

  Enumerator en{dets, tracks, gates, m, b, nullptr, gates.nt, {}, {}, 0.0, {}, 0.0};
  en.track_used.assign(tracks.size(), 0);
  en.best_cost = std::numeric_limits<double>::infinity();
  en.run(0);

  Assignment out;
  out.pairs = en.best;
  out.cost = en.best_cost;
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

}  // namespace gmatch
