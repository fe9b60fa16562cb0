// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <random>

#include "gmatch/affinity.hpp"
#include "gmatch/gst.hpp"

using namespace gmatch;

namespace {

GateGraph gates_from(std::initializer_list<std::initializer_list<int>> rows) {
  GateGraph g;
  g.nd = static_cast<int>(rows.size());
  g.nt = rows.size() ? static_cast<int>(rows.begin()->size()) : 0;
  for (const auto& r : rows) {
    g.adj.emplace_back();
    for (int v : r) g.adj.back().push_back(static_cast<char>(v));
  }
  return g;
}

GateGraph full_gates(int nd, int nt) {
  GateGraph g;
  g.nd = nd;
  g.nt = nt;
  g.adj.assign(nd, std::vector<char>(nt, 1));
  return g;
}

Mat random_unit_rows(int n, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat f(n, d);
  for (int i = 0; i < n; ++i) {
    Vec v(d);
    for (int j = 0; j < d; ++j) v(j) = gauss(rng);
    f.row(i) = (v / v.norm()).transpose();
  }
  return f;
}

struct Instance {
  SpMat m;
  Mat b;
};

Instance random_instance(int nd, int nt, std::mt19937_64& rng) {
  ViewGraph gd = build_view_graph(random_unit_rows(nd, 6, rng), std::vector<BBox>(nd));
  ViewGraph gt = build_view_graph(random_unit_rows(nt, 6, rng), std::vector<BBox>(nt));
  AffinityPair p = build_affinity(gd, gt);
  return {p.M, p.B};
}

// random block-diagonal gate graph with component sides of at most max_side
GateGraph random_block_gates(int nd, int nt, int max_side, std::mt19937_64& rng,
                             std::vector<Component>* blocks = nullptr) {
  GateGraph g;
  g.nd = nd;
  g.nt = nt;
  g.adj.assign(nd, std::vector<char>(nt, 0));
  std::uniform_int_distribution<int> side(1, max_side);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  int i0 = 0, j0 = 0;
  while (i0 < nd && j0 < nt) {
    const int bd = std::min(side(rng), nd - i0);
    const int bt = std::min(side(rng), nt - j0);
    Component c;
    for (int i = 0; i < bd; ++i)
      for (int j = 0; j < bt; ++j)
        if (uni(rng) < 0.8) g.adj[i0 + i][j0 + j] = 1;
    for (int i = 0; i < bd; ++i) c.dets.push_back(i0 + i);
    for (int j = 0; j < bt; ++j) c.tracks.push_back(j0 + j);
    if (blocks) blocks->push_back(c);
    i0 += bd;
    j0 += bt;
  }
  return g;
}

// zero every M entry unless both pairs live inside the same realized gate
// component (a pair belongs to a component when its detection and tracklet do)
SpMat zero_cross_component(const SpMat& m, const GateGraph& gates) {
  const auto comps = ficc(gates);
  std::vector<int> det_comp(gates.nd, -1), track_comp(gates.nt, -1);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    for (int i : comps[c].dets) det_comp[i] = static_cast<int>(c);
    for (int j : comps[c].tracks) track_comp[j] = static_cast<int>(c);
  }
  std::vector<Triplet> trips;
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SpMat::InnerIterator it(m, k); it; ++it) {
      const int i = static_cast<int>(it.row()) / gates.nt;
      const int j = static_cast<int>(it.row()) % gates.nt;
      const int i2 = static_cast<int>(it.col()) / gates.nt;
      const int j2 = static_cast<int>(it.col()) % gates.nt;
      const int b1 = det_comp[i] == track_comp[j] ? det_comp[i] : -1;
      const int b2 = det_comp[i2] == track_comp[j2] ? det_comp[i2] : -1;
      if (b1 >= 0 && b1 == b2) trips.emplace_back(it.row(), it.col(), it.value());
    }
  }
  SpMat out(m.rows(), m.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace

TEST_CASE("build_gate_graph") {
  Mat b(2, 2), maha = Mat::Zero(2, 2), ious = Mat::Ones(2, 2);
  b << 0.9, 0.1, 0.2, 0.8;

  SUBCASE("thresholds") {
    GateGraph g = build_gate_graph(b, maha, ious, 0.6, 9.4877);
    CHECK(g.gated(0, 0));
    CHECK_FALSE(g.gated(0, 1));
    CHECK_FALSE(g.gated(1, 0));
    CHECK(g.gated(1, 1));
  }
  SUBCASE("everything below sigma gives an empty graph") {
    GateGraph g = build_gate_graph(b, maha, ious, 0.95, 9.4877);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK_FALSE(g.gated(i, j));
  }
  SUBCASE("mahalanobis gate is strict") {
    Mat far = Mat::Constant(2, 2, 20.0);
    GateGraph g = build_gate_graph(b, far, ious, 0.0, 9.4877);
    CHECK_FALSE(g.gated(0, 0));
  }
  SUBCASE("zero iou blocks") {
    GateGraph g = build_gate_graph(b, maha, Mat::Zero(2, 2), 0.0, 9.4877);
    CHECK_FALSE(g.gated(0, 0));
  }
}

TEST_CASE("ficc components") {
  SUBCASE("shared tracklet merges, isolated vertex is a singleton") {
    // d0-t0, d1-t0; d2 isolated
    GateGraph g = gates_from({{1, 0}, {1, 0}, {0, 0}});
    auto comps = ficc(g);
    REQUIRE(comps.size() == 3);
    CHECK(comps[0].dets == std::vector<int>{0, 1});
    CHECK(comps[0].tracks == std::vector<int>{0});
    // remaining: singleton det 2 and singleton track 1
    CHECK(comps[1].size() == 1);
    CHECK(comps[2].size() == 1);
  }
  SUBCASE("empty graph gives all singletons") {
    GateGraph g = full_gates(3, 3);
    for (auto& row : g.adj) row.assign(3, 0);
    auto comps = ficc(g);
    CHECK(comps.size() == 6);
    for (const auto& c : comps) CHECK(c.size() == 1);
  }
  SUBCASE("two disjoint edges, stable order") {
    GateGraph g = gates_from({{1, 0}, {0, 1}});
    auto comps = ficc(g);
    REQUIRE(comps.size() == 2);
    CHECK(comps[0].dets == std::vector<int>{0});
    CHECK(comps[0].tracks == std::vector<int>{0});
    CHECK(comps[1].dets == std::vector<int>{1});
    CHECK(comps[1].tracks == std::vector<int>{1});
  }
  SUBCASE("components partition the vertices and no edge crosses") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
      GateGraph g = full_gates(5, 6);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      for (auto& row : g.adj)
        for (auto& v : row) v = uni(rng) < 0.25 ? 1 : 0;
      auto comps = ficc(g);
      std::vector<int> det_comp(5, -1), track_comp(6, -1);
      for (std::size_t c = 0; c < comps.size(); ++c) {
        for (int i : comps[c].dets) {
          CHECK(det_comp[i] == -1);
          det_comp[i] = static_cast<int>(c);
        }
        for (int j : comps[c].tracks) {
          CHECK(track_comp[j] == -1);
          track_comp[j] = static_cast<int>(c);
        }
      }
      for (int i = 0; i < 5; ++i) {
        CHECK(det_comp[i] >= 0);
        for (int j = 0; j < 6; ++j)
          if (g.gated(i, j)) CHECK(det_comp[i] == track_comp[j]);
      }
      for (std::size_t c = 1; c < comps.size(); ++c)
        CHECK(comps[c - 1].size() >= comps[c].size());
    }
  }
}

TEST_CASE("hungarian") {
  SUBCASE("2x2 diagonal") {
    Mat c(2, 2);
    c << 1, 2, 2, 1;
    std::vector<int> row_to;
    CHECK(hungarian(c, row_to) == doctest::Approx(2.0));
    CHECK(row_to == std::vector<int>{0, 1});
  }
  SUBCASE("2x2 anti-diagonal") {
    Mat c(2, 2);
    c << 4, 1, 2, 3;
    std::vector<int> row_to;
    CHECK(hungarian(c, row_to) == doctest::Approx(3.0));
    CHECK(row_to == std::vector<int>{1, 0});
  }
  SUBCASE("1x3 takes the row argmin") {
    Mat c(1, 3);
    c << 5, 2, 7;
    std::vector<int> row_to;
    CHECK(hungarian(c, row_to) == doctest::Approx(2.0));
    CHECK(row_to == std::vector<int>{1});
  }
  SUBCASE("matches brute force on random rectangular instances") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      const int nr = 1 + trial % 4, nc = 1 + (trial / 4) % 4;
      Mat c(nr, nc);
      for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nc; ++j) c(i, j) = uni(rng);
      std::vector<int> row_to;
      const double got = hungarian(c, row_to);
      // brute force over all maximal assignments
      const int small = std::min(nr, nc);
      std::vector<int> cols(nc);
      for (int j = 0; j < nc; ++j) cols[j] = j;
      double best = 1e18;
      std::sort(cols.begin(), cols.end());
      std::vector<int> pick(small);
      std::function<void(int, std::vector<int>&, double)> rec =
          [&](int i, std::vector<int>& used, double acc) {
            if (i == small) {
              best = std::min(best, acc);
              return;
            }
            for (int j = 0; j < nc; ++j) {
              if (std::find(used.begin(), used.end(), j) != used.end()) continue;
              used.push_back(j);
              rec(i + 1, used, acc + (nr <= nc ? c(i, j) : c(j, i)));
              used.pop_back();
            }
          };
      std::vector<int> used;
      if (nr <= nc)
        rec(0, used, 0.0);
      else {
        // transpose handling: enumerate over rows of the transposed matrix
        rec(0, used, 0.0);
      }
      if (nr > nc) {
        // redo brute force on the transpose for rectangular tall case
        best = 1e18;
        Mat ct = c.transpose();
        std::function<void(int, std::vector<int>&, double)> rec2 =
            [&](int i, std::vector<int>& used2, double acc) {
              if (i == std::min(ct.rows(), ct.cols())) {
                best = std::min(best, acc);
                return;
              }
              for (int j = 0; j < ct.cols(); ++j) {
                if (std::find(used2.begin(), used2.end(), j) != used2.end()) continue;
                used2.push_back(j);
                rec2(i + 1, used2, acc + ct(i, j));
                used2.pop_back();
              }
            };
        std::vector<int> used2;
        rec2(0, used2, 0.0);
      }
      CHECK(got == doctest::Approx(best).epsilon(1e-9));
    }
  }
}

TEST_CASE("edge_cost_approx") {
  std::mt19937_64 rng(13);

  SUBCASE("whole-graph component has zero edge term") {
    Instance ins = random_instance(3, 3, rng);
    Component whole;
    whole.dets = {0, 1, 2};
    whole.tracks = {0, 1, 2};
    CHECK(edge_cost_approx({{0, 0}, {1, 1}}, ins.m, whole, 3, 3) == 0.0);
  }
  SUBCASE("single outside vertex each side is one M entry") {
    Instance ins = random_instance(2, 2, rng);
    Component c;
    c.dets = {0};
    c.tracks = {0};
    const double expect = -ins.m.coeff(pair_index(0, 0, 2), pair_index(1, 1, 2));
    CHECK(edge_cost_approx({{0, 0}}, ins.m, c, 2, 2) == doctest::Approx(expect));
  }
  SUBCASE("matches exhaustive per-pair enumeration") {
    for (int trial = 0; trial < 20; ++trial) {
      Instance ins = random_instance(5, 5, rng);
      Component c;
      c.dets = {0, 1};
      c.tracks = {0, 1};
      const std::vector<std::pair<int, int>> pi = {{0, 0}, {1, 1}};
      const double got = edge_cost_approx(pi, ins.m, c, 5, 5);
      // exhaustive maximal matchings of outside dets {2,3,4} x tracks {2,3,4}
      double total = 0.0;
      for (const auto& [i, j] : pi) {
        double best = -1e18;
        const std::vector<int> od = {2, 3, 4}, ot = {2, 3, 4};
        std::vector<int> perm = ot;
        std::sort(perm.begin(), perm.end());
        do {
          double v = 0.0;
          for (std::size_t k = 0; k < od.size(); ++k)
            v += ins.m.coeff(pair_index(i, j, 5), pair_index(od[k], perm[k], 5));
          best = std::max(best, v);
        } while (std::next_permutation(perm.begin(), perm.end()));
        total += best;
      }
      CHECK(got == doctest::Approx(-total).epsilon(1e-12));
    }
  }
}

TEST_CASE("component_cost") {
  std::mt19937_64 rng(17);
  SUBCASE("empty assignment costs zero") {
    Instance ins = random_instance(2, 2, rng);
    CHECK(component_cost({}, ins.m, ins.b, 0.0) == 0.0);
  }
  SUBCASE("singleton pair is minus the vertex affinity") {
    Instance ins = random_instance(2, 2, rng);
    CHECK(component_cost({{0, 1}}, ins.m, ins.b, 0.0) == doctest::Approx(-ins.b(0, 1)));
  }
  SUBCASE("whole-graph component reduces to the plain quadratic cost") {
    Instance ins = random_instance(3, 3, rng);
    Component whole;
    whole.dets = {0, 1, 2};
    whole.tracks = {0, 1, 2};
    const std::vector<std::pair<int, int>> pi = {{0, 1}, {1, 0}, {2, 2}};
    const double edge = edge_cost_approx(pi, ins.m, whole, 3, 3);
    CHECK(edge == 0.0);
    double quad = 0.0;
    for (const auto& [i, j] : pi)
      for (const auto& [i2, j2] : pi)
        if (i != i2 && j != j2)
          quad += ins.m.coeff(pair_index(i, j, 3), pair_index(i2, j2, 3));
    const double lin = ins.b(0, 1) + ins.b(1, 0) + ins.b(2, 2);
    CHECK(component_cost(pi, ins.m, ins.b, edge) == doctest::Approx(-quad - lin));
  }
}

TEST_CASE("enumerate_component basics") {
  std::mt19937_64 rng(19);
  SUBCASE("forced single edge") {
    Instance ins = random_instance(1, 1, rng);
    ins.b(0, 0) = 0.9;
    GateGraph g = full_gates(1, 1);
    Component c;
    c.dets = {0};
    c.tracks = {0};
    Assignment a = enumerate_component(c, ins.m, ins.b, g);
    REQUIRE(a.pairs.size() == 1);
    CHECK(a.pairs[0] == std::pair<int, int>{0, 0});
  }
  SUBCASE("2x2 diagonal-dominant picks the identity") {
    SpMat m(4, 4);
    Mat b(2, 2);
    b << 0.9, 0.3, 0.3, 0.8;
    GateGraph g = full_gates(2, 2);
    Component c;
    c.dets = {0, 1};
    c.tracks = {0, 1};
    Assignment a = enumerate_component(c, m, b, g);
    REQUIRE(a.pairs.size() == 2);
    CHECK(a.pairs[0] == std::pair<int, int>{0, 0});
    CHECK(a.pairs[1] == std::pair<int, int>{1, 1});
    CHECK(a.cost == doctest::Approx(-1.7));
  }
  SUBCASE("returned cost is minimal over re-enumerated candidates") {
    for (int trial = 0; trial < 10; ++trial) {
      Instance ins = random_instance(3, 3, rng);
      GateGraph g = full_gates(3, 3);
      Component c;
      c.dets = {0, 1, 2};
      c.tracks = {0, 1, 2};
      Assignment a = enumerate_component(c, ins.m, ins.b, g);
      // independent re-enumeration of every candidate's cost
      std::vector<std::vector<std::pair<int, int>>> candidates;
      std::function<void(int, std::vector<std::pair<int, int>>&)> rec =
          [&](int i, std::vector<std::pair<int, int>>& cur) {
            if (i == 3) {
              candidates.push_back(cur);
              return;
            }
            rec(i + 1, cur);
            for (int j = 0; j < 3; ++j) {
              bool used = false;
              for (auto& pr : cur) used = used || pr.second == j;
              if (used) continue;
              cur.emplace_back(i, j);
              rec(i + 1, cur);
              cur.pop_back();
            }
          };
      std::vector<std::pair<int, int>> cur;
      rec(0, cur);
      for (const auto& cand : candidates) {
        const double cost =
            component_cost(cand, ins.m, ins.b, edge_cost_approx(cand, ins.m, c, 3, 3));
        CHECK(a.cost <= cost + 1e-12);
      }
    }
  }
  SUBCASE("oversized component throws") {
    Instance ins = random_instance(2, 2, rng);
    GateGraph g = full_gates(2, 2);
    Component c;
    c.dets = {0, 1};
    c.tracks = {0, 1};
    CHECK_THROWS_AS(enumerate_component(c, ins.m, ins.b, g, 3), ComponentTooLarge);
  }
}

TEST_CASE("brute_force_qap") {
  std::mt19937_64 rng(23);
  SUBCASE("M = 0 equals gated Hungarian on -B") {
    // unmatched rows realized through per-row zero-cost skip columns
    for (int trial = 0; trial < 20; ++trial) {
      const int nd = 2 + trial % 3, nt = 2 + (trial / 3) % 3;
      Instance ins = random_instance(nd, nt, rng);
      SpMat zero(nd * nt, nd * nt);
      GateGraph g = full_gates(nd, nt);
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nt; ++j) g.adj[i][j] = ins.b(i, j) > 0.1 ? 1 : 0;
      Assignment a = brute_force_qap(zero, ins.b, g);
      constexpr double kForbidden = 1e6;
      Mat cost = Mat::Constant(nd, nt + nd, kForbidden);
      for (int i = 0; i < nd; ++i) {
        for (int j = 0; j < nt; ++j)
          if (g.gated(i, j)) cost(i, j) = -ins.b(i, j);
        cost(i, nt + i) = 0.0;   // leaving row i unmatched
      }
      std::vector<int> row_to;
      hungarian(cost, row_to);
      double hval = 0.0;
      for (int i = 0; i < nd; ++i)
        if (row_to[i] >= 0 && row_to[i] < nt && cost(i, row_to[i]) < kForbidden)
          hval += cost(i, row_to[i]);
      CHECK(a.cost == doctest::Approx(hval).epsilon(1e-9));
    }
  }
  SUBCASE("1x1 pair matched iff it lowers the cost") {
    Instance ins = random_instance(1, 1, rng);
    GateGraph g = full_gates(1, 1);
    ins.b(0, 0) = 0.4;
    CHECK(brute_force_qap(ins.m, ins.b, g).pairs.size() == 1);
    ins.b(0, 0) = -0.4;
    CHECK(brute_force_qap(ins.m, ins.b, g).pairs.empty());
    ins.b(0, 0) = 0.0;   // tie goes to unmatched
    CHECK(brute_force_qap(ins.m, ins.b, g).pairs.empty());
  }
  SUBCASE("identical graphs prefer the identity among ties") {
    // all-identical features: every maximal matching ties; enumeration order
    // must return the identity
    Mat f(3, 4);
    for (int i = 0; i < 3; ++i) f.row(i) << 1, 0, 0, 0;
    ViewGraph g1 = build_view_graph(f, std::vector<BBox>(3));
    AffinityPair p = build_affinity(g1, g1);
    Assignment a = brute_force_qap(p.M, p.B, full_gates(3, 3));
    REQUIRE(a.pairs.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(a.pairs[i] == std::pair<int, int>{i, i});
  }
  SUBCASE("size bound enforced") {
    Instance ins = random_instance(8, 8, rng);
    CHECK_THROWS_AS(brute_force_qap(ins.m, ins.b, full_gates(8, 8)), OracleTooLarge);
  }
}

TEST_CASE("gst_solve") {
  std::mt19937_64 rng(29);

  SUBCASE("perfect-matching gates force that matching") {
    Instance ins = random_instance(3, 3, rng);
    ins.b.setConstant(0.5);
    GateGraph g = full_gates(3, 3);
    for (auto& row : g.adj) row.assign(3, 0);
    g.adj[0][1] = g.adj[1][2] = g.adj[2][0] = 1;
    GstResult r = gst_solve(ins.m, ins.b, g);
    REQUIRE(r.matches.size() == 3);
    CHECK(r.matches[0] == std::pair<int, int>{0, 1});
    CHECK(r.matches[1] == std::pair<int, int>{1, 2});
    CHECK(r.matches[2] == std::pair<int, int>{2, 0});
  }
  SUBCASE("empty gates give an empty match set") {
    Instance ins = random_instance(3, 3, rng);
    GateGraph g = full_gates(3, 3);
    for (auto& row : g.adj) row.assign(3, 0);
    CHECK(gst_solve(ins.m, ins.b, g).matches.empty());
  }
  SUBCASE("exact against brute force when cross-component M is zero") {
    int agree = 0, total = 0;
    for (int trial = 0; trial < 60; ++trial) {
      const int nd = 3 + trial % 4, nt = 3 + (trial / 2) % 4;
      Instance ins = random_instance(nd, nt, rng);
      GateGraph g = random_block_gates(nd, nt, 3, rng);
      SpMat m = zero_cross_component(ins.m, g);
      GstResult fast = gst_solve(m, ins.b, g);
      Assignment exact = brute_force_qap(m, ins.b, g);
      total++;
      CHECK(fast.cost == doctest::Approx(exact.cost).epsilon(1e-9));
      if (fast.matches == exact.pairs) agree++;
    }
    CHECK(agree == total);
  }
  SUBCASE("oversized component falls back to the restricted QP") {
    Mat b = Mat::Constant(10, 10, 0.2);
    for (int i = 0; i < 10; ++i) b(i, i) = 0.9;
    SpMat m(100, 100);   // linear instance keeps the rounding unambiguous
    GateGraph g = full_gates(10, 10);
    GstOptions opts;
    opts.max_enum = 8;
    GstResult r = gst_solve(m, b, g, opts);
    CHECK(r.fallback_components.size() == 1);
    CHECK(r.matches.size() == 10);
    for (const auto& [i, j] : r.matches) CHECK(i == j);
    // without the fallback the error propagates
    opts.qp_fallback = false;
    CHECK_THROWS_AS(gst_solve(m, b, g, opts), ComponentTooLarge);
  }
}

TEST_CASE("gst runtime scales with component count roughly linearly") {
  // doubling the number of size-2 components at a fixed largest component
  // should not blow up the solve time; generous bound for timer noise
  std::mt19937_64 rng(31);
  auto build = [&](int copies) {
    const int nd = 2 * copies, nt = 2 * copies;
    Instance ins = random_instance(nd, nt, rng);
    GateGraph g = full_gates(nd, nt);
    for (auto& row : g.adj) row.assign(nt, 0);
    for (int c = 0; c < copies; ++c)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) g.adj[2 * c + a][2 * c + b] = 1;
    return std::make_pair(ins, g);
  };
  auto time_solve = [&](const Instance& ins, const GateGraph& g) {
    GstOptions opts;
    opts.parallel = false;
    double best = 1e18;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      gst_solve(ins.m, ins.b, g, opts);
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
  };
  auto [i1, g1] = build(8);
  auto [i2, g2] = build(16);
  const double t1 = time_solve(i1, g1);
  const double t2 = time_solve(i2, g2);
  // linear scaling with slack: the quadratic-affinity lookups grow with the
  // complement size as well, so allow a wide factor
  CHECK(t2 <= 12.0 * t1 + 0.05);
}
