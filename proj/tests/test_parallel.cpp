// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

// OpenMP kernels against their serial reference implementations.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gmatch/affinity.hpp"
#include "gmatch/gst.hpp"
#include "gmatch/threads.hpp"

using namespace gmatch;

namespace {

ViewGraph random_graph(int n, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat f(n, d);
  for (int i = 0; i < n; ++i) {
    Vec v(d);
    for (int j = 0; j < d; ++j) v(j) = gauss(rng);
    f.row(i) = (v / v.norm()).transpose();
  }
  return build_view_graph(f, std::vector<BBox>(n));
}

}  // namespace

TEST_CASE("thread_count is at least one") { CHECK(thread_count() >= 1); }

TEST_CASE("vertex_affinity parallel equals serial") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    ViewGraph gd = random_graph(3 + trial, 8, rng);
    ViewGraph gt = random_graph(2 + trial, 8, rng);
    Mat a = vertex_affinity(gd, gt);
    Mat b = vertex_affinity_serial(gd, gt);
    CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("edge_affinity parallel equals serial") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    ViewGraph gd = random_graph(3 + trial % 5, 8, rng);
    ViewGraph gt = random_graph(2 + trial % 6, 8, rng);
    Mat a = edge_affinity(gd, gt);
    Mat b = edge_affinity_serial(gd, gt);
    CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("expand_affinity parallel equals serial") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 8; ++trial) {
    const int nd = 2 + trial % 5, nt = 2 + (trial / 2) % 5;
    ViewGraph gd = random_graph(nd, 6, rng);
    ViewGraph gt = random_graph(nt, 6, rng);
    Mat me = edge_affinity(gd, gt);
    SpMat a = expand_affinity(me, nd, nt);
    SpMat b = expand_affinity_serial(me, nd, nt);
    CHECK((Mat(a) - Mat(b)).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("gst parallel equals serial component sweep") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int nd = 6 + trial % 4, nt = 6 + (trial / 2) % 4;
    ViewGraph gd = random_graph(nd, 6, rng);
    ViewGraph gt = random_graph(nt, 6, rng);
    AffinityPair p = build_affinity(gd, gt);
    GateGraph g;
    g.nd = nd;
    g.nt = nt;
    g.adj.assign(nd, std::vector<char>(nt, 0));
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nt; ++j) g.adj[i][j] = uni(rng) < 0.3 ? 1 : 0;

    GstOptions par;
    GstOptions ser;
    ser.parallel = false;
    GstResult a = gst_solve(p.M, p.B, g, par);
    GstResult b = gst_solve(p.M, p.B, g, ser);
    CHECK(a.matches == b.matches);
    CHECK(a.cost == doctest::Approx(b.cost).epsilon(1e-14));
  }
}

TEST_CASE("GM_THREADS caps the worker count") {
  setenv("GM_THREADS", "1", 1);
  CHECK(thread_count() == 1);
  setenv("GM_THREADS", "not-a-number", 1);
  CHECK(thread_count() >= 1);
  unsetenv("GM_THREADS");
}
