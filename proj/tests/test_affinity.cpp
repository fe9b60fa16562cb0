// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gmatch/affinity.hpp"

using namespace gmatch;

namespace {

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

ViewGraph random_graph(int n, int d, std::mt19937_64& rng) {
  return build_view_graph(random_unit_rows(n, d, rng), std::vector<BBox>(n));
}

// Dense construction of M through the indicator-matrix Kronecker product,
// used as an independent oracle for the sparse expansion.
Mat dense_expand_oracle(const Mat& me, int nd, int nt) {
  const int eu = nd * (nd - 1);
  const int ev = nt * (nt - 1);
  Mat sd = Mat::Zero(nd, eu), td = Mat::Zero(nd, eu);
  Mat st = Mat::Zero(nt, ev), tt = Mat::Zero(nt, ev);
  for (int u = 0; u < eu; ++u) {
    const auto [i, i2] = ViewGraph::edge_at(u, nd);
    sd(i, u) = 1.0;
    td(i2, u) = 1.0;
  }
  for (int v = 0; v < ev; ++v) {
    const auto [j, j2] = ViewGraph::edge_at(v, nt);
    st(j, v) = 1.0;
    tt(j2, v) = 1.0;
  }
  auto kron = [](const Mat& a, const Mat& b) {
    Mat k(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j)
        k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
  };
  Vec diag(eu * ev);
  for (int u = 0; u < eu; ++u)
    for (int v = 0; v < ev; ++v) diag(u * ev + v) = me(u, v);
  return kron(sd, st) * diag.asDiagonal() * kron(td, tt).transpose();
}

}  // namespace

TEST_CASE("vertex_affinity analytic") {
  Mat fa(1, 2), fb(1, 2);

  fa << 1.0, 0.0;
  ViewGraph ga = build_view_graph(fa, {BBox{}});
  ViewGraph gb = build_view_graph(fa, {BBox{}});
  CHECK(vertex_affinity(ga, gb)(0, 0) == doctest::Approx(1.0));

  fb << 0.0, 1.0;
  gb = build_view_graph(fb, {BBox{}});
  CHECK(vertex_affinity(ga, gb)(0, 0) == doctest::Approx(0.0));

  fa << 0.6, 0.8;
  fb << 1.0, 0.0;
  ga = build_view_graph(fa, {BBox{}});
  gb = build_view_graph(fb, {BBox{}});
  CHECK(vertex_affinity(ga, gb)(0, 0) == doctest::Approx(0.6));
}

TEST_CASE("edge_affinity shapes and analytic values") {
  std::mt19937_64 rng(17);

  SUBCASE("identical 2-vertex graphs") {
    Mat f(2, 3);
    f << 1, 0, 0, 0, 1, 0;
    ViewGraph g = build_view_graph(f, std::vector<BBox>(2));
    Mat me = edge_affinity(g, g);
    CHECK(me.rows() == 2);
    CHECK(me.cols() == 2);
    CHECK(me(0, 0) == doctest::Approx(1.0));
    // orthogonal endpoints: the swapped edge is orthogonal
    CHECK(me(0, 1) == doctest::Approx(0.0));
  }
  SUBCASE("shape for 3 x 2") {
    ViewGraph gd = random_graph(3, 4, rng);
    ViewGraph gt = random_graph(2, 4, rng);
    Mat me = edge_affinity(gd, gt);
    CHECK(me.rows() == 6);
    CHECK(me.cols() == 2);
  }
  SUBCASE("degenerate single-vertex side is empty") {
    ViewGraph gd = random_graph(1, 4, rng);
    ViewGraph gt = random_graph(3, 4, rng);
    Mat me = edge_affinity(gd, gt);
    CHECK(me.rows() == 0);
  }
  SUBCASE("entries bounded by 1") {
    ViewGraph gd = random_graph(4, 6, rng);
    ViewGraph gt = random_graph(3, 6, rng);
    Mat me = edge_affinity(gd, gt);
    CHECK(me.maxCoeff() <= 1.0 + 1e-12);
    CHECK(me.minCoeff() >= -1.0 - 1e-12);
    Mat b = vertex_affinity(gd, gt);
    CHECK(b.maxCoeff() <= 1.0 + 1e-12);
    CHECK(b.minCoeff() >= -1.0 - 1e-12);
  }
}

TEST_CASE("expand_affinity hand example") {
  // 2x2 with all-ones Me: M[p(0,0),p(1,1)] = M[p(0,1),p(1,0)] = 1 plus mirrors
  Mat me = Mat::Ones(2, 2);
  SpMat m = expand_affinity(me, 2, 2);
  Mat d = Mat(m);
  Mat expect = Mat::Zero(4, 4);
  expect(0, 3) = expect(3, 0) = 1.0;
  expect(1, 2) = expect(2, 1) = 1.0;
  CHECK((d - expect).norm() == doctest::Approx(0.0));

  SpMat z = expand_affinity(Mat::Zero(2, 2), 2, 2);
  CHECK(Mat(z).norm() == 0.0);
}

TEST_CASE("expand_affinity equals dense Kronecker oracle") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> size(2, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const int nd = size(rng), nt = size(rng);
    ViewGraph gd = random_graph(nd, 5, rng);
    ViewGraph gt = random_graph(nt, 5, rng);
    Mat me = edge_affinity(gd, gt);
    SpMat m = expand_affinity(me, nd, nt);
    Mat oracle = dense_expand_oracle(me, nd, nt);
    CHECK((Mat(m) - oracle).lpNorm<Eigen::Infinity>() == 0.0);  // exact copy
  }
}

TEST_CASE("M is symmetric and zero-diagonal with admissible pattern") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const int nd = 2 + trial % 3, nt = 2 + (trial / 3) % 3;
    ViewGraph gd = random_graph(nd, 6, rng);
    ViewGraph gt = random_graph(nt, 6, rng);
    AffinityPair p = build_affinity(gd, gt);
    Mat d = Mat(p.M);
    CHECK((d - d.transpose()).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(d.diagonal().lpNorm<Eigen::Infinity>() == 0.0);
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nt; ++j)
        for (int i2 = 0; i2 < nd; ++i2)
          for (int j2 = 0; j2 < nt; ++j2)
            if (i == i2 || j == j2)
              CHECK(d(pair_index(i, j, nt), pair_index(i2, j2, nt)) == 0.0);
  }
}

TEST_CASE("convexity_margin") {
  SUBCASE("zero M") {
    SpMat m(9, 9);
    CHECK(convexity_margin(m, 3) == doctest::Approx(4.0));
  }
  SUBCASE("all admissible ones") {
    const int n = 3;
    Mat me = Mat::Ones(n * (n - 1), n * (n - 1));
    SpMat m = expand_affinity(me, n, n);
    CHECK(convexity_margin(m, n) == doctest::Approx(0.0));
  }
  SUBCASE("2x2 all ones") {
    SpMat m = expand_affinity(Mat::Ones(2, 2), 2, 2);
    CHECK(convexity_margin(m, 2) == doctest::Approx(0.0));
  }
  SUBCASE("nonnegative for unit-feature graphs") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
      const int nd = 2 + trial % 4, nt = 2 + (trial / 2) % 4;
      ViewGraph gd = random_graph(nd, 8, rng);
      ViewGraph gt = random_graph(nt, 8, rng);
      AffinityPair p = build_affinity(gd, gt);
      CHECK(convexity_margin(p.M, std::max(nd, nt)) >= -1e-12);
    }
  }
}
