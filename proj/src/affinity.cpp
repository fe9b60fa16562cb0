// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include "gmatch/affinity.hpp"

#include <cmath>

#include "gmatch/threads.hpp"

namespace gmatch {

Mat vertex_affinity_serial(const ViewGraph& gd, const ViewGraph& gt) {
  if (gd.n > 0 && gt.n > 0 && gd.vertex_features.cols() != gt.vertex_features.cols())
    throw DimError("vertex_affinity: feature dimensions differ");
  Mat b(gd.n, gt.n);
  for (int i = 0; i < gd.n; ++i)
    for (int j = 0; j < gt.n; ++j)
      b(i, j) = gd.vertex_features.row(i).dot(gt.vertex_features.row(j));
  return b;
}

Mat vertex_affinity(const ViewGraph& gd, const ViewGraph& gt) {
  if (gd.n > 0 && gt.n > 0 && gd.vertex_features.cols() != gt.vertex_features.cols())
    throw DimError("vertex_affinity: feature dimensions differ");
  Mat b(gd.n, gt.n);
#pragma omp parallel for num_threads(thread_count()) schedule(static)
  for (int i = 0; i < gd.n; ++i)
    for (int j = 0; j < gt.n; ++j)
      b(i, j) = gd.vertex_features.row(i).dot(gt.vertex_features.row(j));
  return b;
}

Mat edge_affinity_serial(const ViewGraph& gd, const ViewGraph& gt) {
  const int eu = gd.edge_count();
  const int ev = gt.edge_count();
  if (eu == 0 || ev == 0) return Mat(eu, ev);
  if (gd.edge_features.cols() != gt.edge_features.cols())
    throw DimError("edge_affinity: edge feature dimensions differ");
  Mat me(eu, ev);
  for (int u = 0; u < eu; ++u)
    for (int v = 0; v < ev; ++v)
      me(u, v) = gd.edge_features.row(u).dot(gt.edge_features.row(v));
  return me;
}

Mat edge_affinity(const ViewGraph& gd, const ViewGraph& gt) {
  const int eu = gd.edge_count();
  const int ev = gt.edge_count();
  if (eu == 0 || ev == 0) return Mat(eu, ev);
  if (gd.edge_features.cols() != gt.edge_features.cols())
    throw DimError("edge_affinity: edge feature dimensions differ");
  Mat me(eu, ev);
#pragma omp parallel for num_threads(thread_count()) schedule(static)
  for (int u = 0; u < eu; ++u)
    for (int v = 0; v < ev; ++v)
      me(u, v) = gd.edge_features.row(u).dot(gt.edge_features.row(v));
  return me;
}

namespace {

void fill_expand_triplets(const Mat& me, int nd, int nt, std::vector<Triplet>& trips) {
  const int eu = static_cast<int>(me.rows());
  const int ev = static_cast<int>(me.cols());
  trips.resize(static_cast<std::size_t>(eu) * ev);
#pragma omp parallel for num_threads(thread_count()) schedule(static)
  for (int u = 0; u < eu; ++u) {
    const auto [i, i2] = ViewGraph::edge_at(u, nd);
    for (int v = 0; v < ev; ++v) {
      const auto [j, j2] = ViewGraph::edge_at(v, nt);
      trips[static_cast<std::size_t>(u) * ev + v] =
          Triplet(pair_index(i, j, nt), pair_index(i2, j2, nt), me(u, v));
    }
  }
}

}  // namespace

SpMat expand_affinity(const Mat& me, int nd, int nt) {
  const int dim = nd * nt;
  SpMat m(dim, dim);
  if (me.size() == 0) return m;
  if (me.rows() != static_cast<Eigen::Index>(nd) * (nd - 1) ||
      me.cols() != static_cast<Eigen::Index>(nt) * (nt - 1))
    throw DimError("expand_affinity: Me shape does not match vertex counts");
  std::vector<Triplet> trips;
  fill_expand_triplets(me, nd, nt, trips);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

SpMat expand_affinity_serial(const Mat& me, int nd, int nt) {
  const int dim = nd * nt;
  SpMat m(dim, dim);
  if (me.size() == 0) return m;
  if (me.rows() != static_cast<Eigen::Index>(nd) * (nd - 1) ||
      me.cols() != static_cast<Eigen::Index>(nt) * (nt - 1))
    throw DimError("expand_affinity: Me shape does not match vertex counts");
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(me.rows()) * me.cols());
  for (int u = 0; u < me.rows(); ++u) {
    const auto [i, i2] = ViewGraph::edge_at(u, nd);
    for (int v = 0; v < me.cols(); ++v) {
      const auto [j, j2] = ViewGraph::edge_at(v, nt);
      trips.emplace_back(pair_index(i, j, nt), pair_index(i2, j2, nt), me(u, v));
    }
  }
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

double convexity_margin(const SpMat& m, int n) {
  Vec row_abs = Vec::Zero(m.rows());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      row_abs(it.row()) += std::abs(it.value());
  const double max_row = m.rows() > 0 ? row_abs.maxCoeff() : 0.0;
  return static_cast<double>(n - 1) * (n - 1) - max_row;
}

AffinityPair build_affinity(const ViewGraph& gd, const ViewGraph& gt) {
  AffinityPair p;
  p.nd = gd.n;
  p.nt = gt.n;
  p.B = vertex_affinity(gd, gt);
  p.Me = edge_affinity(gd, gt);
  p.M = expand_affinity(p.Me, gd.n, gt.n);
  return p;
}

AffinityGrads affinity_backward(const Mat& fd, const Mat& ft, const Mat& g_b,
                                const SpMat& g_m) {
  const int nd = static_cast<int>(fd.rows());
  const int nt = static_cast<int>(ft.rows());
  const int d = static_cast<int>(fd.cols());

  AffinityGrads out;
  out.g_fd = Mat::Zero(nd, d);
  out.g_ft = Mat::Zero(nt, d);

  // B = Fd Ft^T
  if (g_b.size() > 0) {
    out.g_fd += g_b * ft;
    out.g_ft += g_b.transpose() * fd;
  }

  if (g_m.nonZeros() == 0 || nd < 2 || nt < 2) return out;

  // M entries are copies of Me entries: gMe[u,v] = gM[p(i,j), p(i',j')].
  Mat g_me = Mat::Zero(nd * (nd - 1), nt * (nt - 1));
  for (int k = 0; k < g_m.outerSize(); ++k) {
    for (SpMat::InnerIterator it(g_m, k); it; ++it) {
      const int i = static_cast<int>(it.row()) / nt;
      const int j = static_cast<int>(it.row()) % nt;
      const int i2 = static_cast<int>(it.col()) / nt;
      const int j2 = static_cast<int>(it.col()) % nt;
      if (i == i2 || j == j2) continue;
      g_me(ViewGraph::edge_index(i, i2, nd), ViewGraph::edge_index(j, j2, nt)) += it.value();
    }
  }

  // Me = Ed Et^T on the normalized concatenated edge features.
  const Mat ed = edge_feature_matrix(fd);
  const Mat et = edge_feature_matrix(ft);
  const Mat g_ed = g_me * et;
  const Mat g_et = g_me.transpose() * ed;

  // Backward through e = c/||c||, c = [h_i, h_i'] : g_c = (g - (g.e)e)/||c||.
  auto pull_edges = [d](const Mat& f, const Mat& e, const Mat& g_e, Mat& g_f) {
    const int n = static_cast<int>(f.rows());
    for (int u = 0; u < static_cast<int>(e.rows()); ++u) {
      const auto [i, i2] = ViewGraph::edge_at(u, n);
      Vec cat(2 * d);
      cat << f.row(i).transpose(), f.row(i2).transpose();
      const double norm = cat.norm();
      if (norm <= kNormEps) continue;
      const Vec ehat = e.row(u).transpose();
      const Vec g = g_e.row(u).transpose();
      const Vec g_cat = (g - ehat.dot(g) * ehat) / norm;
      g_f.row(i) += g_cat.head(d).transpose();
      g_f.row(i2) += g_cat.tail(d).transpose();
    }
  };
  pull_edges(fd, ed, g_ed, out.g_fd);
  pull_edges(ft, et, g_et, out.g_ft);
  return out;
}

}  // namespace gmatch
