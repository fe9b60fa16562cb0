// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include "gmatch/diffmatch.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <random>

namespace gmatch {

ScoreMap gm_forward(const SpMat& m, const Mat& b, const SolveOptions& opts) {
  ScoreMap out;
  out.problem = assemble_matching_qp(m, b);
  out.solution = solve_qp(out.problem, opts);
  const int nd = out.problem.nd;
  const int nt = out.problem.nt;
  out.X = Mat(nd, nt);
  for (int i = 0; i < nd; ++i)
    for (int j = 0; j < nt; ++j) out.X(i, j) = out.solution.x(i * nt + j);
  return out;
}

/*
 * Differentiating the KKT conditions at the optimum and transposing gives the
 * system (with s* = h - G x*)
 *
 *   [ Q        G^T      A^T ] [dz ]   [ -dL/dx ]
 *   [ G   -diag(s*)      0  ] [dla] = [    0   ]
 *   [ A        0         0  ] [dnu]   [    0   ]
 *
 * after scaling the middle row by the inverse dual diagonal. Eliminating
 * dla = diag(lambda ./ s) G dz reproduces the forward normal matrix
 * K = Q + G^T diag(lambda ./ s) G, so the backward solve is one more
 * factorization of the same structure. Gradients follow as
 *
 *   dL/dq = dz,   dL/dQ = (dz x*^T + x* dz^T) / 2
 *
 * mapped to the affinities via q = -vec(B) and Q = 2((n-1)^2 I - M).
 */
MatchGrads gm_backward(const ScoreMap& cache, const Mat& grad_x) {
  const QpProblem& p = cache.problem;
  const QpSolution& s = cache.solution;
  const int n = p.num_vars();
  const int mi = static_cast<int>(p.G.rows());
  const int me = static_cast<int>(p.A.rows());
  if (grad_x.rows() != p.nd || grad_x.cols() != p.nt)
    throw DimError("gm_backward: grad shape mismatch");

  Vec g = Vec(n);
  for (int i = 0; i < p.nd; ++i)
    for (int j = 0; j < p.nt; ++j) g(i * p.nt + j) = grad_x(i, j);

  MatchGrads out;

  // Fully equality-determined solutions have zero sensitivity to the
  // objective; return the structural zero.
  if (me >= n) {
    out.g_b = Mat::Zero(p.nd, p.nt);
    out.g_m = SpMat(n, n);
    return out;
  }

  // Active-constraint penalty ratios lambda/s, floored and capped so K stays
  // numerically factorable; a constraint where both the slack and the dual
  // vanish is a degenerate active set (tie).
  constexpr double kRatioCap = 1e8;
  Vec d(mi);
  bool degenerate = false;
  if (mi > 0) {
    const Vec gap = p.h - p.G * s.x;
    for (int i = 0; i < mi; ++i) {
      const double slack = std::max(gap(i), 1e-12);
      d(i) = std::min(s.lambda(i) / slack, kRatioCap);
      if (gap(i) < 1e-7 && s.lambda(i) < 1e-7) degenerate = true;
    }
  }

  Mat k = p.Q;
  for (int r = 0; r < mi; ++r) {
    // K += d_r g_r g_r^T, exploiting the 0/1 structure where available
    if (p.nonneg_offset >= 0 && r >= p.nonneg_offset) {
      k(r - p.nonneg_offset, r - p.nonneg_offset) += d(r);
    } else if (r < static_cast<int>(p.ineq_groups.size())) {
      for (int a : p.ineq_groups[r])
        for (int c : p.ineq_groups[r]) k(a, c) += d(r);
    } else {
      k += d(r) * (p.G.row(r).transpose() * p.G.row(r));
    }
  }
  if (degenerate) {
    k.diagonal().array() += kKktReg;
    out.regularized = true;
  }

  Eigen::LLT<Mat> llt(k);
  if (llt.info() != Eigen::Success) {
    out.regularized = true;
    double reg = kKktReg;
    while (llt.info() != Eigen::Success && reg < 1.0) {
      Mat k2 = k;
      k2.diagonal().array() += reg;
      llt.compute(k2);
      reg *= 100.0;
    }
  }

  Vec dz;
  if (me > 0) {
    const Mat kinv_at = llt.solve(p.A.transpose());
    Mat schur = p.A * kinv_at;
    schur.diagonal().array() += 1e-14;
    const Vec kinv_g = llt.solve(-g);
    const Vec dnu = schur.llt().solve(p.A * kinv_g);
    dz = kinv_g - kinv_at * dnu;
  } else {
    dz = llt.solve(-g);
  }

  // q = -vec(B)
  out.g_b = Mat(p.nd, p.nt);
  for (int i = 0; i < p.nd; ++i)
    for (int j = 0; j < p.nt; ++j) out.g_b(i, j) = -dz(i * p.nt + j);

  // dL/dM = -2 * sym(dz x^T) restricted to the admissible pattern
  std::vector<Triplet> trips;
  const int nt = p.nt;
  for (int i = 0; i < p.nd; ++i) {
    for (int j = 0; j < nt; ++j) {
      for (int i2 = 0; i2 < p.nd; ++i2) {
        for (int j2 = 0; j2 < nt; ++j2) {
          if (i == i2 || j == j2) continue;
          const int a = i * nt + j;
          const int c = i2 * nt + j2;
          trips.emplace_back(a, c, -(dz(a) * s.x(c) + s.x(a) * dz(c)));
        }
      }
    }
  }
  out.g_m = SpMat(n, n);
  out.g_m.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Mat sharpen(const Mat& x, double tau) {
  if (tau <= 0.0) throw InvalidFeature("sharpen: tau must be positive");
  Mat y(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    Eigen::ArrayXd e = ((x.row(i).array() - m) / tau).exp();
    y.row(i) = (e / e.sum()).matrix();
  }
  return y;
}

LossReport wbce_loss(const Mat& yhat, const Mat& y, int nt, double tau) {
  if (yhat.rows() != y.rows() || yhat.cols() != y.cols())
    throw DimError("wbce_loss: shape mismatch");
  const int nd = static_cast<int>(yhat.rows());
  const double k = static_cast<double>(nt - 1);
  const double inv = 1.0 / (static_cast<double>(nd) * nt);

  LossReport rep;
  Mat g_yhat(nd, yhat.cols());
  for (int i = 0; i < nd; ++i) {
    for (int j = 0; j < yhat.cols(); ++j) {
      const double p = std::clamp(yhat(i, j), kLogEps, 1.0 - kLogEps);
      const double t = y(i, j);
      rep.loss -= inv * (k * t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
      g_yhat(i, j) = inv * (-k * t / p + (1.0 - t) / (1.0 - p));
    }
  }

  // chain through the row softmax: dL/dx_j = (g_j - g . yhat) yhat_j / tau
  rep.grad_x = Mat(nd, yhat.cols());
  for (int i = 0; i < nd; ++i) {
    const double dot = g_yhat.row(i).dot(yhat.row(i));
    rep.grad_x.row(i) =
        ((g_yhat.row(i).array() - dot) * yhat.row(i).array() / tau).matrix();
  }
  return rep;
}

FiniteDiffReport finite_diff_check(const SpMat& m, const Mat& b, unsigned seed) {
  const int nd = static_cast<int>(b.rows());
  const int nt = static_cast<int>(b.cols());
  const double fd_tau = 0.4;   // moderate temperature keeps the chain smooth
  const double h = 3e-5;

  // differences of two solves need accuracy well below h
  SolveOptions tight;
  tight.tol = 1e-11;
  tight.max_iter = 200;

  std::mt19937 rng(seed);
  Mat y = Mat::Zero(nd, nt);
  std::uniform_int_distribution<int> col(0, nt - 1);
  for (int i = 0; i < nd; ++i) y(i, col(rng)) = 1.0;

  auto loss_of = [&](const SpMat& mm, const Mat& bb) {
    ScoreMap fwd = gm_forward(mm, bb, tight);
    return wbce_loss(sharpen(fwd.X, fd_tau), y, nt, fd_tau).loss;
  };

  ScoreMap fwd = gm_forward(m, b, tight);
  LossReport rep = wbce_loss(sharpen(fwd.X, fd_tau), y, nt, fd_tau);
  MatchGrads grads = gm_backward(fwd, rep.grad_x);

  FiniteDiffReport out;
  out.degenerate = grads.regularized;

  double scale = std::max(1e-6, std::abs(rep.loss));
  auto rel = [&](double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4 * scale});
    return std::abs(analytic - numeric) / denom;
  };

  for (int i = 0; i < nd; ++i) {
    for (int j = 0; j < nt; ++j) {
      Mat bp = b, bm = b;
      bp(i, j) += h;
      bm(i, j) -= h;
      const double num = (loss_of(m, bp) - loss_of(m, bm)) / (2.0 * h);
      out.max_rel_b = std::max(out.max_rel_b, rel(grads.g_b(i, j), num));
    }
  }

  // a random subset of admissible M entries, perturbed symmetrically
  std::vector<std::pair<int, int>> entries;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      if (it.row() < it.col()) entries.emplace_back(it.row(), it.col());
  std::shuffle(entries.begin(), entries.end(), rng);
  const std::size_t take = std::min<std::size_t>(entries.size(), 10);
  for (std::size_t e = 0; e < take; ++e) {
    const auto [r, c] = entries[e];
    SpMat mp = m, mm2 = m;
    mp.coeffRef(r, c) += h;
    mp.coeffRef(c, r) += h;
    mm2.coeffRef(r, c) -= h;
    mm2.coeffRef(c, r) -= h;
    const double num = (loss_of(mp, b) - loss_of(mm2, b)) / (2.0 * h);
    const double analytic = grads.g_m.coeff(r, c) + grads.g_m.coeff(c, r);
    out.max_rel_m = std::max(out.max_rel_m, rel(analytic, num));
  }

  out.max_rel_error = std::max(out.max_rel_b, out.max_rel_m);
  return out;
}

}  // namespace gmatch
