// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include "gmatch/qp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace gmatch {

double KktResiduals::max_abs() const {
  return std::max({stationarity, primal_eq, primal_ineq, complementarity, dual_nonneg});
}

QpProblem assemble_matching_qp(const SpMat& m, const Mat& b) {
  const int nd = static_cast<int>(b.rows());
  const int nt = static_cast<int>(b.cols());
  if (nd == 0 || nt == 0)
    throw EmptyProblem("assemble_matching_qp: empty side");
  const int dim = nd * nt;
  if (m.rows() != dim || m.cols() != dim)
    throw DimError("assemble_matching_qp: M dimension mismatch");

  QpProblem p;
  p.nd = nd;
  p.nt = nt;
  p.n = std::max(nd, nt);

  const double scale = 2.0 * static_cast<double>(p.n - 1) * (p.n - 1);
  p.Q = Mat(-2.0 * m);
  p.Q.diagonal().array() += scale + kRidge;

  p.q = Vec(dim);
  for (int i = 0; i < nd; ++i)
    for (int j = 0; j < nt; ++j)
      p.q(i * nt + j) = -b(i, j);

  // Equality rows on the smaller side, sum inequalities on the larger side.
  const bool det_smaller = nd <= nt;
  const int n_eq = det_smaller ? nd : nt;
  const int n_sum = det_smaller ? nt : nd;

  p.A = Mat::Zero(n_eq, dim);
  p.b_eq = Vec::Ones(n_eq);
  p.eq_groups.assign(n_eq, {});
  for (int r = 0; r < n_eq; ++r) {
    for (int k = 0; k < (det_smaller ? nt : nd); ++k) {
      const int var = det_smaller ? r * nt + k : k * nt + r;
      p.A(r, var) = 1.0;
      p.eq_groups[r].push_back(var);
    }
  }

  p.G = Mat::Zero(n_sum + dim, dim);
  p.h = Vec::Zero(n_sum + dim);
  p.ineq_groups.assign(n_sum, {});
  for (int r = 0; r < n_sum; ++r) {
    for (int k = 0; k < (det_smaller ? nd : nt); ++k) {
      const int var = det_smaller ? k * nt + r : r * nt + k;
      p.G(r, var) = 1.0;
      p.ineq_groups[r].push_back(var);
    }
    p.h(r) = 1.0;
  }
  p.nonneg_offset = n_sum;
  for (int v = 0; v < dim; ++v) p.G(n_sum + v, v) = -1.0;
  return p;
}

namespace {

// K = Q + G^T diag(d) G assembled from the constraint structure when present;
// falls back to the dense product otherwise.
Mat normal_matrix(const QpProblem& p, const Vec& d) {
  const int n = p.num_vars();
  Mat k = p.Q;
  const int n_sum = static_cast<int>(p.ineq_groups.size());
  const bool structured =
      p.nonneg_offset >= 0 && p.nonneg_offset == n_sum &&
      n_sum + n == static_cast<int>(p.G.rows());
  if (structured) {
    for (int r = 0; r < n_sum; ++r) {
      const auto& vars = p.ineq_groups[r];
      const double dr = d(r);
      for (int a : vars)
        for (int b : vars) k(a, b) += dr;
    }
    for (int v = 0; v < n; ++v) k(v, v) += d(p.nonneg_offset + v);
  } else {
    k += p.G.transpose() * d.asDiagonal() * p.G;
  }
  return k;
}

struct AugmentedSolver {
  Eigen::LLT<Mat> llt;
  Mat a_kinv_at;           // A K^-1 A^T
  Eigen::LLT<Mat> schur;
  bool ok = false;

  // Factor K and the Schur complement A K^-1 A^T.
  void factor(const QpProblem& p, const Vec& d, double extra_reg) {
    Mat k = normal_matrix(p, d);
    if (extra_reg > 0.0) k.diagonal().array() += extra_reg;
    llt.compute(k);
    ok = llt.info() == Eigen::Success;
    if (!ok) {
      // bump the diagonal a few times before giving up
      double reg = std::max(extra_reg, 1e-12);
      for (int attempt = 0; attempt < 6 && !ok; ++attempt, reg *= 100.0) {
        Mat k2 = k;
        k2.diagonal().array() += reg;
        llt.compute(k2);
        ok = llt.info() == Eigen::Success;
      }
      if (!ok) return;
    }
    if (p.A.rows() > 0) {
      Mat kinv_at = llt.solve(p.A.transpose());
      a_kinv_at = p.A * kinv_at;
      a_kinv_at.diagonal().array() += 1e-14;  // guard exact singularity
      schur.compute(a_kinv_at);
      ok = schur.info() == Eigen::Success;
    }
  }

  // Solves [K A^T; A 0] [dx; dnu] = [r1; r2].
  void solve(const QpProblem& p, const Vec& r1, const Vec& r2, Vec& dx, Vec& dnu) const {
    if (p.A.rows() == 0) {
      dx = llt.solve(r1);
      dnu = Vec();
      return;
    }
    const Vec kinv_r1 = llt.solve(r1);
    dnu = schur.solve(p.A * kinv_r1 - r2);
    dx = llt.solve(r1 - p.A.transpose() * dnu);
  }
};

double max_step(const Vec& v, const Vec& dv) {
  double alpha = 1.0;
  for (int i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  return alpha;
}

}  // namespace

/*
 * Infeasible-start Mehrotra predictor-corrector. With slacks s > 0 for
 * G x + s = h and duals lambda > 0, each Newton system
 *
 *   [ Q   A^T  G^T ] [dx ]   [ -r_d  ]        r_d = Qx + q + A^T nu + G^T la
 *   [ A    0    0  ] [dnu] = [ -r_p  ]        r_p = Ax - b
 *   [ G    0   -I_s] [dla]   [ ...   ]        r_g = Gx + s - h
 *
 * is reduced by eliminating ds = -r_g - G dx and
 * dla = (la o r_g - r_c)/s + diag(la/s) G dx, leaving the normal system
 *
 *   (Q + G^T diag(la/s) G) dx + A^T dnu = -r_d - G^T ((la o r_g - r_c)/s)
 *   A dx = -r_p
 *
 * solved via an LLT of K and a Schur complement in the equality duals. The
 * corrector pass reuses the factorization with r_c = s o la + ds_aff o
 * dla_aff - sigma*mu.
 */
QpSolution solve_qp(const QpProblem& p, const SolveOptions& opts) {
  const int n = p.num_vars();
  const int mi = static_cast<int>(p.G.rows());
  const int me = static_cast<int>(p.A.rows());

  QpSolution sol;
  if (n == 0) throw EmptyProblem("solve_qp: zero variables");
  if (!p.Q.allFinite() || !p.q.allFinite())
    throw InvalidFeature("solve_qp: non-finite problem data");
  // presolve: an all-zero equality row with nonzero right-hand side cannot hold
  for (int r = 0; r < me; ++r) {
    if (p.A.row(r).lpNorm<Eigen::Infinity>() == 0.0 && std::abs(p.b_eq(r)) > 0.0) {
      sol.status = QpStatus::Infeasible;
      sol.x = Vec::Zero(n);
      sol.lambda = Vec::Zero(mi);
      sol.nu = Vec::Zero(me);
      sol.slack = Vec::Zero(mi);
      return sol;
    }
  }

  Vec x = Vec::Constant(n, p.n > 0 ? 1.0 / p.n : 0.5);
  Vec nu = Vec::Zero(me);
  Vec s = Vec::Ones(mi);
  Vec la = Vec::Ones(mi);

  AugmentedSolver aug;
  Vec dx(n), dnu(me), ds(mi), dla(mi);
  Vec dx_c(n), dnu_c(me), ds_c(mi), dla_c(mi);

  // Termination is measured on the clipped candidate so the residuals the
  // caller sees after output clipping are the ones that met the tolerance.
  auto converged = [&](const Vec& xc) {
    const Vec stat = p.Q * xc + p.q + p.A.transpose() * nu + p.G.transpose() * la;
    double err = stat.lpNorm<Eigen::Infinity>();
    if (me > 0) err = std::max(err, (p.A * xc - p.b_eq).lpNorm<Eigen::Infinity>());
    if (mi > 0) {
      const Vec gap = p.G * xc - p.h;
      err = std::max(err, gap.array().max(0.0).maxCoeff());
      err = std::max(err, (la.array() * gap.array()).abs().maxCoeff());
    }
    return err <= opts.tol;
  };

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    sol.iterations = iter;
    Vec x_clip = x.array().min(1.0).max(0.0).matrix();
    if (converged(x_clip)) {
      sol.status = QpStatus::Optimal;
      x = x_clip;
      break;
    }

    const Vec r_d = p.Q * x + p.q + p.A.transpose() * nu + p.G.transpose() * la;
    const Vec r_p = p.A * x - p.b_eq;
    const Vec r_g = p.G * x + s - p.h;
    const double comp = mi > 0 ? s.dot(la) / mi : 0.0;

    const Vec d = (la.array() / s.array()).matrix();
    aug.factor(p, d, 0.0);
    if (!aug.ok) {
      sol.status = QpStatus::MaxIter;
      break;
    }

    // affine predictor (sigma = 0)
    Vec r_c = (s.array() * la.array()).matrix();
    Vec rhs = -r_d - p.G.transpose() * ((la.array() * r_g.array() - r_c.array()) / s.array()).matrix();
    aug.solve(p, rhs, -r_p, dx, dnu);
    ds = -r_g - p.G * dx;
    dla = ((la.array() * r_g.array() - r_c.array()) / s.array()).matrix() + d.asDiagonal() * (p.G * dx);

    double sigma = 0.0;
    if (mi > 0) {
      const double ap = max_step(s, ds);
      const double ad = max_step(la, dla);
      const double mu_aff = ((s + ap * ds).dot(la + ad * dla)) / mi;
      sigma = comp > 0.0 ? std::pow(mu_aff / comp, 3.0) : 0.0;
      sigma = std::clamp(sigma, 0.0, 1.0);
    }

    // corrector
    Vec r_c2 = r_c + (ds.array() * dla.array()).matrix() - Vec::Constant(mi, sigma * comp);
    rhs = -r_d - p.G.transpose() * ((la.array() * r_g.array() - r_c2.array()) / s.array()).matrix();
    aug.solve(p, rhs, -r_p, dx_c, dnu_c);
    ds_c = -r_g - p.G * dx_c;
    dla_c = ((la.array() * r_g.array() - r_c2.array()) / s.array()).matrix() + d.asDiagonal() * (p.G * dx_c);

    const double tau = 0.995;
    const double ap = mi > 0 ? std::min(1.0, tau * max_step(s, ds_c)) : 1.0;
    const double ad = mi > 0 ? std::min(1.0, tau * max_step(la, dla_c)) : 1.0;

    x += ap * dx_c;
    s += ap * ds_c;
    nu += ad * dnu_c;
    la += ad * dla_c;
    sol.iterations = iter + 1;

    if (!x.allFinite() || !s.allFinite() || !la.allFinite()) {
      sol.status = QpStatus::MaxIter;
      break;
    }
  }

  if (sol.status != QpStatus::Optimal) {
    Vec x_clip = x.array().min(1.0).max(0.0).matrix();
    if (converged(x_clip)) {
      sol.status = QpStatus::Optimal;
      x = x_clip;
    }
  }
  sol.objective = 0.5 * x.dot(p.Q * x) + p.q.dot(x);
  sol.x = x;
  sol.lambda = la;
  sol.nu = nu;
  sol.slack = s;
  return sol;
}

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s) {
  if (s.x.size() != p.num_vars())
    throw DimError("kkt_residuals: solution dimension mismatch");
  KktResiduals r;
  const Vec stat = p.Q * s.x + p.q + p.A.transpose() * s.nu + p.G.transpose() * s.lambda;
  r.stationarity = stat.size() > 0 ? stat.lpNorm<Eigen::Infinity>() : 0.0;
  if (p.A.rows() > 0)
    r.primal_eq = (p.A * s.x - p.b_eq).lpNorm<Eigen::Infinity>();
  if (p.G.rows() > 0) {
    const Vec gap = p.G * s.x - p.h;
    r.primal_ineq = gap.array().max(0.0).maxCoeff();
    r.complementarity = (s.lambda.array() * gap.array()).abs().maxCoeff();
    r.dual_nonneg = (-s.lambda.array()).max(0.0).maxCoeff();
  }
  return r;
}

}  // namespace gmatch
