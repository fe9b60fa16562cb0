// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

#include <vector>

#include "gmatch/core.hpp"

namespace gmatch {

enum class QpStatus { Optimal, MaxIter, Infeasible };

// Standard-form convex QP: minimize 1/2 x^T Q x + q^T x
// subject to A x = b_eq and G x <= h.
struct QpProblem {
  Mat Q;
  Vec q;
  Mat A;
  Vec b_eq;
  Mat G;
  Vec h;

  // Matching metadata (set by assemble_matching_qp; zero otherwise).
  int nd = 0;
  int nt = 0;
  int n = 0;

  // Sparse structure of the constraint rows, used for fast normal-equation
  // assembly. eq_groups[r] / ineq_groups[r] list the variables with
  // coefficient 1 in constraint row r; nonneg_offset is the first row of the
  // -I block inside G (or -1 when absent).
  std::vector<std::vector<int>> eq_groups;
  std::vector<std::vector<int>> ineq_groups;
  int nonneg_offset = -1;

  int num_vars() const { return static_cast<int>(Q.rows()); }
};

struct QpSolution {
  Vec x;
  Vec lambda;   // inequality duals, >= 0
  Vec nu;       // equality duals
  Vec slack;    // s = h - G x at the final iterate
  QpStatus status = QpStatus::MaxIter;
  int iterations = 0;
  double objective = 0.0;
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal_eq = 0.0;
  double primal_ineq = 0.0;
  double complementarity = 0.0;
  double dual_nonneg = 0.0;

  double max_abs() const;
};

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 100;
};

constexpr double kRidge = 1e-8;      // diagonal shift applied to Q at assembly
constexpr double kKktReg = 1e-10;    // regularization for the backward solve

// Builds the relaxed matching QP from the sparse quadratic affinity M and the
// vertex affinity B: Q = 2((n-1)^2 I - M) + ridge, q = -vec(B), equality rows
// on the smaller side, sum inequalities on the larger side, plus x >= 0.
QpProblem assemble_matching_qp(const SpMat& m, const Mat& b);

// Primal-dual interior point with a Mehrotra-style predictor-corrector step.
QpSolution solve_qp(const QpProblem& p, const SolveOptions& opts = {});

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s);

}  // namespace gmatch
