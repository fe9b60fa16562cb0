// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

#include "gmatch/core.hpp"
#include "gmatch/qp.hpp"

namespace gmatch {

// Forward result plus everything the backward pass needs.
struct ScoreMap {
  Mat X;                 // nd x nt matching scores in [0,1]
  QpProblem problem;
  QpSolution solution;
};

struct MatchGrads {
  Mat g_b;               // dL/dB
  SpMat g_m;             // dL/dM on M's sparsity pattern, symmetric
  bool regularized = false;
};

// Assembles and solves the relaxed matching QP; X is the primal vector
// reshaped by the detection-major pair index.
ScoreMap gm_forward(const SpMat& m, const Mat& b, const SolveOptions& opts = {});

// Implicit-function backward through the KKT system of the forward solve.
MatchGrads gm_backward(const ScoreMap& cache, const Mat& grad_x);

// Row-wise softmax of X / tau, log-sum-exp stabilized.
Mat sharpen(const Mat& x, double tau);

struct LossReport {
  double loss = 0.0;
  Mat grad_x;            // dL/dX, chained through sharpen
};

constexpr double kLogEps = 1e-7;
constexpr double kDefaultTau = 1e-3;

// Weighted binary cross entropy with positive weight k = nt - 1 on the
// sharpened scores; grad_x is the gradient w.r.t. the pre-softmax scores.
LossReport wbce_loss(const Mat& yhat, const Mat& y, int nt, double tau = kDefaultTau);

// Central-difference verification of gm_backward on a random instance.
struct FiniteDiffReport {
  double max_rel_error = 0.0;
  double max_rel_b = 0.0;
  double max_rel_m = 0.0;
  bool degenerate = false;   // backward hit the regularized path
};
FiniteDiffReport finite_diff_check(const SpMat& m, const Mat& b, unsigned seed);

}  // namespace gmatch
