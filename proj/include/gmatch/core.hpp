// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmatch {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidFeature : Error { using Error::Error; };
struct DimError : Error { using Error::Error; };
struct EmptyTracklet : Error { using Error::Error; };
struct EmptyProblem : Error { using Error::Error; };
struct ComponentTooLarge : Error { using Error::Error; };
struct OracleTooLarge : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Geometry

// Axis-aligned box in center format.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const { return cx - 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double right() const { return cx + 0.5 * w; }
  double bottom() const { return cy + 0.5 * h; }
  double area() const { return w * h; }

  static BBox from_corner(double x, double y, double w, double h) {
    return BBox{x + 0.5 * w, y + 0.5 * h, w, h};
  }
};

double iou(const BBox& a, const BBox& b);

// ---------------------------------------------------------------------------
// Domain types shared across modules

struct Detection {
  int frame = 0;
  BBox bbox;
  Vec feature;
};

// Constant-velocity Kalman state over (cx, cy, w, h, vcx, vcy, vw, vh).
struct KalmanState {
  Eigen::Matrix<double, 8, 1> mean = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 8, 8> covariance = Eigen::Matrix<double, 8, 8>::Zero();

  BBox box() const { return BBox{mean(0), mean(1), mean(2), mean(3)}; }
};

struct Tracklet {
  int id = 0;
  std::vector<Detection> history;
  Vec agg_feature;
  KalmanState kalman;
  int age_since_update = 0;
};

}  // namespace gmatch
