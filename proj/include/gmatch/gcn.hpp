// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "gmatch/core.hpp"
#include "gmatch/qp.hpp"

namespace gmatch {

// Two linear layers with a ReLU between: y = W2 relu(W1 x + b1) + b2.
struct MlpParams {
  Mat W1, W2;
  Vec b1, b2;
};

struct GcnParams {
  MlpParams enc;                  // appearance encoder, d_in -> d
  std::vector<MlpParams> layers;  // cross-graph update MLPs, d -> d
  int d_in = 0;
  int d = 0;

  int layer_count() const { return static_cast<int>(layers.size()); }
};

// Exact-identity parameters (noise 0) or near-identity with Gaussian noise on
// the weights. The output layer starts at I + noise.
GcnParams identity_params(int d_in, int d, int layer_count = 1);
GcnParams init_params(int d_in, int d, int layer_count, std::uint64_t seed,
                      double noise = 0.01);

// Aggregation weight of Eq-style cross update: cosine similarity plus IoU of
// the boxes when geometry is enabled.
double cross_weight(const Vec& h_i, const Vec& h_j, const BBox& g_i, const BBox& g_j,
                    bool use_geo);

// h + ||h|| m/||m||; the message term is dropped when m vanishes.
Vec message_update_input(const Vec& h, const Vec& m);

struct GcnCache;

struct GcnOut {
  Mat hd;   // enhanced detection features, unit rows
  Mat ht;   // enhanced tracklet features, unit rows
  std::shared_ptr<GcnCache> cache;
  bool dropped_message = false;
};

GcnOut gcn_forward(const Mat& fd, const Mat& ft, const std::vector<BBox>& box_d,
                   const std::vector<BBox>& box_t, const GcnParams& params,
                   bool use_geo);

struct GcnGrads {
  GcnParams param_grads;   // same shapes as the parameters
  Mat g_fd, g_ft;          // gradients w.r.t. the raw input features
};

GcnGrads gcn_backward(const GcnCache& cache, const Mat& g_hd, const Mat& g_ht);

// ---------------------------------------------------------------------------
// Training

struct TrainItem {
  Mat fd, ft;
  std::vector<BBox> box_d, box_t;
  Mat y;   // ground-truth assignment, one 1 per matched detection row
};

struct AdamState {
  GcnParams m, v;
  int t = 0;
};

struct TrainConfig {
  double tau = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-5;
  double adam_eps = 1e-8;
  bool use_geo = false;
  SolveOptions qp;
};

struct Trainer {
  GcnParams params;
  AdamState state;
  TrainConfig cfg;
  double lr_scale = 1.0;   // halved whenever a step is rejected
};

struct BatchGrads {
  GcnParams sum;       // sum of per-item gradients
  double loss_sum = 0.0;
  int count = 0;
  bool finite = true;
};

BatchGrads compute_batch_gradient(const GcnParams& params, const std::vector<TrainItem>& batch,
                                  const TrainConfig& cfg);

struct StepResult {
  double mean_loss = 0.0;
  bool rejected = false;
};

// One Adam step through the full forward/backward chain (GCN, affinities,
// QP layer, sharpened loss). Non-finite losses reject the step and halve the
// trainer's learning-rate scale.
StepResult train_step(Trainer& trainer, const std::vector<TrainItem>& batch, double lr);

void adam_step(GcnParams& params, AdamState& state, const GcnParams& grad, double lr,
               const TrainConfig& cfg);

}  // namespace gmatch
