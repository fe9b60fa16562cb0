// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include <cmath>

#include "gmatch/affinity.hpp"
#include "gmatch/diffmatch.hpp"
#include "gmatch/gcn.hpp"
#include "gmatch/graph.hpp"
#include "gmatch/threads.hpp"

namespace gmatch {

namespace {

GcnParams zero_params_like(const GcnParams& p) {
  GcnParams z = p;
  z.enc.W1.setZero();
  z.enc.W2.setZero();
  z.enc.b1.setZero();
  z.enc.b2.setZero();
  for (auto& l : z.layers) {
    l.W1.setZero();
    l.W2.setZero();
    l.b1.setZero();
    l.b2.setZero();
  }
  return z;
}

void accumulate(GcnParams& acc, const GcnParams& g) {
  acc.enc.W1 += g.enc.W1;
  acc.enc.W2 += g.enc.W2;
  acc.enc.b1 += g.enc.b1;
  acc.enc.b2 += g.enc.b2;
  for (std::size_t l = 0; l < acc.layers.size(); ++l) {
    acc.layers[l].W1 += g.layers[l].W1;
    acc.layers[l].W2 += g.layers[l].W2;
    acc.layers[l].b1 += g.layers[l].b1;
    acc.layers[l].b2 += g.layers[l].b2;
  }
}

bool params_finite(const GcnParams& p) {
  bool ok = p.enc.W1.allFinite() && p.enc.W2.allFinite() && p.enc.b1.allFinite() &&
            p.enc.b2.allFinite();
  for (const auto& l : p.layers)
    ok = ok && l.W1.allFinite() && l.W2.allFinite() && l.b1.allFinite() && l.b2.allFinite();
  return ok;
}

// loss and parameter gradient of one matching instance
double item_gradient(const GcnParams& params, const TrainItem& item, const TrainConfig& cfg,
                     GcnParams& grad_out) {
  GcnOut enhanced = gcn_forward(item.fd, item.ft, item.box_d, item.box_t, params, cfg.use_geo);

  const Mat b = enhanced.hd * enhanced.ht.transpose();
  const Mat me = edge_feature_matrix(enhanced.hd) * edge_feature_matrix(enhanced.ht).transpose();
  const SpMat m = expand_affinity(me, static_cast<int>(item.fd.rows()),
                                  static_cast<int>(item.ft.rows()));

  ScoreMap fwd = gm_forward(m, b, cfg.qp);
  const Mat yhat = sharpen(fwd.X, cfg.tau);
  LossReport rep = wbce_loss(yhat, item.y, static_cast<int>(item.ft.rows()), cfg.tau);

  MatchGrads mg = gm_backward(fwd, rep.grad_x);
  AffinityGrads ag = affinity_backward(enhanced.hd, enhanced.ht, mg.g_b, mg.g_m);
  GcnGrads gg = gcn_backward(*enhanced.cache, ag.g_fd, ag.g_ft);
  grad_out = gg.param_grads;
  return rep.loss;
}

}  // namespace

BatchGrads compute_batch_gradient(const GcnParams& params, const std::vector<TrainItem>& batch,
                                  const TrainConfig& cfg) {
  BatchGrads out;
  out.sum = zero_params_like(params);
  out.count = static_cast<int>(batch.size());

  std::vector<GcnParams> grads(batch.size());
  std::vector<double> losses(batch.size(), 0.0);
  std::vector<char> failed(batch.size(), 0);

#pragma omp parallel for num_threads(thread_count()) schedule(dynamic)
  for (int k = 0; k < static_cast<int>(batch.size()); ++k) {
    try {
      losses[k] = item_gradient(params, batch[k], cfg, grads[k]);
    } catch (const Error&) {
      failed[k] = 1;
    }
  }

  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (failed[k]) {
      out.finite = false;
      continue;
    }
    out.loss_sum += losses[k];
    accumulate(out.sum, grads[k]);
  }
  if (!std::isfinite(out.loss_sum) || !params_finite(out.sum)) out.finite = false;
  return out;
}

void adam_step(GcnParams& params, AdamState& state, const GcnParams& grad, double lr,
               const TrainConfig& cfg) {
  if (state.t == 0) {
    state.m = zero_params_like(params);
    state.v = zero_params_like(params);
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, state.t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, state.t);

  auto update = [&](Mat& p, Mat& m, Mat& v, const Mat& g_in) {
    const Mat g = g_in + cfg.weight_decay * p;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.array().square().matrix();
    const Mat mh = m / bc1;
    const Mat vh = v / bc2;
    p -= lr * (mh.array() / (vh.array().sqrt() + cfg.adam_eps)).matrix();
  };
  auto update_v = [&](Vec& p, Vec& m, Vec& v, const Vec& g_in) {
    const Vec g = g_in + cfg.weight_decay * p;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.array().square().matrix();
    const Vec mh = m / bc1;
    const Vec vh = v / bc2;
    p -= lr * (mh.array() / (vh.array().sqrt() + cfg.adam_eps)).matrix();
  };

  update(params.enc.W1, state.m.enc.W1, state.v.enc.W1, grad.enc.W1);
  update(params.enc.W2, state.m.enc.W2, state.v.enc.W2, grad.enc.W2);
  update_v(params.enc.b1, state.m.enc.b1, state.v.enc.b1, grad.enc.b1);
  update_v(params.enc.b2, state.m.enc.b2, state.v.enc.b2, grad.enc.b2);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].W1, state.m.layers[l].W1, state.v.layers[l].W1, grad.layers[l].W1);
    update(params.layers[l].W2, state.m.layers[l].W2, state.v.layers[l].W2, grad.layers[l].W2);
    update_v(params.layers[l].b1, state.m.layers[l].b1, state.v.layers[l].b1, grad.layers[l].b1);
    update_v(params.layers[l].b2, state.m.layers[l].b2, state.v.layers[l].b2, grad.layers[l].b2);
  }
}

StepResult train_step(Trainer& trainer, const std::vector<TrainItem>& batch, double lr) {
  StepResult res;
  if (batch.empty()) return res;

  BatchGrads bg = compute_batch_gradient(trainer.params, batch, trainer.cfg);
  res.mean_loss = bg.loss_sum / bg.count;

  if (!bg.finite || !std::isfinite(res.mean_loss)) {
    trainer.lr_scale *= 0.5;
    res.rejected = true;
    return res;
  }

  GcnParams mean_grad = bg.sum;
  const double inv = 1.0 / bg.count;
  mean_grad.enc.W1 *= inv;
  mean_grad.enc.W2 *= inv;
  mean_grad.enc.b1 *= inv;
  mean_grad.enc.b2 *= inv;
  for (auto& l : mean_grad.layers) {
    l.W1 *= inv;
    l.W2 *= inv;
    l.b1 *= inv;
    l.b2 *= inv;
  }
  adam_step(trainer.params, trainer.state, mean_grad, lr * trainer.lr_scale, trainer.cfg);
  return res;
}

}  // namespace gmatch
