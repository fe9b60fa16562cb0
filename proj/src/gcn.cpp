// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include "gmatch/gcn.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "gmatch/graph.hpp"

namespace gmatch {

namespace {

constexpr double kTinyNorm = 1e-12;

Mat identity_block(int rows, int cols) {
  Mat w = Mat::Zero(rows, cols);
  const int k = std::min(rows, cols);
  w.topLeftCorner(k, k).setIdentity();
  return w;
}

struct MlpCache {
  Mat x, a1, r1;
};

// rows of x are items
Mat mlp_forward(const MlpParams& p, const Mat& x, MlpCache& cache) {
  cache.x = x;
  cache.a1 = (x * p.W1.transpose()).rowwise() + p.b1.transpose();
  cache.r1 = cache.a1.array().max(0.0).matrix();
  return (cache.r1 * p.W2.transpose()).rowwise() + p.b2.transpose();
}

Mat mlp_backward(const MlpParams& p, const MlpCache& cache, const Mat& g_y,
                 MlpParams& grad) {
  const Mat g_r1 = g_y * p.W2;
  const Mat g_a1 =
      (g_r1.array() * (cache.a1.array() > 0.0).cast<double>()).matrix();
  grad.W2 += g_y.transpose() * cache.r1;
  grad.b2 += g_y.colwise().sum().transpose();
  grad.W1 += g_a1.transpose() * cache.x;
  grad.b1 += g_a1.colwise().sum().transpose();
  return g_a1 * p.W1;
}

MlpParams zero_like(const MlpParams& p) {
  MlpParams z;
  z.W1 = Mat::Zero(p.W1.rows(), p.W1.cols());
  z.W2 = Mat::Zero(p.W2.rows(), p.W2.cols());
  z.b1 = Vec::Zero(p.b1.size());
  z.b2 = Vec::Zero(p.b2.size());
  return z;
}

}  // namespace

GcnParams identity_params(int d_in, int d, int layer_count) {
  GcnParams p;
  p.d_in = d_in;
  p.d = d;
  p.enc.W1 = identity_block(d, d_in);
  p.enc.b1 = Vec::Zero(d);
  p.enc.W2 = Mat::Identity(d, d);
  p.enc.b2 = Vec::Zero(d);
  for (int l = 0; l < layer_count; ++l) {
    MlpParams m;
    m.W1 = Mat::Identity(d, d);
    m.b1 = Vec::Zero(d);
    m.W2 = Mat::Identity(d, d);
    m.b2 = Vec::Zero(d);
    p.layers.push_back(std::move(m));
  }
  return p;
}

GcnParams init_params(int d_in, int d, int layer_count, std::uint64_t seed, double noise) {
  GcnParams p = identity_params(d_in, d, layer_count);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  auto jitter = [&](Mat& w) {
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) w(r, c) += gauss(rng);
  };
  jitter(p.enc.W1);
  jitter(p.enc.W2);
  for (auto& l : p.layers) {
    jitter(l.W1);
    jitter(l.W2);
  }
  return p;
}

double cross_weight(const Vec& h_i, const Vec& h_j, const BBox& g_i, const BBox& g_j,
                    bool use_geo) {
  const double na = h_i.norm();
  const double nb = h_j.norm();
  double w = 0.0;
  if (na > kTinyNorm && nb > kTinyNorm) w = h_i.dot(h_j) / (na * nb);
  if (use_geo) w += iou(g_i, g_j);
  return w;
}

Vec message_update_input(const Vec& h, const Vec& m) {
  const double nm = m.norm();
  const double nh = h.norm();
  if (nm <= kTinyNorm || nh <= kTinyNorm) return h;
  return h + nh * m / nm;
}

struct LayerCache {
  Mat zd_in, zt_in;
  Mat cosm;            // cosine part of the weights
  Mat w;               // cos + geo
  Mat md, mt;          // cross messages
  Mat ud, ut;          // update-MLP inputs
  MlpCache mlp_d, mlp_t;
};

struct GcnCache {
  GcnParams params;
  bool use_geo = false;
  Mat iou_dt;          // nd x nt, constant across layers
  Mat fd, ft;
  MlpCache enc_d, enc_t;
  std::vector<LayerCache> layers;
  Mat zd_final, zt_final;   // pre-normalization
  bool dropped = false;
};

namespace {

Mat cosine_matrix(const Mat& a, const Mat& b) {
  Mat c(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    const double na = a.row(i).norm();
    for (int j = 0; j < b.rows(); ++j) {
      const double nb = b.row(j).norm();
      c(i, j) = (na > kTinyNorm && nb > kTinyNorm)
                    ? a.row(i).dot(b.row(j)) / (na * nb)
                    : 0.0;
    }
  }
  return c;
}

// u_i = z_i + ||z_i|| m_i / ||m_i||, rows
Mat message_update(const Mat& z, const Mat& m, bool& dropped) {
  Mat u = z;
  for (int i = 0; i < z.rows(); ++i) {
    const double nm = m.row(i).norm();
    const double nz = z.row(i).norm();
    if (nm <= kTinyNorm || nz <= kTinyNorm) {
      dropped = true;
      continue;
    }
    u.row(i) += nz * m.row(i) / nm;
  }
  return u;
}

Mat normalize_rows(const Mat& z) {
  Mat h = z;
  for (int i = 0; i < z.rows(); ++i) {
    const double n = z.row(i).norm();
    if (n > kTinyNorm) h.row(i) /= n;
  }
  return h;
}

}  // namespace

GcnOut gcn_forward(const Mat& fd, const Mat& ft, const std::vector<BBox>& box_d,
                   const std::vector<BBox>& box_t, const GcnParams& params,
                   bool use_geo) {
  const int nd = static_cast<int>(fd.rows());
  const int nt = static_cast<int>(ft.rows());
  if (fd.cols() != params.d_in || ft.cols() != params.d_in)
    throw DimError("gcn_forward: feature dimension does not match parameters");

  auto cache = std::make_shared<GcnCache>();
  cache->params = params;
  cache->use_geo = use_geo;
  cache->fd = fd;
  cache->ft = ft;

  cache->iou_dt = Mat::Zero(nd, nt);
  if (use_geo)
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nt; ++j) cache->iou_dt(i, j) = iou(box_d[i], box_t[j]);

  Mat zd = mlp_forward(params.enc, fd, cache->enc_d);
  Mat zt = mlp_forward(params.enc, ft, cache->enc_t);

  for (const MlpParams& layer : params.layers) {
    LayerCache lc;
    lc.zd_in = zd;
    lc.zt_in = zt;
    lc.cosm = cosine_matrix(zd, zt);
    lc.w = lc.cosm + (use_geo ? cache->iou_dt : Mat::Zero(nd, nt));
    lc.md = lc.w * zt;
    lc.mt = lc.w.transpose() * zd;
    lc.ud = message_update(zd, lc.md, cache->dropped);
    lc.ut = message_update(zt, lc.mt, cache->dropped);
    zd = mlp_forward(layer, lc.ud, lc.mlp_d);
    zt = mlp_forward(layer, lc.ut, lc.mlp_t);
    cache->layers.push_back(std::move(lc));
  }

  cache->zd_final = zd;
  cache->zt_final = zt;

  GcnOut out;
  out.hd = normalize_rows(zd);
  out.ht = normalize_rows(zt);
  out.cache = cache;
  out.dropped_message = cache->dropped;
  return out;
}

namespace {

// backward of h = z/||z|| for each row
Mat normalize_rows_backward(const Mat& z, const Mat& g_h) {
  Mat g_z = g_h;
  for (int i = 0; i < z.rows(); ++i) {
    const double n = z.row(i).norm();
    if (n <= kTinyNorm) continue;
    const Vec hat = z.row(i).transpose() / n;
    const Vec g = g_h.row(i).transpose();
    g_z.row(i) = ((g - hat.dot(g) * hat) / n).transpose();
  }
  return g_z;
}

// backward of u = z + ||z|| m/||m|| w.r.t. z (returned) and m (accumulated)
void message_update_backward(const Mat& z, const Mat& m, const Mat& g_u, Mat& g_z,
                             Mat& g_m) {
  g_z += g_u;
  g_m = Mat::Zero(m.rows(), m.cols());
  for (int i = 0; i < z.rows(); ++i) {
    const double nm = m.row(i).norm();
    const double nz = z.row(i).norm();
    if (nm <= kTinyNorm || nz <= kTinyNorm) continue;
    const Vec mh = m.row(i).transpose() / nm;
    const Vec g = g_u.row(i).transpose();
    g_z.row(i) += (g.dot(mh) / nz) * z.row(i);
    g_m.row(i) = (nz / nm) * (g - g.dot(mh) * mh).transpose();
  }
}

}  // namespace

GcnGrads gcn_backward(const GcnCache& cache, const Mat& g_hd, const Mat& g_ht) {
  const GcnParams& p = cache.params;

  GcnGrads out;
  out.param_grads.d_in = p.d_in;
  out.param_grads.d = p.d;
  out.param_grads.enc = zero_like(p.enc);
  for (const auto& l : p.layers) out.param_grads.layers.push_back(zero_like(l));

  Mat g_zd = normalize_rows_backward(cache.zd_final, g_hd);
  Mat g_zt = normalize_rows_backward(cache.zt_final, g_ht);

  for (int l = static_cast<int>(p.layers.size()) - 1; l >= 0; --l) {
    const LayerCache& lc = cache.layers[l];
    MlpParams& lgrad = out.param_grads.layers[l];

    const Mat g_ud = mlp_backward(p.layers[l], lc.mlp_d, g_zd, lgrad);
    const Mat g_ut = mlp_backward(p.layers[l], lc.mlp_t, g_zt, lgrad);

    Mat g_zd_in = Mat::Zero(lc.zd_in.rows(), lc.zd_in.cols());
    Mat g_zt_in = Mat::Zero(lc.zt_in.rows(), lc.zt_in.cols());
    Mat g_md, g_mt;
    message_update_backward(lc.zd_in, lc.md, g_ud, g_zd_in, g_md);
    message_update_backward(lc.zt_in, lc.mt, g_ut, g_zt_in, g_mt);

    // md = W zt, mt = W^T zd
    Mat g_w = g_md * lc.zt_in.transpose() + lc.zd_in * g_mt.transpose();
    g_zt_in += lc.w.transpose() * g_md;
    g_zd_in += lc.w * g_mt;

    // cosine part of the weights (IoU is constant)
    for (int i = 0; i < lc.zd_in.rows(); ++i) {
      const double na = lc.zd_in.row(i).norm();
      if (na <= kTinyNorm) continue;
      for (int j = 0; j < lc.zt_in.rows(); ++j) {
        const double nb = lc.zt_in.row(j).norm();
        if (nb <= kTinyNorm) continue;
        const double gw = g_w(i, j);
        if (gw == 0.0) continue;
        const double c = lc.cosm(i, j);
        g_zd_in.row(i) += gw * (lc.zt_in.row(j) / nb - c * lc.zd_in.row(i) / na) / na;
        g_zt_in.row(j) += gw * (lc.zd_in.row(i) / na - c * lc.zt_in.row(j) / nb) / nb;
      }
    }

    g_zd = g_zd_in;
    g_zt = g_zt_in;
  }

  out.g_fd = mlp_backward(p.enc, cache.enc_d, g_zd, out.param_grads.enc);
  out.g_ft = mlp_backward(p.enc, cache.enc_t, g_zt, out.param_grads.enc);
  return out;
}

}  // namespace gmatch
