// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "gmatch/affinity.hpp"
#include "gmatch/diffmatch.hpp"
#include "gmatch/gcn.hpp"
#include "gmatch/gst.hpp"
#include "gmatch/io.hpp"
#include "gmatch/metrics.hpp"
#include "gmatch/scenario.hpp"
#include "gmatch/threads.hpp"
#include "gmatch/tracker.hpp"

using namespace gmatch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;

struct GenArgs {
  std::string preset = "basic";
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
};

int run_gen(const GenArgs& a) {
  ScenarioConfig sc = scenario_preset(a.preset);
  if (!a.config_path.empty()) apply_kv_config(sc, read_kv_config(a.config_path));
  Scenario s = gen_scenario(sc, a.seed);
  write_mot(a.out_dir + "/gt.txt", s.ground_truth);
  write_mot(a.out_dir + "/det.txt", s.detections);
  write_features(a.out_dir + "/features.bin", s.features);
  std::printf("wrote %zu gt rows, %zu detections to %s\n", s.ground_truth.size(),
              s.detections.size(), a.out_dir.c_str());
  return kExitOk;
}

struct TrackArgs {
  std::string det_path;
  std::string feat_path;
  std::string out_path = "res.txt";
  std::string params_path;
  std::string solver = "qp";
  double sigma = -2.0;   // sentinel: defaulted from geo
  double kappa = 9.4877;
  int max_age = 100;
  bool geo = false;
  bool do_interpolate = false;
  bool no_quadratic = false;
  std::uint64_t seed = 0;
};

int run_track(const TrackArgs& a) {
  const std::vector<MotRecord> det_rows = read_mot(a.det_path);
  const Mat features = read_features(a.feat_path);
  if (features.rows() != static_cast<Eigen::Index>(det_rows.size()))
    throw ParseError("track: feature rows do not match detection rows");

  TrackerConfig cfg = TrackerConfig::defaults(a.geo);
  if (a.sigma > -1.5) cfg.sigma = a.sigma;
  cfg.kappa = a.kappa;
  cfg.max_age = a.max_age;
  cfg.solver = a.solver == "gst" ? SolverKind::Gst : SolverKind::Qp;
  cfg.run_interpolation = a.do_interpolate;
  cfg.zero_quadratic = a.no_quadratic;

  GcnParams params;
  const GcnParams* params_ptr = nullptr;
  if (!a.params_path.empty()) {
    params = read_params(a.params_path);
    params_ptr = &params;
  }

  int last_frame = 0;
  for (const MotRecord& r : det_rows) last_frame = std::max(last_frame, r.frame);

  TrackerState st;
  for (int f = 1; f <= last_frame; ++f) {
    std::vector<Detection> dets;
    for (std::size_t k = 0; k < det_rows.size(); ++k) {
      if (det_rows[k].frame != f) continue;
      Detection d;
      d.frame = f;
      d.bbox = det_rows[k].center_box();
      d.feature = features.row(static_cast<Eigen::Index>(k)).transpose();
      dets.push_back(std::move(d));
    }
    tracker_step(st, dets, cfg, params_ptr);
  }

  std::vector<MotRecord> out = st.outputs;
  if (cfg.run_interpolation) out = interpolate(out);
  write_mot(a.out_path, out);
  std::printf("tracked %d frames, %zu output rows -> %s\n", last_frame, out.size(),
              a.out_path.c_str());
  return kExitOk;
}

struct SolveArgs {
  std::string feat_a;
  std::string feat_b;
  std::string out_path = "scores.csv";
  bool no_quadratic = false;
};

int run_solve(const SolveArgs& a) {
  const Mat fa = read_features(a.feat_a);
  const Mat fb = read_features(a.feat_b);
  ViewGraph gd = build_view_graph(fa, std::vector<BBox>(fa.rows()));
  ViewGraph gt = build_view_graph(fb, std::vector<BBox>(fb.rows()));
  AffinityPair p = build_affinity(gd, gt);
  if (a.no_quadratic) p.M.setZero();
  ScoreMap s = gm_forward(p.M, p.B);
  std::ofstream out(a.out_path);
  for (int i = 0; i < s.X.rows(); ++i) {
    for (int j = 0; j < s.X.cols(); ++j)
      out << (j ? "," : "") << std::fixed << std::setprecision(9) << s.X(i, j);
    out << '\n';
  }
  std::printf("solved %ldx%ld instance (status %s, %d iterations) -> %s\n",
              static_cast<long>(s.X.rows()), static_cast<long>(s.X.cols()),
              s.solution.status == QpStatus::Optimal ? "optimal" : "not optimal",
              s.solution.iterations, a.out_path.c_str());
  return s.solution.status == QpStatus::Optimal ? kExitOk : 1;
}

struct TrainArgs {
  std::string out_params = "params.bin";
  std::string loss_csv = "loss.csv";
  int steps = 200;
  int identities = 10;
  double lr = 5e-5;
  std::uint64_t seed = 1;
};

// toy instances: identities with a shared spoiler direction that the encoder
// can learn to suppress
std::vector<TrainItem> toy_batch(const Mat& bases, const Vec& spoiler, double mix,
                                 int nd, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int d = static_cast<int>(bases.cols());
  std::vector<int> ids(bases.rows());
  for (int i = 0; i < bases.rows(); ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), rng);

  TrainItem item;
  item.fd = Mat(nd, d);
  item.ft = Mat(nd, d);
  item.y = Mat::Zero(nd, nd);
  for (int k = 0; k < nd; ++k) {
    Vec noise(d);
    for (int c = 0; c < d; ++c) noise(c) = 0.05 * gauss(rng);
    Vec f = bases.row(ids[k]).transpose() + mix * spoiler + noise;
    item.fd.row(k) = (f / f.norm()).transpose();
    Vec g = bases.row(ids[k]).transpose() + mix * spoiler;
    item.ft.row(k) = (g / g.norm()).transpose();
    item.y(k, k) = 1.0;
    item.box_d.push_back(BBox{40.0 * k, 0.0, 20.0, 40.0});
    item.box_t.push_back(BBox{40.0 * k, 0.0, 20.0, 40.0});
  }
  return {item};
}

int run_train(const TrainArgs& a) {
  const int d = 16;
  std::mt19937_64 rng(a.seed * 7919 + 13);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Mat bases(a.identities, d);
  for (int i = 0; i < a.identities; ++i) {
    Vec v(d);
    for (int c = 0; c < d; ++c) v(c) = gauss(rng);
    bases.row(i) = (v / v.norm()).transpose();
  }
  Vec spoiler(d);
  for (int c = 0; c < d; ++c) spoiler(c) = gauss(rng);
  spoiler /= spoiler.norm();

  Trainer trainer;
  trainer.params = init_params(d, d, 1, a.seed, 0.01);

  std::ofstream loss_out(a.loss_csv);
  loss_out << "step,loss\n";
  double first_loss = 0.0, last_loss = 0.0;
  for (int step = 0; step < a.steps; ++step) {
    std::vector<TrainItem> batch;
    for (int k = 0; k < 4; ++k) {
      auto items = toy_batch(bases, spoiler, 3.0, 5, rng);
      batch.insert(batch.end(), items.begin(), items.end());
    }
    StepResult r = train_step(trainer, batch, a.lr);
    if (step == 0) first_loss = r.mean_loss;
    last_loss = r.mean_loss;
    loss_out << step << ',' << std::setprecision(9) << r.mean_loss << '\n';
  }
  write_params(a.out_params, trainer.params);
  std::printf("trained %d steps: loss %.6f -> %.6f, checkpoint %s\n", a.steps,
              first_loss, last_loss, a.out_params.c_str());
  return kExitOk;
}

struct BenchArgs {
  int n = 40;
  int avg_component = 4;
  int instances = 3;
  int repeats = 5;
  std::string out_path = "timings.csv";
  std::uint64_t seed = 1;
};

int run_bench_gst(const BenchArgs& a) {
  std::mt19937_64 rng(a.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::ofstream out(a.out_path);
  out << "instance,n_d,n_t,qp_ms,gst_ms,speedup\n";

  std::vector<double> qp_times, gst_times;
  for (int inst = 0; inst < a.instances; ++inst) {
    const int n = a.n;
    Mat f(n, 16), g(n, 16);
    for (int i = 0; i < n; ++i) {
      Vec v(16), w(16);
      for (int c = 0; c < 16; ++c) {
        v(c) = gauss(rng);
        w(c) = gauss(rng);
      }
      f.row(i) = (v / v.norm()).transpose();
      g.row(i) = (w / w.norm()).transpose();
    }
    ViewGraph gd = build_view_graph(f, std::vector<BBox>(n));
    ViewGraph gt = build_view_graph(g, std::vector<BBox>(n));
    AffinityPair p = build_affinity(gd, gt);

    // gates: contiguous blocks with sides <= avg_component
    GateGraph gates;
    gates.nd = gates.nt = n;
    gates.adj.assign(n, std::vector<char>(n, 0));
    std::uniform_int_distribution<int> side(1, a.avg_component);
    int i0 = 0;
    while (i0 < n) {
      const int b = std::min(side(rng), n - i0);
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j) gates.adj[i0 + i][i0 + j] = 1;
      i0 += b;
    }

    auto median_of = [&](auto&& fn) {
      std::vector<double> times;
      for (int r = 0; r < a.repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
      std::sort(times.begin(), times.end());
      return times[times.size() / 2];
    };

    const double qp_ms = median_of([&] { gm_forward(p.M, p.B); });
    const double gst_ms = median_of([&] { gst_solve(p.M, p.B, gates); });
    qp_times.push_back(qp_ms);
    gst_times.push_back(gst_ms);
    out << inst << ',' << n << ',' << n << ',' << qp_ms << ',' << gst_ms << ','
        << qp_ms / gst_ms << '\n';
    std::printf("instance %d: qp %.1f ms, gst %.2f ms (%.0fx)\n", inst, qp_ms, gst_ms,
                qp_ms / gst_ms);
  }
  std::sort(qp_times.begin(), qp_times.end());
  std::sort(gst_times.begin(), gst_times.end());
  const double qp_med = qp_times[qp_times.size() / 2];
  const double gst_med = gst_times[gst_times.size() / 2];
  std::printf("median: qp %.1f ms, gst %.2f ms, speedup %.0fx -> %s\n", qp_med, gst_med,
              qp_med / gst_med, a.out_path.c_str());
  return kExitOk;
}

struct EvalArgs {
  std::string gt_path;
  std::string res_path;
  std::string out_path = "metrics.csv";
};

int run_eval(const EvalArgs& a) {
  Metrics m = evaluate(read_mot(a.gt_path), read_mot(a.res_path));
  std::ofstream out(a.out_path);
  out << "IDF1,MOTA,FP,FN,IDSW,GT\n";
  out << std::setprecision(9) << m.idf1 << ',' << m.mota << ',' << m.fp << ',' << m.fn
      << ',' << m.idsw << ',' << m.gt << '\n';
  std::printf("IDF1 %.4f MOTA %.4f FP %d FN %d IDSW %d GT %d\n", m.idf1, m.mota, m.fp,
              m.fn, m.idsw, m.gt);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-matching data association toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* cgen = app.add_subcommand("gen", "generate a synthetic scenario");
  cgen->add_option("--preset", gen.preset, "basic | crossing | occlusion");
  cgen->add_option("--config", gen.config_path, "key = value scenario config file");
  cgen->add_option("--out-dir", gen.out_dir, "output directory");
  cgen->add_option("--seed", gen.seed, "scenario seed");

  TrackArgs track;
  auto* ctrack = app.add_subcommand("track", "run the online tracker");
  ctrack->add_option("--det", track.det_path, "MOT detections csv")->required();
  ctrack->add_option("--features", track.feat_path, "feature file")->required();
  ctrack->add_option("--out", track.out_path, "output MOT csv");
  ctrack->add_option("--solver", track.solver, "qp | gst")
      ->check(CLI::IsMember({"qp", "gst"}));
  ctrack->add_option("--sigma", track.sigma, "appearance threshold");
  ctrack->add_option("--kappa", track.kappa, "motion gate");
  ctrack->add_option("--max-age", track.max_age, "tracklet max age in frames");
  ctrack->add_flag("--geo", track.geo, "use geometric terms in the cross weights");
  ctrack->add_flag("--interpolate", track.do_interpolate, "linear interpolation");
  ctrack->add_flag("--no-quadratic", track.no_quadratic, "bipartite baseline (M = 0)");
  ctrack->add_option("--params", track.params_path, "parameter checkpoint");
  ctrack->add_option("--seed", track.seed, "reserved for reproducibility");

  SolveArgs solve;
  auto* csolve = app.add_subcommand("solve", "solve one matching instance");
  csolve->add_option("--features-a", solve.feat_a, "detection-side features")->required();
  csolve->add_option("--features-b", solve.feat_b, "tracklet-side features")->required();
  csolve->add_option("--out", solve.out_path, "score map csv");
  csolve->add_flag("--no-quadratic", solve.no_quadratic, "drop the quadratic term");

  TrainArgs train;
  auto* ctrain = app.add_subcommand("train", "toy end-to-end training loop");
  ctrain->add_option("--steps", train.steps, "optimizer steps");
  ctrain->add_option("--identities", train.identities, "toy identity count");
  ctrain->add_option("--lr", train.lr, "learning rate");
  ctrain->add_option("--out", train.out_params, "checkpoint path");
  ctrain->add_option("--loss-csv", train.loss_csv, "loss curve csv");
  ctrain->add_option("--seed", train.seed, "training seed");

  BenchArgs bench;
  auto* cbench = app.add_subcommand("bench-gst", "time gst against the qp solver");
  cbench->add_option("--n", bench.n, "entities per side");
  cbench->add_option("--avg-component", bench.avg_component, "max gated block side");
  cbench->add_option("--instances", bench.instances, "instance count");
  cbench->add_option("--repeats", bench.repeats, "repeats per timing");
  cbench->add_option("--out", bench.out_path, "timing csv");
  cbench->add_option("--seed", bench.seed, "instance seed");

  EvalArgs eval;
  auto* ceval = app.add_subcommand("eval", "evaluate tracking metrics");
  ceval->add_option("--gt", eval.gt_path, "ground-truth MOT csv")->required();
  ceval->add_option("--res", eval.res_path, "result MOT csv")->required();
  ceval->add_option("--out", eval.out_path, "metrics csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*cgen) return run_gen(gen);
    if (*ctrack) return run_track(track);
    if (*csolve) return run_solve(solve);
    if (*ctrain) return run_train(train);
    if (*cbench) return run_bench_gst(bench);
    if (*ceval) return run_eval(eval);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitInput;
}
