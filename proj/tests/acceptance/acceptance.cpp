// Acceptance suite: one PASS/FAIL line per criterion. `--only K` runs a single criterion.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wavecast/autodiff.hpp"
#include "wavecast/cli/commands.hpp"
#include "wavecast/cli/config.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/metrics.hpp"
#include "wavecast/model.hpp"
#include "wavecast/parallel.hpp"
#include "wavecast/physics.hpp"
#include "wavecast/rng.hpp"
#include "wavecast/synthgen.hpp"
#include "wavecast/train.hpp"
#include "wavecast/vf1.hpp"

using namespace wavecast;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and sizes.
constexpr double kUnitarityTol = 1e-10;
constexpr int kUnitarityInstances = 20;
constexpr double kSlopeLo = 1.7, kSlopeHi = 2.3;
constexpr int kDriftInstances = 100;
constexpr double kDriftBoundExpected = 2.40e-3;
constexpr double kDriftBoundRelTol = 5e-3;
constexpr double kGradTol = 1e-5;
constexpr double kOverfitMse = 1e-3;
constexpr double kOverfitSeconds = 600.0;
constexpr int kSurfacePairs = 25;
constexpr double kSpectralSumTol = 1e-9;
constexpr double kEquivarianceTol = 1e-10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("wavecast_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ComplexField random_psi(const GridSpec& g, rng::CounterStream& s) {
  ComplexField f(g);
  for (auto& z : f.values()) z = Complex(s.uniform(-1, 1), s.uniform(-1, 1));
  return f;
}

RealField random_real(const GridSpec& g, rng::CounterStream& s, double lo = -1.0, double hi = 1.0) {
  RealField f(g);
  for (auto& x : f.values()) x = s.uniform(lo, hi);
  return f;
}

double max_abs_diff(const ComplexField& a, const ComplexField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const RealField& a, const RealField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string read_text(const fs::path& p) {
  const auto b = vf1::read_file(p);
  return {b.begin(), b.end()};
}

int run(const std::string& cmd, const cli::RunConfig& cfg, const cli::CommandOptions& opts = {}) {
  std::ostringstream log;
  const int code = cli::run_command(cmd, cfg, opts, log, std::cerr);
  if (code != 0) std::cerr << cmd << " exited with " << code << "\n" << log.str();
  return code;
}

// 1. Crank-Nicolson conserves the norm.
Outcome cn_unitarity() {
  double worst = 0.0;
  for (const GridSpec& g : {GridSpec{8, 8, 8}, GridSpec{16, 16}}) {
    for (int i = 0; i < kUnitarityInstances; ++i) {
      rng::CounterStream s(101, rng::Purpose::Check, static_cast<std::uint64_t>(i) + 1000 * g.rank());
      const auto psi = random_psi(g, s);
      const auto v = random_real(g, s);
      const double n0 = l2_norm(psi);
      const auto out = physics::crank_nicolson_reference(psi, v, 0.02, 100);
      worst = std::max(worst, std::abs(l2_norm(out) / n0 - 1.0));
    }
  }
  return {worst < kUnitarityTol, "max relative norm drift " + fmt(worst) + " over 2x" +
                                     std::to_string(kUnitarityInstances) + " instances (tol " + fmt(kUnitarityTol) +
                                     ")"};
}

// 2. The predictor-corrector converges to Crank-Nicolson at second order.
Outcome integrator_order() {
  const GridSpec g{8, 8, 8};
  std::vector<double> slopes;
  for (int i = 0; i < 3; ++i) {
    rng::CounterStream s(202, rng::Purpose::Check, static_cast<std::uint64_t>(i));
    const auto psi = random_psi(g, s);
    const auto v = random_real(g, s);
    std::vector<double> x, y;
    for (int n : {10, 20, 40, 80}) {
      physics::EvolutionConfig evo;
      evo.unroll_steps = n;
      const double err =
          max_abs_diff(physics::evolve(psi, v, evo).psi, physics::crank_nicolson_reference(psi, v, 1.0 / n, n));
      x.push_back(std::log(1.0 / n));
      y.push_back(std::log(err));
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / 4.0;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / 4.0;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      sxy += (x[k] - mx) * (y[k] - my);
      sxx += (x[k] - mx) * (x[k] - mx);
    }
    slopes.push_back(sxy / sxx);
  }
  const auto [lo, hi] = std::minmax_element(slopes.begin(), slopes.end());
  return {*lo >= kSlopeLo && *hi <= kSlopeHi,
          "log-log slopes in [" + fmt(*lo) + ", " + fmt(*hi) + "] on 3 instances (range [1.7, 2.3])"};
}

// 3. Measured norm drift stays under the a-priori bound.
Outcome drift_bound() {
  const GridSpec g{8, 8, 8};
  const double reference = physics::norm_drift_bound(1.0, g, 0.02, 50);
  bool ok = std::abs(reference / kDriftBoundExpected - 1.0) < kDriftBoundRelTol;
  double worst_ratio = 0.0;
  for (int i = 0; i < kDriftInstances; ++i) {
    rng::CounterStream s(303, rng::Purpose::Check, static_cast<std::uint64_t>(i));
    const auto psi = random_psi(g, s);
    const auto v = random_real(g, s);
    physics::EvolutionConfig evo;
    evo.unroll_steps = 50;
    evo.dt = 0.02;
    const auto out = physics::evolve(psi, v, evo);
    double vmax = 0.0;
    for (double x : v.values()) vmax = std::max(vmax, std::abs(x));
    const double drift = std::abs(l2_norm(out.psi) / l2_norm(psi) - 1.0);
    const double bound = physics::norm_drift_bound(vmax, g, 0.02, 50);
    worst_ratio = std::max(worst_ratio, drift / bound);
    ok = ok && drift <= bound;
  }
  return {ok, "worst drift/bound " + fmt(worst_ratio) + " over " + std::to_string(kDriftInstances) +
                  " instances; bound at V_max=1 is " + fmt(reference) + " (expected 2.40e-3)"};
}

// 4. Adjoint gradients match central finite differences; a flipped adjoint sign is caught.
Outcome gradient_correctness() {
  autodiff::GradcheckConfig cfg;
  cfg.dims = {12, 12};
  cfg.history = 5;
  cfg.channels = 4;
  cfg.unroll = 5;
  cfg.tol = kGradTol;
  const auto good = autodiff::gradcheck(cfg);
  double worst = 0.0;
  for (const auto& t : good.tensors) worst = std::max(worst, t.max_rel_err);
  const auto bad = autodiff::gradcheck(cfg, autodiff::AdjointMutation::FlipConv2KernelSign);
  std::size_t flagged = 0;
  for (const auto& t : bad.tensors) flagged += t.passed ? 0 : 1;
  return {good.passed && !bad.passed, "max relative error " + fmt(worst) + " over " +
                                          std::to_string(good.tensors.size()) + " tensors (tol 1e-5); mutation " +
                                          (bad.passed ? "missed" : "detected in " + std::to_string(flagged) +
                                                                       " tensor(s)")};
}

json learning_config(const fs::path& root) {
  return {{"dataset", {{"kind", "2d"}, {"dims", {32, 32}}, {"n_train", 200}, {"n_test", 50}, {"seed", 2024}}},
          {"model", {{"channels", 8}, {"history", 5}}},
          {"evolution", {{"unroll", 20}}},
          {"train", {{"epochs", 30}, {"batch_size", 4}, {"lr", 1e-3}, {"seed", 7}, {"checkpoint_every", 0}}},
          {"eval", {{"tau", 0.5}, {"plots", false}}},
          {"io", {{"data_dir", (root / "data").string()}, {"out_dir", (root / "out").string()}}}};
}

// 5. A trained model beats persistence on held-out SSIM and Dice.
Outcome learning_signal() {
  const auto root = scratch("learning");
  const auto cfg = cli::parse_config(learning_config(root));
  if (run("gen", cfg) || run("train", cfg)) return {false, "pipeline failed"};
  cli::CommandOptions opts;
  opts.checkpoints = {root / "out" / "final.ckpt"};
  if (run("eval", cfg, opts)) return {false, "eval failed"};
  const auto agg = json::parse(read_text(root / "out" / "report.json"))["aggregate"];
  const double ms = agg["wavecast"]["mean"]["ssim"], ps = agg["persistence"]["mean"]["ssim"];
  const double md = agg["wavecast"]["mean"]["dice"], pd = agg["persistence"]["mean"]["dice"];
  return {ms > ps && md > pd, "test SSIM " + fmt(ms) + " vs persistence " + fmt(ps) + "; Dice@0.5 " + fmt(md) +
                                  " vs " + fmt(pd) + " (50 held-out samples)"};
}

// 6. Ten training samples can be fit.
Outcome overfit() {
  const std::vector<std::int64_t> dims{32, 32};
  std::vector<train::Sample> data;
  for (std::uint64_t i = 0; i < 10; ++i) {
    data.push_back(train::sample_from_frames(synthgen::gen_sequence_2d(2024, i, dims).frames, 5));
  }
  // Two stages: 20000 epochs at lr 1e-2, then 4000 at lr 1e-3 from the same optimizer state.
  constexpr int kFastEpochs = 20000;
  constexpr int kSlowEpochs = 4000;
  train::TrainConfig cfg;
  cfg.epochs = kFastEpochs;
  cfg.batch_size = 10;
  cfg.adam.lr = 1e-2;
  cfg.unroll = 10;
  cfg.channels = 8;
  cfg.seed = 7;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> curve;
  train::TrainHooks hooks;
  hooks.on_epoch = [&](const train::TrainState& s) { curve.push_back(s.curve.back().mean_total); };
  auto st = train::train(data, cfg, train::initial_state(2, cfg), hooks);
  cfg.epochs = kFastEpochs + kSlowEpochs;
  cfg.adam.lr = 1e-3;
  st = train::train(data, cfg, st, hooks);

  // Smoothed loss (window 3) must not rise over the first 20 epochs.
  bool decreasing = true;
  for (std::size_t e = 3; e < 20 && e + 1 < curve.size(); ++e) {
    const double prev = (curve[e - 3] + curve[e - 2] + curve[e - 1]) / 3.0;
    const double cur = (curve[e - 2] + curve[e - 1] + curve[e]) / 3.0;
    decreasing = decreasing && cur <= prev;
  }
  double mse = 0.0;
  physics::EvolutionConfig evo;
  evo.unroll_steps = cfg.unroll;
  for (const auto& s : data) mse += metrics::mse(model::forecast(s.history, st.params, evo).x_hat, s.target) / 10.0;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mse < kOverfitMse && decreasing && secs < kOverfitSeconds,
          "train MSE " + fmt(mse) + " after " + std::to_string(cfg.epochs) +
              " epochs, lr 1e-2 then 1e-3 (threshold 1e-3); early loss " +
              (decreasing ? "decreasing" : "not decreasing") + "; " + fmt(secs) + " s (limit 600)"};
}

// Brute-force surface distances for one mask pair.
metrics::SurfaceMetrics brute_surface(const metrics::BinaryMask& a, const metrics::BinaryMask& b) {
  const auto& g = a.grid;
  auto surface = [&](const metrics::BinaryMask& m) {
    std::vector<std::array<std::int64_t, 3>> out;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!m.bits[i]) continue;
      const auto c = g.coords(i);
      bool edge = false;
      for (int ax = 0; ax < g.rank() && !edge; ++ax) {
        for (int d : {-1, 1}) {
          auto n = c;
          n[static_cast<std::size_t>(ax)] += d;
          if (n[static_cast<std::size_t>(ax)] < 0 || n[static_cast<std::size_t>(ax)] >= g.dims()[static_cast<std::size_t>(ax)] ||
              !m.bits[g.flat_index(std::span<const std::int64_t>(n.data(), static_cast<std::size_t>(g.rank())))]) {
            edge = true;
          }
        }
      }
      if (edge) out.push_back(c);
    }
    return out;
  };
  const auto sa = surface(a), sb = surface(b);
  auto nearest = [](const std::array<std::int64_t, 3>& p, const std::vector<std::array<std::int64_t, 3>>& set) {
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (const auto& q : set) {
      std::int64_t d2 = 0;
      for (std::size_t k = 0; k < p.size(); ++k) d2 += (p[k] - q[k]) * (p[k] - q[k]);
      best = std::min(best, d2);
    }
    return std::sqrt(static_cast<double>(best));
  };
  std::vector<double> d;
  std::size_t close = 0;
  for (const auto& p : sa) d.push_back(nearest(p, sb));
  for (const auto& p : sb) d.push_back(nearest(p, sa));
  for (double x : d) close += x <= 1.0 ? 1 : 0;
  metrics::SurfaceMetrics m;
  m.assd_vox = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  m.surface_dice_1vox = static_cast<double>(close) / static_cast<double>(d.size());
  std::sort(d.begin(), d.end());
  const double pos = 0.95 * static_cast<double>(d.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, d.size() - 1);
  m.hd95_vox = d[lo] + (pos - static_cast<double>(lo)) * (d[hi] - d[lo]);
  return m;
}

metrics::BinaryMask random_blobs(const GridSpec& g, rng::CounterStream& s) {
  metrics::BinaryMask m{g, std::vector<std::uint8_t>(g.size(), 0)};
  const int blobs = 1 + static_cast<int>(s.uniform(0, 3));
  for (int b = 0; b < blobs; ++b) {
    const double cz = s.uniform(3, 13), cy = s.uniform(3, 13), cx = s.uniform(3, 13), r = s.uniform(1.5, 5.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto c = g.coords(i);
      const double dz = static_cast<double>(c[0]) - cz, dy = static_cast<double>(c[1]) - cy,
                   dx = static_cast<double>(c[2]) - cx;
      if (dz * dz + dy * dy + dx * dx <= r * r) m.bits[i] = 1;
    }
  }
  for (auto& bit : m.bits) {
    if (s.uniform(0, 1) < 0.01) bit ^= 1;
  }
  return m;
}

// 7. Metric implementations agree with counting and brute-force oracles.
Outcome metric_oracles() {
  const GridSpec g{16, 16, 16};
  int surface_mismatch = 0, count_mismatch = 0;
  double worst_sum = 0.0;
  for (int i = 0; i < kSurfacePairs; ++i) {
    rng::CounterStream s(707, rng::Purpose::Check, static_cast<std::uint64_t>(i));
    const auto a = random_blobs(g, s), b = random_blobs(g, s);
    const auto fast = metrics::surface_metrics(a, b);
    const auto slow = brute_surface(a, b);
    if (fast.hd95_vox != slow.hd95_vox || fast.surface_dice_1vox != slow.surface_dice_1vox ||
        std::abs(fast.assd_vox - slow.assd_vox) > 1e-12 * std::max(1.0, slow.assd_vox)) {
      ++surface_mismatch;
    }

    std::size_t na = 0, nb = 0, both = 0;
    std::vector<double> ca(3, 0.0), cb(3, 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const auto c = g.coords(k);
      na += a.bits[k];
      nb += b.bits[k];
      both += a.bits[k] & b.bits[k];
      for (std::size_t ax = 0; ax < 3; ++ax) {
        if (a.bits[k]) ca[ax] += static_cast<double>(c[ax]);
        if (b.bits[k]) cb[ax] += static_cast<double>(c[ax]);
      }
    }
    double com = 0.0;
    for (std::size_t ax = 0; ax < 3; ++ax) {
      const double d = ca[ax] / static_cast<double>(na) - cb[ax] / static_cast<double>(nb);
      com += d * d;
    }
    const auto vc = metrics::volume_com(a, b);
    const double dice = 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
    const double vol_err = 100.0 * std::abs(static_cast<double>(na) - static_cast<double>(nb)) / static_cast<double>(nb);
    if (metrics::dice(a, b) != dice || vc.pred_vol != static_cast<double>(na) || vc.gt_vol != static_cast<double>(nb) ||
        vc.abs_vol_err_pct != vol_err || std::abs(vc.com_err_vox - std::sqrt(com)) > 1e-12) {
      ++count_mismatch;
    }

    const auto x = random_real(g, s, 0, 1), y = random_real(g, s, 0, 1);
    const auto sp = metrics::spectral_split(x, y);
    worst_sum = std::max(worst_sum, std::abs(sp.lowfreq_frac + sp.highfreq_frac - 1.0));
  }

  // Constant 2 plus a Nyquist checkerboard: energy 4 at DC, 1 at the corner.
  RealField mix(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto c = g.coords(k);
    mix[k] = 2.0 + ((c[0] + c[1] + c[2]) % 2 ? -1.0 : 1.0);
  }
  const auto two_bin = metrics::spectral_split(mix, RealField(g));
  const bool two_bin_ok =
      std::abs(two_bin.lowfreq_frac - 0.8) < 1e-12 && std::abs(two_bin.highfreq_frac - 0.2) < 1e-12;

  const bool pass = surface_mismatch == 0 && count_mismatch == 0 && worst_sum <= kSpectralSumTol && two_bin_ok;
  return {pass, std::to_string(kSurfacePairs - surface_mismatch) + "/25 surface pairs match brute force, " +
                    std::to_string(kSurfacePairs - count_mismatch) + "/25 count oracles match, spectral sum error " +
                    fmt(worst_sum) + ", two-bin split (" + fmt(two_bin.lowfreq_frac) + ", " +
                    fmt(two_bin.highfreq_frac) + ")"};
}

// 8. Datasets regenerate byte-identically; the 64^3 1200/400 set generates without escapes.
Outcome dataset_reproducibility() {
  bool identical = true;
  for (const auto& [kind, dims] : std::vector<std::pair<synthgen::Kind, std::vector<std::int64_t>>>{
           {synthgen::Kind::D2, {32, 32}}, {synthgen::Kind::D3, {24, 24, 24}}}) {
    const synthgen::DatasetSpec spec{kind, dims, 6, 3, 99};
    const auto a = scratch("regen_a"), b = scratch("regen_b");
    set_thread_count(1);
    synthgen::build_dataset(spec, a);
    set_thread_count(4);
    synthgen::build_dataset(spec, b);
    set_thread_count(0);
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      const auto other = b / fs::relative(e.path(), a);
      identical = identical && fs::exists(other) && vf1::read_file(e.path()) == vf1::read_file(other);
    }
  }

  const synthgen::DatasetSpec full_scale{synthgen::Kind::D3, {64, 64, 64}, 1200, 400, 2024};
  std::vector<std::uint64_t> forward(full_scale.n_train + full_scale.n_test);
  std::iota(forward.begin(), forward.end(), 0);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::uint64_t> digests;
  try {
    digests = synthgen::sample_digests(full_scale, forward);
  } catch (const GenerationError& e) {
    return {false, std::string("64^3 generation failed: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // Reverse order on a different worker count must give the same per-index digests.
  std::vector<std::uint64_t> probe{1599, 1234, 800, 401, 17, 0};
  set_thread_count(1);
  const auto again = synthgen::sample_digests(full_scale, probe, 3);
  set_thread_count(0);
  bool order_free = true;
  for (std::size_t i = 0; i < probe.size(); ++i) order_free = order_free && again[i] == digests[probe[i]];

  return {identical && order_free,
          std::string("regeneration ") + (identical ? "byte-identical" : "DIFFERS") + " across thread counts; " +
              "64^3 1200/400 generated in " + fmt(secs) + " s without escapes; reordered digests " +
              (order_free ? "match" : "DIFFER")};
}

// 9. The unroll sweep emits the full column set and latency grows with N.
Outcome sweep_harness() {
  const auto root = scratch("sweep");
  auto j = learning_config(root);
  j["dataset"]["n_train"] = 16;
  j["dataset"]["n_test"] = 8;
  j["train"]["epochs"] = 2;
  j["sweep"] = {{"unroll", {10, 20, 50, 100}}, {"retrain", true}, {"profile_warmup", 2}, {"profile_runs", 20}};
  const auto cfg = cli::parse_config(j);
  if (run("gen", cfg) || run("sweep-unroll", cfg)) return {false, "sweep failed"};
  const auto text = read_text(root / "out" / "sweep.csv");
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  std::string expected;
  for (const auto& c : cli::sweep_columns()) expected += (expected.empty() ? "" : ",") + c;
  const bool schema = header == expected &&
                      expected == "unroll,ssim,psnr_db,mse,dice,hd95_vox,assd_vox,surface_dice_1vox,highfreq_frac,"
                                  "lowfreq_frac,pred_vol,gt_vol,abs_vol_err_pct,com_err_vox,latency_ms,"
                                  "throughput_per_s";
  const auto rows = json::parse(read_text(root / "out" / "sweep.json"))["rows"];
  std::vector<double> latency;
  bool all_columns = rows.size() == 4;
  for (const auto& r : rows) {
    latency.push_back(r["latency_ms"]);
    for (const auto& c : cli::sweep_columns()) all_columns = all_columns && r.contains(c);
  }
  bool monotone = latency.size() == 4;
  for (std::size_t i = 1; i < latency.size(); ++i) monotone = monotone && latency[i] > latency[i - 1];
  std::string lat;
  for (double l : latency) lat += (lat.empty() ? "" : " < ") + fmt(l);
  return {schema && all_columns && monotone, std::string("columns ") + (schema && all_columns ? "exact" : "WRONG") +
                                                 "; latency ms " + lat + (monotone ? "" : " (not monotone)")};
}

// 10. Forecasts commute with cyclic shifts; reconstruction ignores a global phase.
Outcome equivariance() {
  double worst_shift = 0.0, worst_phase = 0.0;
  for (int i = 0; i < 6; ++i) {
    const GridSpec g = i % 2 ? GridSpec{10, 12, 8} : GridSpec{16, 20};
    rng::CounterStream s(1010, rng::Purpose::Check, static_cast<std::uint64_t>(i));
    std::vector<RealField> history;
    for (int t = 0; t < 5; ++t) history.push_back(random_real(g, s, 0, 1));
    const auto params = model::EncoderParams::initialized({g.rank(), 5, 4}, 50 + static_cast<std::uint64_t>(i));
    physics::EvolutionConfig evo;
    evo.unroll_steps = 10;
    std::vector<std::int64_t> shift;
    for (auto d : g.dims()) shift.push_back(static_cast<std::int64_t>(s.uniform(1, static_cast<double>(d))));
    std::vector<RealField> shifted;
    for (const auto& h : history) shifted.push_back(roll(h, shift));
    const auto base = model::forecast(history, params, evo);
    const auto moved = model::forecast(shifted, params, evo);
    worst_shift = std::max(worst_shift, max_abs_diff(roll(base.x_hat, shift), moved.x_hat));

    const Complex phase = std::polar(1.0, s.uniform(0, 2 * M_PI));
    ComplexField rotated = base.psi_final;
    for (auto& z : rotated.values()) z *= phase;
    worst_phase = std::max(worst_phase, max_abs_diff(model::reconstruct_intensity(rotated),
                                                     model::reconstruct_intensity(base.psi_final)));
    const auto evolved = physics::evolve(rotated, base.triplet.potential, evo).psi;
    ComplexField expected = physics::evolve(base.psi_final, base.triplet.potential, evo).psi;
    for (auto& z : expected.values()) z *= phase;
    worst_phase = std::max(worst_phase, max_abs_diff(model::reconstruct_intensity(evolved),
                                                     model::reconstruct_intensity(expected)));
  }
  return {worst_shift < kEquivarianceTol && worst_phase < kEquivarianceTol,
          "shift error " + fmt(worst_shift) + ", phase error " + fmt(worst_phase) + " on 6 instances (tol 1e-10)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavecast acceptance suite"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"CN unitarity", cn_unitarity},
      {"integrator order", integrator_order},
      {"norm-drift bound", drift_bound},
      {"gradient correctness", gradient_correctness},
      {"learning signal vs persistence", learning_signal},
      {"overfit sanity", overfit},
      {"metric oracles", metric_oracles},
      {"dataset reproducibility", dataset_reproducibility},
      {"unroll sweep harness", sweep_harness},
      {"equivariance", equivariance},
  };

  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only != 0 && static_cast<std::size_t>(only) != k + 1) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << k + 1 << " " << (o.pass ? "PASS" : "FAIL") << " [" << criteria[k].first << "] "
              << o.detail << " (" << fmt(secs) << " s)" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
