#include "wavecast/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "wavecast/cli/plots.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/metrics.hpp"
#include "wavecast/parallel.hpp"
#include "wavecast/physics.hpp"
#include "wavecast/rng.hpp"
#include "wavecast/vf1.hpp"

namespace wavecast::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path out_dir(const RunConfig& cfg, const CommandOptions& opts) {
  const fs::path dir = opts.out ? *opts.out : cfg.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": " + ec.message());
  return dir;
}

void write_json(const fs::path& path, const json& j) { vf1::write_text(path, j.dump(2) + "\n"); }

std::string case_id(const std::string& split, std::uint64_t index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s_%05llu", split.c_str(), static_cast<unsigned long long>(index));
  return buf;
}

struct Split {
  std::vector<synthgen::SequenceSample> sequences;
  std::vector<train::Sample> samples;
};

Split load(const RunConfig& cfg, const std::string& split) {
  Split s;
  s.sequences = synthgen::load_split(cfg.data_dir, split);
  for (const auto& q : s.sequences) {
    s.samples.push_back(train::sample_from_frames(q.frames, cfg.train.history));
    if (s.samples.back().target.grid().rank() != static_cast<int>(cfg.dataset.dims.size())) {
      throw FormatError(cfg.data_dir.string() + ": dataset rank does not match the configuration");
    }
  }
  return s;
}

model::EncoderParams load_params(const fs::path& path, const RunConfig& cfg, int rank) {
  auto st = train::load_checkpoint(path);
  const model::EncoderShape want{rank, cfg.train.history, cfg.train.channels};
  if (!(st.params.shape() == want)) {
    throw ConfigError(path.string() + ": checkpoint shape does not match model.channels / model.history");
  }
  return st.params;
}

struct Evaluation {
  std::vector<report::CaseRow> rows;  // model rows then baseline rows, each in sample order
  std::vector<double> model_sweep, baseline_sweep;
  metrics::ErrorHistogram histogram;
};

Evaluation evaluate(const RunConfig& cfg, const Split& split, const std::string& split_name,
                    const model::EncoderParams* params, bool identity, const physics::EvolutionConfig& evo) {
  const auto n = split.samples.size();
  std::vector<report::CaseRow> model_rows(n), base_rows(n);
  std::vector<std::vector<double>> model_d(n), base_d(n), errors(n);
  const std::string method = identity ? "identity" : "wavecast";
  parallel_for(n, [&](std::size_t i) {
    const auto& s = split.samples[i];
    const auto id = case_id(split_name, split.sequences[i].sample_index);
    const RealField pred = identity ? s.target : model::forecast(s.history, *params, evo, cfg.train.epsilon).x_hat;
    const RealField base = model::persistence_baseline(s.history);
    model_rows[i] = report::evaluate_case(method, id, pred, s.target, cfg.eval);
    base_rows[i] = report::evaluate_case("persistence", id, base, s.target, cfg.eval);
    model_d[i] = metrics::dice_sweep(pred, s.target, cfg.tau_sweep).dice;
    base_d[i] = metrics::dice_sweep(base, s.target, cfg.tau_sweep).dice;
    errors[i].resize(pred.size());
    for (std::size_t k = 0; k < pred.size(); ++k) errors[i][k] = pred[k] - s.target[k];
  });
  Evaluation ev;
  ev.rows = model_rows;
  ev.rows.insert(ev.rows.end(), base_rows.begin(), base_rows.end());
  ev.model_sweep.assign(cfg.tau_sweep.size(), 0.0);
  ev.baseline_sweep.assign(cfg.tau_sweep.size(), 0.0);
  std::vector<double> pooled;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < cfg.tau_sweep.size(); ++k) {
      ev.model_sweep[k] += model_d[i][k] / static_cast<double>(n);
      ev.baseline_sweep[k] += base_d[i][k] / static_cast<double>(n);
    }
    pooled.insert(pooled.end(), errors[i].begin(), errors[i].end());
  }
  ev.histogram = metrics::error_histogram(pooled, cfg.histogram_bins);
  return ev;
}

json sweep_summary(const std::vector<double>& taus, const std::vector<double>& curve) {
  std::size_t peak = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i] > curve[peak]) peak = i;
  }
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && curve[lo - 1] >= 0.99 * curve[peak]) --lo;
  while (hi + 1 < curve.size() && curve[hi + 1] >= 0.99 * curve[peak]) ++hi;
  return {{"taus", taus},
          {"mean_dice", curve},
          {"peak_tau", taus[peak]},
          {"peak_dice", curve[peak]},
          {"plateau", {taus[lo], taus[hi]}}};
}

void write_evaluation(const RunConfig& cfg, const fs::path& dir, const Evaluation& ev, const std::string& split,
                      std::ostream& log) {
  vf1::write_text(dir / "report.csv", report::to_csv(ev.rows));
  json j;
  j["split"] = split;
  j["aggregate"] = report::aggregate(ev.rows);
  const auto method = ev.rows.front().method;
  j["dice_sweep"] = {{method, sweep_summary(cfg.tau_sweep, ev.model_sweep)},
                     {"persistence", sweep_summary(cfg.tau_sweep, ev.baseline_sweep)}};
  j["error_histogram"] = {{"lo", ev.histogram.lo},
                          {"hi", ev.histogram.hi},
                          {"counts", ev.histogram.counts},
                          {"mean", ev.histogram.mean},
                          {"sd", ev.histogram.sd}};
  write_json(dir / "report.json", j);
  if (cfg.plots) {
    vf1::write_text(dir / "dice_sweep.svg",
                    svg_line_chart("Dice vs threshold", "threshold", "mean Dice",
                                   {{method, cfg.tau_sweep, ev.model_sweep},
                                    {"persistence", cfg.tau_sweep, ev.baseline_sweep}}));
    vf1::write_text(dir / "error_histogram.svg",
                    svg_histogram("Voxelwise error (" + method + ")", "prediction - truth", ev.histogram.lo,
                                  ev.histogram.hi, ev.histogram.counts));
  }
  const auto& agg = j["aggregate"];
  for (const auto& [m, v] : agg.items()) {
    log << m << ": ssim " << v["mean"]["ssim"] << ", dice " << v["mean"]["dice"] << ", mse " << v["mean"]["mse"]
        << "\n";
  }
  log << "wrote " << (dir / "report.csv").string() << "\n";
}

}  // namespace

int cmd_gen(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const fs::path dir = opts.out ? *opts.out : cfg.data_dir;
  const auto manifest = synthgen::build_dataset(cfg.dataset, dir);
  log << "generated " << manifest["n_train"] << " train / " << manifest["n_test"] << " test samples\n";
  log << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const auto data = load(cfg, "train");
  const int rank = static_cast<int>(cfg.dataset.dims.size());
  auto state = opts.resume ? train::load_checkpoint(*opts.resume) : train::initial_state(rank, cfg.train);
  if (!(state.params.shape() == model::EncoderShape{rank, cfg.train.history, cfg.train.channels})) {
    throw ConfigError("resume checkpoint shape does not match the model section");
  }
  const auto dir = out_dir(cfg, opts);
  train::TrainHooks hooks;
  hooks.checkpoint_dir = dir / "checkpoints";
  fs::create_directories(hooks.checkpoint_dir);
  hooks.on_epoch = [&](const train::TrainState& s) {
    const auto& e = s.curve.back();
    log << "epoch " << e.epoch << "/" << cfg.train.epochs << " loss " << e.mean_total << " mse " << e.mean_mse
        << "\n";
  };
  state = train::train(data.samples, cfg.train, std::move(state), hooks);
  train::save_checkpoint(state, dir / "final.ckpt");
  train::write_loss_curve(dir / "loss_curve.csv", state.curve);
  if (cfg.plots) {
    Series s{"train", {}, {}};
    for (const auto& e : state.curve) {
      s.x.push_back(e.epoch);
      s.y.push_back(e.mean_total);
    }
    vf1::write_text(dir / "loss_curve.svg", svg_line_chart("Training loss", "epoch", "mean loss", {s}));
  }
  json summary{{"config", to_json(cfg)},
               {"epochs_done", state.epochs_done},
               {"parameter_count", state.params.parameter_count()},
               {"final_loss", state.curve.empty() ? json(nullptr) : json(state.curve.back().mean_total)}};
  if (cfg.dataset.n_test > 0) {
    const auto held = load(cfg, "test");
    const auto ev = evaluate(cfg, held, "test", &state.params, false, cfg.train.evolution());
    summary["test"] = report::aggregate(ev.rows);
  }
  write_json(dir / "train_summary.json", summary);
  log << "wrote " << (dir / "final.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  if (!opts.identity && opts.checkpoints.size() != 1) {
    throw ConfigError("eval needs exactly one --checkpoint (or --identity)");
  }
  const auto split = load(cfg, opts.split);
  const int rank = static_cast<int>(cfg.dataset.dims.size());
  model::EncoderParams params;
  if (!opts.identity) params = load_params(opts.checkpoints.front(), cfg, rank);
  const auto dir = out_dir(cfg, opts);
  const auto ev = evaluate(cfg, split, opts.split, &params, opts.identity, cfg.train.evolution());
  write_evaluation(cfg, dir, ev, opts.split, log);
  return kExitOk;
}

std::vector<std::string> sweep_columns() {
  std::vector<std::string> cols{"unroll"};
  for (const auto& c : report::metric_columns()) cols.push_back(c);
  cols.push_back("latency_ms");
  cols.push_back("throughput_per_s");
  return cols;
}

int cmd_sweep_unroll(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const bool use_checkpoints = !opts.checkpoints.empty();
  if (use_checkpoints && opts.checkpoints.size() != cfg.sweep_unroll.size()) {
    throw ConfigError("sweep-unroll needs one --checkpoint per entry of sweep.unroll");
  }
  if (!use_checkpoints && !cfg.sweep_retrain) {
    throw ConfigError("sweep-unroll needs --checkpoint files or sweep.retrain = true");
  }
  const int rank = static_cast<int>(cfg.dataset.dims.size());
  const auto test = load(cfg, opts.split);
  const auto train_data = use_checkpoints ? Split{} : load(cfg, "train");
  const auto dir = out_dir(cfg, opts);

  std::string csv;
  for (const auto& c : sweep_columns()) csv += (csv.empty() ? "" : ",") + c;
  csv += "\n";
  json rows = json::array();
  Series latency{"latency", {}, {}}, ssim{"ssim", {}, {}}, dice{"dice", {}, {}};
  const auto cols = report::metric_columns();
  for (std::size_t k = 0; k < cfg.sweep_unroll.size(); ++k) {
    const int n = cfg.sweep_unroll[k];
    auto tc = cfg.train;
    tc.unroll = n;
    model::EncoderParams params;
    if (use_checkpoints) {
      params = load_params(opts.checkpoints[k], cfg, rank);
    } else {
      log << "training N=" << n << "\n";
      const auto st = train::train(train_data.samples, tc, train::initial_state(rank, tc));
      params = st.params;
      train::save_checkpoint(st, dir / ("unroll_" + std::to_string(n) + ".ckpt"));
    }
    const auto evo = tc.evolution();
    const auto ev = evaluate(cfg, test, opts.split, &params, false, evo);
    const auto agg = report::aggregate(ev.rows)["wavecast"]["mean"];
    const auto& probe = test.samples.front();
    const auto prof = metrics::profile([&] { (void)model::forecast(probe.history, params, evo, tc.epsilon); },
                                       cfg.profile_warmup, cfg.profile_runs);
    json row{{"unroll", n}};
    std::string line = std::to_string(n);
    for (const auto& c : cols) {
      const double v = agg[c].is_null() ? std::nan("") : agg[c].get<double>();
      row[c] = agg[c];
      line += "," + report::format_number(v);
    }
    row["latency_ms"] = prof.latency_ms_mean;
    row["latency_sd_ms"] = prof.latency_ms_sd;
    row["throughput_per_s"] = prof.throughput_per_s;
    line += "," + report::format_number(prof.latency_ms_mean) + "," + report::format_number(prof.throughput_per_s);
    csv += line + "\n";
    rows.push_back(row);
    latency.x.push_back(n);
    latency.y.push_back(prof.latency_ms_mean);
    ssim.x.push_back(n);
    ssim.y.push_back(agg["ssim"].is_null() ? std::nan("") : agg["ssim"].get<double>());
    dice.x.push_back(n);
    dice.y.push_back(agg["dice"].is_null() ? std::nan("") : agg["dice"].get<double>());
    log << "N=" << n << " ssim " << agg["ssim"] << " dice " << agg["dice"] << " latency " << prof.latency_ms_mean
        << " ms\n";
  }
  vf1::write_text(dir / "sweep.csv", csv);
  json out{{"rows", rows}, {"split", opts.split}};
  if (const auto rss = metrics::peak_rss_mib()) out["peak_rss_mib"] = *rss;
  write_json(dir / "sweep.json", out);
  if (cfg.plots) {
    vf1::write_text(dir / "sweep_latency.svg", svg_line_chart("Latency vs unroll", "N", "ms", {latency}));
    vf1::write_text(dir / "sweep_accuracy.svg", svg_line_chart("Accuracy vs unroll", "N", "mean", {ssim, dice}));
  }
  log << "wrote " << (dir / "sweep.csv").string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const auto dir = out_dir(cfg, opts);
  const auto rep = autodiff::gradcheck(cfg.gradcheck);
  write_json(dir / "gradcheck.json", rep.to_json(cfg.gradcheck));
  for (const auto& t : rep.tensors) {
    log << (t.passed ? "ok   " : "FAIL ") << t.name << " max_rel_err " << t.max_rel_err << " (" << t.checked
        << " checked)\n";
  }
  log << (rep.passed ? "gradcheck passed" : "gradcheck FAILED") << "\n";
  return rep.passed ? kExitOk : kExitVerification;
}

namespace {

std::pair<ComplexField, RealField> oracle_instance(const RunConfig& cfg, int i) {
  const GridSpec g(cfg.oracle_dims);
  rng::CounterStream s(cfg.oracle_seed, rng::Purpose::Check, static_cast<std::uint64_t>(i));
  ComplexField psi(g);
  RealField v(g);
  for (auto& z : psi.values()) z = Complex(s.uniform(-1, 1), s.uniform(-1, 1));
  for (auto& x : v.values()) x = s.uniform(-1, 1);
  return {psi, v};
}

double max_abs_diff(const ComplexField& a, const ComplexField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

int cmd_oracle(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const auto dir = out_dir(cfg, opts);
  const GridSpec g(cfg.oracle_dims);
  json cases = json::array();
  bool unitary = true, bounded = true;
  for (int i = 0; i < cfg.oracle_instances; ++i) {
    const auto [psi, v] = oracle_instance(cfg, i);
    const double n0 = l2_norm(psi);
    const double cn_drift = std::abs(l2_norm(physics::crank_nicolson_reference(psi, v, 0.02, 100)) / n0 - 1.0);
    physics::EvolutionConfig evo;
    evo.unroll_steps = 50;
    const auto ev = physics::evolve(psi, v, evo);
    const double pc_drift = std::abs(ev.norm_trace.back() / n0 - 1.0);
    double vmax = 0.0;
    for (double x : v.values()) vmax = std::max(vmax, std::abs(x));
    const double bound = physics::norm_drift_bound(vmax, g, 0.02, 50);
    unitary = unitary && cn_drift < 1e-10;
    bounded = bounded && pc_drift <= bound;
    cases.push_back({{"instance", i}, {"cn_norm_drift", cn_drift}, {"pc_norm_drift", pc_drift}, {"drift_bound", bound}});
  }

  const auto [psi, v] = oracle_instance(cfg, 0);
  std::vector<double> xs, ys;
  json order = json::array();
  for (int n : {10, 20, 40, 80}) {
    physics::EvolutionConfig evo;
    evo.unroll_steps = n;
    const double err = max_abs_diff(physics::evolve(psi, v, evo).psi,
                                    physics::crank_nicolson_reference(psi, v, 1.0 / n, n));
    xs.push_back(std::log(1.0 / n));
    ys.push_back(std::log(err));
    order.push_back({{"dt", 1.0 / n}, {"max_abs_err", err}});
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / static_cast<double>(xs.size());
    my += ys[i] / static_cast<double>(ys.size());
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  const bool order_ok = slope >= 1.7 && slope <= 2.3;

  const bool passed = unitary && bounded && order_ok;
  write_json(dir / "oracle.json", {{"passed", passed},
                                    {"cn_unitarity", {{"passed", unitary}, {"tol", 1e-10}, {"steps", 100}, {"dt", 0.02}}},
                                    {"drift_bound", {{"passed", bounded}, {"steps", 50}, {"dt", 0.02}}},
                                    {"order", {{"passed", order_ok}, {"slope", slope}, {"range", {1.7, 2.3}}, {"points", order}}},
                                    {"instances", cases},
                                    {"dims", cfg.oracle_dims},
                                    {"seed", cfg.oracle_seed}});
  log << "CN unitarity " << (unitary ? "ok" : "FAIL") << ", drift bound " << (bounded ? "ok" : "FAIL")
      << ", order slope " << slope << (order_ok ? " ok" : " FAIL") << "\n";
  return passed ? kExitOk : kExitVerification;
}

int cmd_interpret(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  if (opts.checkpoints.size() != 1) throw ConfigError("interpret needs exactly one --checkpoint");
  const auto split = load(cfg, opts.split);
  if (opts.sample >= split.samples.size()) {
    throw ConfigError("--sample " + std::to_string(opts.sample) + " is out of range for split \"" + opts.split +
                      "\" (" + std::to_string(split.samples.size()) + " samples)");
  }
  const int rank = static_cast<int>(cfg.dataset.dims.size());
  const auto params = load_params(opts.checkpoints.front(), cfg, rank);
  const auto dir = out_dir(cfg, opts);
  const auto& s = split.samples[opts.sample];
  const auto out = model::forecast(s.history, params, cfg.train.evolution(), cfg.train.epsilon);
  const auto& v = out.triplet.potential;
  RealField modulus(out.psi_final.grid());
  for (std::size_t i = 0; i < modulus.size(); ++i) modulus[i] = std::abs(out.psi_final[i]);
  const auto energy = physics::energy_density(out.psi_final, v);

  const std::string stem = case_id(opts.split, split.sequences[opts.sample].sample_index);
  vf1::write(dir / (stem + "_potential.vf1"), v);
  vf1::write(dir / (stem + "_psi_final.vf1"), out.psi_final);
  vf1::write(dir / (stem + "_energy.vf1"), energy);
  json panels = json::object();
  for (const auto& [name, field] : std::vector<std::pair<std::string, const RealField*>>{
           {"potential", &v}, {"psi_modulus", &modulus}, {"energy_density", &energy}}) {
    const auto slice = mid_slice(*field);
    vf1::write_text(dir / (stem + "_" + name + ".pgm"), pgm(slice));
    const auto [lo, hi] = std::minmax_element(slice.values().begin(), slice.values().end());
    panels[name] = {{"min", *lo}, {"max", *hi}, {"dims", slice.grid().dims()}};
  }
  write_json(dir / (stem + "_interpret.json"), {{"sample", stem}, {"panels", panels}, {"norm_trace", out.norm_trace}});
  log << "wrote mid-slice panels for " << stem << "\n";
  return kExitOk;
}

int cmd_profile(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const int rank = static_cast<int>(cfg.dataset.dims.size());
  model::EncoderParams params;
  if (opts.checkpoints.empty()) {
    params = train::initial_state(rank, cfg.train).params;
  } else {
    params = load_params(opts.checkpoints.front(), cfg, rank);
  }
  const auto seq = synthgen::gen_sequence(cfg.dataset.kind, cfg.dataset.seed, 0, cfg.dataset.dims);
  const auto sample = train::sample_from_frames(seq.frames, cfg.train.history);
  const auto dir = out_dir(cfg, opts);
  const auto evo = cfg.train.evolution();
  const auto p = metrics::profile([&] { (void)model::forecast(sample.history, params, evo, cfg.train.epsilon); },
                                  cfg.profile_warmup, cfg.profile_runs);
  json j{{"unroll", evo.unroll_steps},
         {"dims", cfg.dataset.dims},
         {"latency_ms_mean", p.latency_ms_mean},
         {"latency_ms_sd", p.latency_ms_sd},
         {"throughput_per_s", p.throughput_per_s},
         {"runs", p.runs},
         {"warmup", cfg.profile_warmup},
         {"threads", thread_count()}};
  if (const auto rss = metrics::peak_rss_mib()) j["peak_rss_mib"] = *rss;
  write_json(dir / "profile.json", j);
  log << "latency " << p.latency_ms_mean << " +- " << p.latency_ms_sd << " ms, throughput " << p.throughput_per_s
      << " /s\n";
  return kExitOk;
}

int run_command(const std::string& name, const RunConfig& cfg, const CommandOptions& opts, std::ostream& log,
                std::ostream& err) {
  static const std::map<std::string, int (*)(const RunConfig&, const CommandOptions&, std::ostream&)> table{
      {"gen", cmd_gen},           {"train", cmd_train},         {"eval", cmd_eval},
      {"sweep-unroll", cmd_sweep_unroll}, {"gradcheck", cmd_gradcheck}, {"oracle", cmd_oracle},
      {"interpret", cmd_interpret}, {"profile", cmd_profile}};
  const auto it = table.find(name);
  if (it == table.end()) {
    err << "error: unknown command \"" << name << "\"\n";
    return kExitConfig;
  }
  try {
    return it->second(cfg, opts, log);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CapabilityError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArgumentError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IntegrityError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace wavecast::cli
