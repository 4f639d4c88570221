#include "wavecast/train.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "wavecast/errors.hpp"
#include "wavecast/parallel.hpp"
#include "wavecast/rng.hpp"
#include "wavecast/vf1.hpp"

namespace wavecast::train {

using model::EncoderParams;

AdamState AdamState::fresh(const model::EncoderShape& shape, const AdamHyper& hyper) {
  return AdamState{hyper, 0, EncoderParams(shape), EncoderParams(shape)};
}

void round_to_f32(EncoderParams& params) {
  for (auto id : model::all_param_ids()) {
    for (auto& v : params.tensor(id)) v = static_cast<double>(static_cast<float>(v));
  }
}

void adam_step(EncoderParams& params, const autodiff::ParamGrads& grads, AdamState& state) {
  if (!(grads.shape() == params.shape()) || !(state.m.shape() == params.shape()) ||
      !(state.v.shape() == params.shape())) {
    throw ArgumentError("adam_step: parameter, gradient and moment shapes differ");
  }
  const auto& h = state.hyper;
  state.t += 1;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (auto id : model::all_param_ids()) {
    auto p = params.tensor(id);
    const auto g = grads.tensor(id);
    auto m = state.m.tensor(id);
    auto v = state.v.tensor(id);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double step = h.lr * (mi / c1) / (std::sqrt(vi / c2) + h.eps);
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      p[i] = static_cast<float>(p[i] - step);
    }
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(adam.lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
  if (!(lambda_tv >= 0.0)) throw ConfigError("train.lambda_tv must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("model.epsilon must be > 0");
  if (unroll < 1) throw ConfigError("evolution.unroll must be >= 1");
  if (dt && !(*dt > 0.0)) throw ConfigError("evolution.dt must be > 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  if (channels < 1) throw ConfigError("model.channels must be >= 1");
  if (history < 1) throw ConfigError("model.history must be >= 1");
}

Sample sample_from_frames(std::span<const RealField> frames, int history) {
  if (history < 1 || frames.size() < static_cast<std::size_t>(history) + 1) {
    throw ArgumentError("sequence of " + std::to_string(frames.size()) + " frames cannot supply " +
                        std::to_string(history) + " history frames and a target");
  }
  const auto first = frames.size() - 1 - static_cast<std::size_t>(history);
  Sample s;
  s.history.assign(frames.begin() + static_cast<std::ptrdiff_t>(first), frames.end() - 1);
  s.target = frames.back();
  return s;
}

physics::EvolutionConfig TrainConfig::evolution() const {
  physics::EvolutionConfig e;
  e.unroll_steps = unroll;
  e.dt = dt;
  return e;
}

TrainState initial_state(int rank, const TrainConfig& cfg) {
  const model::EncoderShape shape{rank, cfg.history, cfg.channels};
  TrainState s;
  s.params = EncoderParams::initialized(shape, cfg.seed);
  round_to_f32(s.params);
  s.adam = AdamState::fresh(shape, cfg.adam);
  return s;
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n) {
  rng::CounterStream stream(seed, rng::Purpose::Shuffle, static_cast<std::uint64_t>(epoch));
  return rng::permutation(stream, n);
}

autodiff::BackwardResult batch_gradient(std::span<const Sample> data, std::span<const std::size_t> batch,
                                        const EncoderParams& params, const TrainConfig& cfg) {
  const auto evo = cfg.evolution();
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<autodiff::BackwardResult> parts(batch.size());
  parallel_for(batch.size(), [&](std::size_t b) {
    const auto& s = data[batch[b]];
    const auto tape = autodiff::record_forward(s.history, params, evo, cfg.epsilon);
    parts[b] = autodiff::backward(tape, params, s.target, cfg.lambda_tv, {scale, autodiff::AdjointMutation::None});
  });

  autodiff::BackwardResult total{EncoderParams(params.shape()), {}};
  for (const auto& part : parts) {
    for (auto id : model::all_param_ids()) {
      auto acc = total.grads.tensor(id);
      const auto g = part.grads.tensor(id);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
    }
    // Per-sample losses already carry the 1/B scale.
    total.loss.total += part.loss.total;
    total.loss.mse += part.loss.mse;
    total.loss.tv += part.loss.tv;
  }
  return total;
}

namespace {

std::filesystem::path epoch_checkpoint(const std::filesystem::path& dir, int epoch) {
  std::ostringstream name;
  name << "epoch_";
  name.width(4);
  name.fill('0');
  name << epoch << ".ckpt";
  return dir / name.str();
}

}  // namespace

TrainState train(std::span<const Sample> data, const TrainConfig& cfg, TrainState state, const TrainHooks& hooks) {
  cfg.validate();
  if (data.empty()) throw ArgumentError("train: empty dataset");
  const auto& grid = data.front().target.grid();
  for (const auto& s : data) {
    if (s.target.grid() != grid || s.history.size() != static_cast<std::size_t>(cfg.history)) {
      throw ArgumentError("train: samples must share one grid and carry " + std::to_string(cfg.history) +
                          " history frames");
    }
  }
  if (!(state.params.shape() == model::EncoderShape{grid.rank(), cfg.history, cfg.channels})) {
    throw ArgumentError("train: parameter shape does not match the configuration");
  }
  state.adam.hyper = cfg.adam;

  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = state.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto order = epoch_order(cfg.seed, epoch, data.size());
    double sum_total = 0.0, sum_mse = 0.0, sum_tv = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const auto idx = std::span<const std::size_t>(order).subspan(b0, std::min(batch, order.size() - b0));
      const std::string where = "epoch " + std::to_string(epoch) + ", batch at position " + std::to_string(b0);
      autodiff::BackwardResult res;
      try {
        res = batch_gradient(data, idx, state.params, cfg);
      } catch (const NumericError& e) {
        if (!hooks.checkpoint_dir.empty()) save_checkpoint(state, hooks.checkpoint_dir / "last_good.ckpt");
        throw NumericError(where + ": " + e.what());
      }
      if (!std::isfinite(res.loss.total) || !res.grads.all_finite()) {
        if (!hooks.checkpoint_dir.empty()) save_checkpoint(state, hooks.checkpoint_dir / "last_good.ckpt");
        throw NumericError(where + ": non-finite loss or gradient");
      }
      const auto n = static_cast<double>(idx.size());
      sum_total += res.loss.total * n;
      sum_mse += res.loss.mse * n;
      sum_tv += res.loss.tv * n;
      adam_step(state.params, res.grads, state.adam);
    }
    const auto count = static_cast<double>(data.size());
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    state.curve.push_back({epoch, sum_total / count, sum_mse / count, sum_tv / count, wall});
    state.epochs_done = epoch;
    if (!hooks.checkpoint_dir.empty() && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      save_checkpoint(state, epoch_checkpoint(hooks.checkpoint_dir, epoch));
    }
    if (hooks.on_epoch) hooks.on_epoch(state);
  }
  return state;
}

void write_loss_curve(const std::filesystem::path& path, std::span<const EpochStats> curve) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,mean_total,mean_mse,mean_tv,wall_seconds\n";
  for (const auto& e : curve) {
    out << e.epoch << ',' << e.mean_total << ',' << e.mean_mse << ',' << e.mean_tv << ',' << e.wall_seconds << '\n';
  }
  vf1::write_text(path, out.str());
}

}  // namespace wavecast::train
