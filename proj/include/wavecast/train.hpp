#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "wavecast/autodiff.hpp"
#include "wavecast/field.hpp"
#include "wavecast/model.hpp"

namespace wavecast::train {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamHyper&) const = default;
};

// Moments share the parameter container layout.
struct AdamState {
  AdamHyper hyper;
  std::int64_t t = 0;
  model::EncoderParams m, v;

  static AdamState fresh(const model::EncoderShape& shape, const AdamHyper& hyper);
  bool operator==(const AdamState&) const = default;
};

// Bias-corrected Adam. Parameters and both moments are rounded to f32 after the update
// so that a checkpoint (f32 payload) captures the state exactly.
void adam_step(model::EncoderParams& params, const autodiff::ParamGrads& grads, AdamState& state);

// Rounds every tensor to the nearest f32 value.
void round_to_f32(model::EncoderParams& params);

struct TrainConfig {
  int epochs = 1;
  int batch_size = 4;
  AdamHyper adam;
  double lambda_tv = model::kDefaultLambda;
  double epsilon = model::kDefaultEpsilon;
  int unroll = 20;
  std::optional<double> dt;  // defaults to 1 / unroll
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs; 0 disables periodic checkpoints
  int channels = model::kDefaultChannels;
  int history = model::kDefaultHistory;

  void validate() const;
  physics::EvolutionConfig evolution() const;
};

struct Sample {
  std::vector<RealField> history;
  RealField target;
};

// The last frame is the target and the `history` frames before it are the input.
Sample sample_from_frames(std::span<const RealField> frames, int history);

struct EpochStats {
  int epoch = 0;
  double mean_total = 0.0;
  double mean_mse = 0.0;
  double mean_tv = 0.0;
  double wall_seconds = 0.0;
};

struct TrainState {
  model::EncoderParams params;
  AdamState adam;
  int epochs_done = 0;
  std::vector<EpochStats> curve;
};

struct TrainHooks {
  // Called after every epoch with the updated state.
  std::function<void(const TrainState&)> on_epoch;
  // Periodic checkpoints land here as epoch_XXXX.ckpt; the last-good state is written
  // to last_good.ckpt before a non-finite loss aborts the run.
  std::filesystem::path checkpoint_dir;
};

// f32-rounded He-uniform initialization from the Init stream of cfg.seed.
TrainState initial_state(int rank, const TrainConfig& cfg);

// Sample order for one epoch: a permutation drawn from the Shuffle stream of (seed, epoch).
std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n);

// Mean gradient and mean loss of one batch. Samples run concurrently; accumulation is in
// batch order.
autodiff::BackwardResult batch_gradient(std::span<const Sample> data, std::span<const std::size_t> batch,
                                        const model::EncoderParams& params, const TrainConfig& cfg);

// Runs epochs state.epochs_done + 1 .. cfg.epochs.
TrainState train(std::span<const Sample> data, const TrainConfig& cfg, TrainState state,
                 const TrainHooks& hooks = {});

void write_loss_curve(const std::filesystem::path& path, std::span<const EpochStats> curve);

// Checkpoint file: "WVCK", u32 header length, JSON header (shape, optimizer state, curve,
// tensor table with offsets), then the f32 little-endian payload.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace wavecast::train
