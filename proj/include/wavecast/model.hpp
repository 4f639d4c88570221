#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "wavecast/field.hpp"
#include "wavecast/physics.hpp"

namespace wavecast::model {

inline constexpr double kDefaultEpsilon = 1e-8;
inline constexpr double kDefaultLambda = 1e-4;
inline constexpr int kDefaultChannels = 8;
inline constexpr int kDefaultHistory = 5;
inline constexpr int kKernelExtent = 3;

struct EncoderShape {
  int rank = 2;
  int history = kDefaultHistory;
  int channels = kDefaultChannels;

  // Spatial taps of a 3^rank kernel.
  int taps() const { return rank == 3 ? 27 : 9; }
  bool operator==(const EncoderShape&) const = default;
};

enum class ParamId : std::size_t {
  Conv1Weight,
  Conv1Bias,
  Conv2Weight,
  Conv2Bias,
  HeadAWeight,
  HeadABias,
  HeadPhiWeight,
  HeadPhiBias,
  HeadVWeight,
  HeadVBias,
};
inline constexpr std::size_t kParamTensorCount = 10;

std::array<ParamId, kParamTensorCount> all_param_ids();
std::string_view param_name(ParamId id);

// Trainable tensors of the two-layer periodic encoder and its three 1x1 heads.
// Conv weights are laid out [out][in][tap], taps row-major over the 3^rank offsets.
class EncoderParams {
 public:
  EncoderParams() = default;
  explicit EncoderParams(EncoderShape shape);  // all zeros
  // He-uniform convolution weights from the Init stream of `seed`, zero conv biases,
  // small positive amplitude bias so the amplitude head starts active.
  static EncoderParams initialized(EncoderShape shape, std::uint64_t seed);

  const EncoderShape& shape() const { return shape_; }
  std::span<double> tensor(ParamId id) { return tensors_[static_cast<std::size_t>(id)]; }
  std::span<const double> tensor(ParamId id) const { return tensors_[static_cast<std::size_t>(id)]; }
  std::vector<std::int64_t> tensor_shape(ParamId id) const;
  std::size_t parameter_count() const;
  bool all_finite() const;
  // FNV-1a over the raw parameter bytes; tapes use it to detect stale parameters.
  std::uint64_t fingerprint() const;

  bool operator==(const EncoderParams&) const = default;

 private:
  EncoderShape shape_;
  std::array<std::vector<double>, kParamTensorCount> tensors_;
};

struct RawHeads {
  RealField a, phi, v;
};

struct FieldTriplet {
  RealField amplitude;  // >= 0
  RealField phase;      // in [-pi, pi]
  RealField potential;  // in [-1, 1]
};

// Every intermediate of the encoder, kept for the backward pass.
struct EncoderTrace {
  std::vector<RealField> pre1, post1, pre2, post2;
  RawHeads raw;
};

struct ForecastOutput {
  RealField x_hat;
  ComplexField psi_final;
  FieldTriplet triplet;
  std::vector<double> norm_trace;
};

struct LossValue {
  double total = 0.0;
  double mse = 0.0;
  double tv = 0.0;
};

// Periodic 3^rank convolution: out[o][x] = b[o] + sum_{i,tap} w[o][i][tap] * in[i][x + off(tap)].
std::vector<RealField> conv_periodic(std::span<const RealField> inputs, std::span<const double> weights,
                                     std::span<const double> bias, int out_channels);
// out[c][x] += sum over (tap, j) of w * in[j][x + off(tap)], per voxel in (tap, j) order, with w = weights[c][j][tap].
// Transposed: w = weights[j][c][tap] and the source is in[j][x - off(tap)].
void conv_accumulate(std::span<const RealField> in, std::span<RealField> out, std::span<const double> weights,
                     bool transposed);
// grad_w[o][i][tap] += sum over x in flat order of grad_out[o][x] * in[i][x + off(tap)].
void conv_kernel_grad(std::span<const RealField> in, std::span<const RealField> grad_out, std::span<double> grad_w);
// Per-axis offsets of each tap; offsets[tap * rank + axis] in {-1, 0, 1}.
std::vector<std::int64_t> tap_offsets(int rank);

RawHeads encoder_forward(std::span<const RealField> history, const EncoderParams& params);
EncoderTrace encoder_forward_traced(std::span<const RealField> history, const EncoderParams& params);

FieldTriplet assemble_triplet(const RawHeads& raw);
ComplexField assemble_psi(const FieldTriplet& t);

// |psi|^2 / (max |psi|^2 + epsilon).
RealField reconstruct_intensity(const ComplexField& psi, double epsilon = kDefaultEpsilon);

// Mean over voxels of sum_axes |x - roll(x, axis, 1)|.
double tv_penalty(const RealField& x);

LossValue loss(const RealField& x_hat, const RealField& x_true, double lambda = kDefaultLambda);

ForecastOutput forecast(std::span<const RealField> history, const EncoderParams& params,
                        const physics::EvolutionConfig& cfg, double epsilon = kDefaultEpsilon);

RealField persistence_baseline(std::span<const RealField> history);

}  // namespace wavecast::model
