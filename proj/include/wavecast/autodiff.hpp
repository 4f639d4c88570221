#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavecast/field.hpp"
#include "wavecast/model.hpp"
#include "wavecast/physics.hpp"

namespace wavecast::autodiff {

// Activations of one forward pass. The unrolled states are not stored: backward
// recomputes them from psi0.
struct Tape {
  std::vector<RealField> history;
  model::EncoderTrace encoder;
  ComplexField psi0;
  model::ForecastOutput output;
  physics::EvolutionConfig evolution;
  double epsilon = model::kDefaultEpsilon;
  std::size_t peak_index = 0;
  std::uint64_t params_fingerprint = 0;
};

Tape record_forward(std::span<const RealField> history, const model::EncoderParams& params,
                    const physics::EvolutionConfig& cfg, double epsilon = model::kDefaultEpsilon);

// Gradients share the parameter container: one tensor per parameter, same shapes.
using ParamGrads = model::EncoderParams;

// Test hook for mutation testing of the gradient checker.
enum class AdjointMutation { None, FlipConv2KernelSign };

struct BackwardOptions {
  double loss_scale = 1.0;
  AdjointMutation mutation = AdjointMutation::None;
};

struct BackwardResult {
  ParamGrads grads;
  model::LossValue loss;
};

BackwardResult backward(const Tape& tape, const model::EncoderParams& params, const RealField& x_true,
                        double lambda = model::kDefaultLambda, const BackwardOptions& options = {});

struct EvolutionAdjoint {
  ComplexField psi0_grad;
  RealField potential_grad;
};

// Pulls the gradient of psi_N back through N predictor-corrector steps.
// Gradients of complex fields use the convention dL/dRe + i dL/dIm.
EvolutionAdjoint evolve_adjoint(const ComplexField& psi0, const RealField& potential,
                                const physics::EvolutionConfig& cfg, const ComplexField& grad_final);

struct GradcheckConfig {
  std::vector<std::int64_t> dims{12, 12};
  int history = 3;
  int channels = 4;
  int unroll = 5;
  std::uint64_t seed = 1;
  double tol = 1e-5;
  double lambda = model::kDefaultLambda;
  double epsilon = model::kDefaultEpsilon;
  double relative_step = 1e-4;
  std::size_t subsample_above = 1000;
  double subsample_fraction = 0.05;
  int max_screen_attempts = 64;
  double screen_margin = 1e-3;
};

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_err = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<TensorCheck> tensors;
  bool passed = false;
  int screen_attempt = 0;
  bool screened_clean = false;
  double loss = 0.0;

  nlohmann::json to_json(const GradcheckConfig& cfg) const;
};

// Random instance, analytic backward against central differences on every parameter
// (or a seeded subsample above `subsample_above` parameters). Failures are reported.
GradcheckReport gradcheck(const GradcheckConfig& cfg, AdjointMutation mutation = AdjointMutation::None);

}  // namespace wavecast::autodiff
