#include "wavecast/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "wavecast/errors.hpp"
#include "wavecast/rng.hpp"

namespace wavecast::autodiff {

using model::EncoderParams;
using model::ParamId;

namespace {

inline Complex i_times(double c, const Complex& z) { return {-c * z.imag(), c * z.real()}; }

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_finite(const RealField& f, const char* stage) {
  if (!all_finite(f)) throw NumericError(std::string("backward: non-finite gradient in stage ") + stage);
}

void require_finite(const ComplexField& f, const char* stage) {
  if (!all_finite(f)) throw NumericError(std::string("backward: non-finite gradient in stage ") + stage);
}

// dL/dx_hat for L = mean((x_hat - x)^2) + lambda * tv(x_hat).
RealField loss_adjoint(const RealField& x_hat, const RealField& x_true, double lambda, double scale) {
  const auto& g = x_hat.grid();
  const double inv_m = 1.0 / static_cast<double>(x_hat.size());
  RealField grad(g);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = 2.0 * (x_hat[i] - x_true[i]) * inv_m;
  if (lambda != 0.0) {
    for (int axis = 0; axis < g.rank(); ++axis) {
      const RealField prev = roll(x_hat, axis, 1);   // x[i - e]
      const RealField next = roll(x_hat, axis, -1);  // x[i + e]
      for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] += lambda * inv_m * (sign(x_hat[i] - prev[i]) - sign(next[i] - x_hat[i]));
      }
    }
  }
  if (scale != 1.0) {
    for (auto& v : grad.values()) v *= scale;
  }
  return grad;
}

// Adjoint of the periodic convolution. Accumulates kernel/bias gradients and, when
// requested, the gradient with respect to the inputs.
void conv_backward(std::span<const RealField> inputs, std::span<const double> weights,
                   std::span<const RealField> grad_out, std::span<double> grad_w, std::span<double> grad_b,
                   std::vector<RealField>* grad_in) {
  const auto& grid = inputs.front().grid();
  const auto cin = inputs.size();
  const auto cout = grad_out.size();

  for (std::size_t o = 0; o < cout; ++o) {
    double s = 0.0;
    for (double v : grad_out[o].values()) s += v;
    grad_b[o] += s;
  }

  if (grad_in) {
    grad_in->clear();
    for (std::size_t i = 0; i < cin; ++i) grad_in->emplace_back(grid);
  }

  model::conv_kernel_grad(inputs, grad_out, grad_w);
  if (grad_in) model::conv_accumulate(grad_out, *grad_in, weights, true);
}

RealField relu_mask(const RealField& grad, const RealField& pre) {
  RealField out(grad.grid());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pre[i] > 0.0 ? grad[i] : 0.0;
  return out;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

Tape record_forward(std::span<const RealField> history, const EncoderParams& params,
                    const physics::EvolutionConfig& cfg, double epsilon) {
  Tape tape;
  tape.history.assign(history.begin(), history.end());
  tape.encoder = model::encoder_forward_traced(history, params);
  tape.output.triplet = model::assemble_triplet(tape.encoder.raw);
  tape.psi0 = model::assemble_psi(tape.output.triplet);
  auto ev = physics::evolve(tape.psi0, tape.output.triplet.potential, cfg);
  tape.output.psi_final = std::move(ev.psi);
  tape.output.norm_trace = std::move(ev.norm_trace);
  tape.output.x_hat = model::reconstruct_intensity(tape.output.psi_final, epsilon);
  tape.evolution = cfg;
  tape.epsilon = epsilon;
  const RealField p = squared_modulus(tape.output.psi_final);
  tape.peak_index =
      static_cast<std::size_t>(std::max_element(p.values().begin(), p.values().end()) - p.values().begin());
  tape.params_fingerprint = params.fingerprint();
  return tape;
}

EvolutionAdjoint evolve_adjoint(const ComplexField& psi0, const RealField& potential,
                                const physics::EvolutionConfig& cfg, const ComplexField& grad_final) {
  cfg.validate();
  require_same_grid(psi0.grid(), potential.grid(), "evolve_adjoint");
  require_same_grid(psi0.grid(), grad_final.grid(), "evolve_adjoint");
  const int n_steps = cfg.unroll_steps;
  const double dt = cfg.step();
  const auto m = psi0.size();

  // sqrt(N) checkpoints, then each segment is replayed once more during the sweep.
  const int segment = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_steps)))));
  std::vector<ComplexField> checkpoints;
  {
    ComplexField psi = psi0;
    for (int n = 0; n < n_steps; ++n) {
      if (n % segment == 0) checkpoints.push_back(psi);
      psi = physics::step_predictor_corrector(psi, potential, dt);
    }
  }

  EvolutionAdjoint adj{grad_final, RealField(potential.grid())};
  ComplexField& g = adj.psi0_grad;
  std::vector<ComplexField> states;
  for (int seg = static_cast<int>(checkpoints.size()) - 1; seg >= 0; --seg) {
    const int begin = seg * segment;
    const int end = std::min(n_steps, begin + segment);
    states.clear();
    states.push_back(checkpoints[static_cast<std::size_t>(seg)]);
    for (int n = begin + 1; n < end; ++n) {
      states.push_back(physics::step_predictor_corrector(states.back(), potential, dt));
    }
    for (int n = end - 1; n >= begin; --n) {
      const ComplexField& psi = states[static_cast<std::size_t>(n - begin)];
      const ComplexField h_psi = physics::apply_hamiltonian(psi, potential);
      const ComplexField h_g = physics::apply_hamiltonian(g, potential);
      // Potential pathway of psi' = psi - i dt H psi - dt^2/2 H^2 psi.
      for (std::size_t j = 0; j < m; ++j) {
        const Complex gj = std::conj(g[j]);
        const double first = (gj * Complex(dt * psi[j].imag(), -dt * psi[j].real())).real();
        const double second = (std::conj(h_g[j]) * psi[j] + gj * h_psi[j]).real();
        adj.potential_grad[j] += first - 0.5 * dt * dt * second;
      }
      // psi pathway: S^H g = g + i dt H (g + i dt/2 H g).
      ComplexField mid(g.grid());
      for (std::size_t j = 0; j < m; ++j) mid[j] = g[j] + i_times(0.5 * dt, h_g[j]);
      const ComplexField h_mid = physics::apply_hamiltonian(mid, potential);
      for (std::size_t j = 0; j < m; ++j) g[j] += i_times(dt, h_mid[j]);
    }
  }
  return adj;
}

BackwardResult backward(const Tape& tape, const EncoderParams& params, const RealField& x_true, double lambda,
                        const BackwardOptions& options) {
  if (tape.params_fingerprint != params.fingerprint()) {
    throw IntegrityError("backward: tape was recorded with different parameters");
  }
  const auto& out = tape.output;
  require_same_grid(out.x_hat.grid(), x_true.grid(), "backward");
  const auto& grid = out.x_hat.grid();
  const std::size_t m = grid.size();

  BackwardResult result{ParamGrads(params.shape()), model::loss(out.x_hat, x_true, lambda)};
  if (options.loss_scale != 1.0) {
    result.loss.total *= options.loss_scale;
    result.loss.mse *= options.loss_scale;
    result.loss.tv *= options.loss_scale;
  }

  // Loss and normalization quotient, with the max treated as a fixed voxel.
  const RealField g_xhat = loss_adjoint(out.x_hat, x_true, lambda, options.loss_scale);
  const RealField p = squared_modulus(out.psi_final);
  const double denom = p[tape.peak_index] + tape.epsilon;
  RealField g_p(grid);
  double through_peak = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    g_p[i] = g_xhat[i] / denom;
    through_peak += g_xhat[i] * p[i];
  }
  g_p[tape.peak_index] -= through_peak / (denom * denom);
  require_finite(g_p, "normalization");

  // |psi|^2.
  ComplexField g_psi(grid);
  for (std::size_t i = 0; i < m; ++i) g_psi[i] = 2.0 * g_p[i] * out.psi_final[i];

  const auto& tri = out.triplet;
  auto adj = evolve_adjoint(tape.psi0, tri.potential, tape.evolution, g_psi);
  require_finite(adj.psi0_grad, "evolution");
  require_finite(adj.potential_grad, "evolution");

  // Polar assembly and head nonlinearities.
  const auto& raw = tape.encoder.raw;
  RealField g_araw(grid), g_phiraw(grid), g_vraw(grid);
  for (std::size_t i = 0; i < m; ++i) {
    const Complex rot(std::cos(tri.phase[i]), std::sin(tri.phase[i]));
    const Complex gc = std::conj(adj.psi0_grad[i]);
    const double g_a = (gc * rot).real();
    const double g_phase = (gc * Complex(0.0, tri.amplitude[i]) * rot).real();
    g_araw[i] = raw.a[i] > 0.0 ? g_a : 0.0;
    const double th = tri.phase[i] / std::numbers::pi;
    g_phiraw[i] = g_phase * std::numbers::pi * (1.0 - th * th);
    const double tv = tri.potential[i];
    g_vraw[i] = adj.potential_grad[i] * (1.0 - tv * tv);
  }
  require_finite(g_araw, "heads");
  require_finite(g_phiraw, "heads");
  require_finite(g_vraw, "heads");

  // 1x1 heads.
  auto& grads = result.grads;
  const auto& post2 = tape.encoder.post2;
  const auto channels = post2.size();
  struct Head {
    const RealField& g;
    ParamId w, b;
  };
  const Head heads[] = {{g_araw, ParamId::HeadAWeight, ParamId::HeadABias},
                        {g_phiraw, ParamId::HeadPhiWeight, ParamId::HeadPhiBias},
                        {g_vraw, ParamId::HeadVWeight, ParamId::HeadVBias}};
  std::vector<RealField> g_post2(channels, RealField(grid));
  for (const auto& h : heads) {
    double gb = 0.0;
    for (double v : h.g.values()) gb += v;
    grads.tensor(h.b)[0] = gb;
    const auto w = params.tensor(h.w);
    auto gw = grads.tensor(h.w);
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        s += h.g[i] * post2[c][i];
        g_post2[c][i] += w[c] * h.g[i];
      }
      gw[c] = s;
    }
  }

  // Second convolution.
  std::vector<RealField> g_pre2;
  for (std::size_t c = 0; c < channels; ++c) g_pre2.push_back(relu_mask(g_post2[c], tape.encoder.pre2[c]));
  std::vector<RealField> g_post1;
  conv_backward(tape.encoder.post1, params.tensor(ParamId::Conv2Weight), g_pre2, grads.tensor(ParamId::Conv2Weight),
                grads.tensor(ParamId::Conv2Bias), &g_post1);
  if (options.mutation == AdjointMutation::FlipConv2KernelSign) {
    for (auto& v : grads.tensor(ParamId::Conv2Weight)) v = -v;
  }

  // First convolution; no gradient is needed for the input frames.
  std::vector<RealField> g_pre1;
  for (std::size_t c = 0; c < channels; ++c) g_pre1.push_back(relu_mask(g_post1[c], tape.encoder.pre1[c]));
  conv_backward(tape.history, params.tensor(ParamId::Conv1Weight), g_pre1, grads.tensor(ParamId::Conv1Weight),
                grads.tensor(ParamId::Conv1Bias), nullptr);

  if (!grads.all_finite()) throw NumericError("backward: non-finite gradient in stage convolution");
  return result;
}

namespace {

struct Instance {
  std::vector<RealField> history;
  RealField target;
  EncoderParams params;
};

Instance make_instance(const GradcheckConfig& cfg, int attempt) {
  const GridSpec grid(cfg.dims);
  rng::CounterStream data(cfg.seed, rng::Purpose::Check, 2 * static_cast<std::uint64_t>(attempt));
  Instance inst;
  for (int f = 0; f < cfg.history; ++f) {
    RealField frame(grid);
    for (auto& v : frame.values()) v = data.uniform();
    inst.history.push_back(std::move(frame));
  }
  inst.target = RealField(grid);
  for (auto& v : inst.target.values()) v = data.uniform();

  const model::EncoderShape shape{grid.rank(), cfg.history, cfg.channels};
  inst.params = EncoderParams::initialized(shape, rng::mix64(cfg.seed + static_cast<std::uint64_t>(attempt)));
  rng::CounterStream extra(cfg.seed, rng::Purpose::Check, 2 * static_cast<std::uint64_t>(attempt) + 1);
  const double head = std::sqrt(3.0 / cfg.channels);
  for (auto id : {ParamId::Conv1Bias, ParamId::Conv2Bias}) {
    for (auto& v : inst.params.tensor(id)) v = extra.uniform(-0.1, 0.1);
  }
  for (auto id : {ParamId::HeadPhiWeight, ParamId::HeadVWeight}) {
    for (auto& v : inst.params.tensor(id)) v = extra.uniform(-head, head);
  }
  inst.params.tensor(ParamId::HeadABias)[0] = extra.uniform(0.05, 0.3);
  inst.params.tensor(ParamId::HeadPhiBias)[0] = extra.uniform(-0.5, 0.5);
  inst.params.tensor(ParamId::HeadVBias)[0] = extra.uniform(-0.5, 0.5);
  return inst;
}

double min_abs(const std::vector<RealField>& fs) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& f : fs) {
    for (double v : f.values()) m = std::min(m, std::abs(v));
  }
  return m;
}

// True when no ReLU input, argmax or TV difference sits close enough to a kink for the
// finite-difference step to cross it.
bool is_smooth(const Tape& tape, double margin) {
  if (min_abs(tape.encoder.pre1) < margin || min_abs(tape.encoder.pre2) < margin) return false;
  if (min_abs({tape.encoder.raw.a}) < margin) return false;
  const RealField p = squared_modulus(tape.output.psi_final);
  double first = -1.0, second = -1.0;
  for (double v : p.values()) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  if (first - second < margin * first) return false;
  const auto& x = tape.output.x_hat;
  for (int axis = 0; axis < x.grid().rank(); ++axis) {
    const RealField prev = roll(x, axis, 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::abs(x[i] - prev[i]) < margin) return false;
    }
  }
  return true;
}

}  // namespace

GradcheckReport gradcheck(const GradcheckConfig& cfg, AdjointMutation mutation) {
  const GridSpec grid(cfg.dims);
  if (grid.size() > physics::kMaxDenseVoxels) {
    throw CapabilityError("gradcheck limited to " + std::to_string(physics::kMaxDenseVoxels) + " voxels");
  }
  physics::EvolutionConfig evo;
  evo.unroll_steps = cfg.unroll;

  GradcheckReport report;
  Instance inst;
  Tape tape;
  for (int attempt = 0; attempt < cfg.max_screen_attempts; ++attempt) {
    inst = make_instance(cfg, attempt);
    tape = record_forward(inst.history, inst.params, evo, cfg.epsilon);
    report.screen_attempt = attempt;
    if (is_smooth(tape, cfg.screen_margin)) {
      report.screened_clean = true;
      break;
    }
  }

  const auto analytic = backward(tape, inst.params, inst.target, cfg.lambda, {1.0, mutation});
  report.loss = analytic.loss.total;

  auto loss_at = [&](const EncoderParams& p) {
    const auto out = model::forecast(inst.history, p, evo, cfg.epsilon);
    return model::loss(out.x_hat, inst.target, cfg.lambda).total;
  };

  const bool subsample = inst.params.parameter_count() > cfg.subsample_above;
  rng::CounterStream picker(cfg.seed, rng::Purpose::Check, 0xFFFF);
  report.passed = true;
  for (auto id : model::all_param_ids()) {
    const auto n = inst.params.tensor(id).size();
    std::vector<std::size_t> indices;
    if (subsample) {
      auto perm = rng::permutation(picker, n);
      const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.subsample_fraction * n)));
      indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, take)));
      std::sort(indices.begin(), indices.end());
    } else {
      for (std::size_t i = 0; i < n; ++i) indices.push_back(i);
    }
    std::vector<double> fd, an;
    for (auto idx : indices) {
      EncoderParams probe = inst.params;
      const double theta = probe.tensor(id)[idx];
      const double h = cfg.relative_step * std::max(1.0, std::abs(theta));
      probe.tensor(id)[idx] = theta + h;
      const double up = loss_at(probe);
      probe.tensor(id)[idx] = theta - h;
      const double down = loss_at(probe);
      fd.push_back((up - down) / (2.0 * h));
      an.push_back(analytic.grads.tensor(id)[idx]);
    }
    const double scale = std::max({max_abs(fd), max_abs(an), 1e-300});
    double worst = 0.0;
    for (std::size_t k = 0; k < fd.size(); ++k) worst = std::max(worst, std::abs(fd[k] - an[k]) / scale);
    if (max_abs(fd) == 0.0 && max_abs(an) == 0.0) worst = 0.0;
    TensorCheck tc{std::string(model::param_name(id)), indices.size(), worst, worst < cfg.tol};
    report.passed = report.passed && tc.passed;
    report.tensors.push_back(std::move(tc));
  }
  return report;
}

nlohmann::json GradcheckReport::to_json(const GradcheckConfig& cfg) const {
  nlohmann::json j;
  j["passed"] = passed;
  j["tol"] = cfg.tol;
  j["loss"] = loss;
  j["instance"] = {{"dims", cfg.dims},         {"history", cfg.history},
                   {"channels", cfg.channels}, {"unroll", cfg.unroll},
                   {"seed", cfg.seed},         {"screen_attempt", screen_attempt},
                   {"screened_clean", screened_clean}};
  j["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors) {
    j["tensors"].push_back(
        {{"name", t.name}, {"checked", t.checked}, {"max_rel_err", t.max_rel_err}, {"passed", t.passed}});
  }
  return j;
}

}  // namespace wavecast::autodiff
