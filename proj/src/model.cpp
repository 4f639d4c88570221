#include "wavecast/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "wavecast/errors.hpp"
#include "wavecast/rng.hpp"

namespace wavecast::model {

namespace {

std::size_t tensor_size(const EncoderShape& s, ParamId id) {
  const auto c = static_cast<std::size_t>(s.channels);
  const auto k = static_cast<std::size_t>(s.history);
  const auto taps = static_cast<std::size_t>(s.taps());
  switch (id) {
    case ParamId::Conv1Weight: return c * k * taps;
    case ParamId::Conv2Weight: return c * c * taps;
    case ParamId::Conv1Bias:
    case ParamId::Conv2Bias:
    case ParamId::HeadAWeight:
    case ParamId::HeadPhiWeight:
    case ParamId::HeadVWeight: return c;
    case ParamId::HeadABias:
    case ParamId::HeadPhiBias:
    case ParamId::HeadVBias: return 1;
  }
  return 0;
}

void validate_shape(const EncoderShape& s) {
  if (s.rank != 2 && s.rank != 3) throw ArgumentError("encoder rank must be 2 or 3");
  if (s.history < 1) throw ArgumentError("encoder history must be >= 1");
  if (s.channels < 1) throw ArgumentError("encoder channel count must be >= 1");
}

RealField relu(const RealField& f) {
  RealField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] > 0.0 ? f[i] : 0.0;
  return out;
}

RealField pointwise_head(std::span<const RealField> features, std::span<const double> w, double b) {
  RealField out(features.front().grid(), b);
  for (std::size_t c = 0; c < features.size(); ++c) {
    const double wc = w[c];
    const auto& f = features[c];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += wc * f[i];
  }
  return out;
}

void check_history(std::span<const RealField> history, const EncoderParams& params) {
  if (history.empty()) throw ArgumentError("encoder: empty history");
  if (static_cast<int>(history.size()) != params.shape().history) {
    throw ArgumentError("encoder: history has " + std::to_string(history.size()) +
                        " frames but the model expects " + std::to_string(params.shape().history));
  }
  if (history.front().grid().rank() != params.shape().rank) {
    throw ArgumentError("encoder: frame rank does not match the model rank");
  }
  for (const auto& f : history) require_same_grid(f.grid(), history.front().grid(), "encoder history");
}

}  // namespace

std::array<ParamId, kParamTensorCount> all_param_ids() {
  return {ParamId::Conv1Weight,   ParamId::Conv1Bias,   ParamId::Conv2Weight, ParamId::Conv2Bias,
          ParamId::HeadAWeight,   ParamId::HeadABias,   ParamId::HeadPhiWeight, ParamId::HeadPhiBias,
          ParamId::HeadVWeight,   ParamId::HeadVBias};
}

std::string_view param_name(ParamId id) {
  switch (id) {
    case ParamId::Conv1Weight: return "conv1.weight";
    case ParamId::Conv1Bias: return "conv1.bias";
    case ParamId::Conv2Weight: return "conv2.weight";
    case ParamId::Conv2Bias: return "conv2.bias";
    case ParamId::HeadAWeight: return "head_a.weight";
    case ParamId::HeadABias: return "head_a.bias";
    case ParamId::HeadPhiWeight: return "head_phi.weight";
    case ParamId::HeadPhiBias: return "head_phi.bias";
    case ParamId::HeadVWeight: return "head_v.weight";
    case ParamId::HeadVBias: return "head_v.bias";
  }
  return "?";
}

EncoderParams::EncoderParams(EncoderShape shape) : shape_(shape) {
  validate_shape(shape_);
  for (auto id : all_param_ids()) tensors_[static_cast<std::size_t>(id)].assign(tensor_size(shape_, id), 0.0);
}

EncoderParams EncoderParams::initialized(EncoderShape shape, std::uint64_t seed) {
  EncoderParams p(shape);
  const auto taps = static_cast<double>(shape.taps());
  auto fill = [&](ParamId id, double bound) {
    rng::CounterStream s(seed, rng::Purpose::Init, static_cast<std::uint64_t>(id));
    for (auto& w : p.tensor(id)) w = s.uniform(-bound, bound);
  };
  fill(ParamId::Conv1Weight, std::sqrt(6.0 / (shape.history * taps)));
  fill(ParamId::Conv2Weight, std::sqrt(6.0 / (shape.channels * taps)));
  const double head_bound = std::sqrt(3.0 / shape.channels);
  fill(ParamId::HeadAWeight, head_bound);
  fill(ParamId::HeadPhiWeight, 0.1 * head_bound);
  fill(ParamId::HeadVWeight, 0.1 * head_bound);
  p.tensor(ParamId::HeadABias)[0] = 0.1;
  return p;
}

std::vector<std::int64_t> EncoderParams::tensor_shape(ParamId id) const {
  const std::int64_t c = shape_.channels;
  std::vector<std::int64_t> kernel(static_cast<std::size_t>(shape_.rank), kKernelExtent);
  auto conv = [&](std::int64_t in) {
    std::vector<std::int64_t> s{c, in};
    s.insert(s.end(), kernel.begin(), kernel.end());
    return s;
  };
  switch (id) {
    case ParamId::Conv1Weight: return conv(shape_.history);
    case ParamId::Conv2Weight: return conv(c);
    case ParamId::Conv1Bias:
    case ParamId::Conv2Bias: return {c};
    case ParamId::HeadAWeight:
    case ParamId::HeadPhiWeight:
    case ParamId::HeadVWeight: return {1, c};
    case ParamId::HeadABias:
    case ParamId::HeadPhiBias:
    case ParamId::HeadVBias: return {1};
  }
  return {};
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

bool EncoderParams::all_finite() const {
  for (const auto& t : tensors_) {
    for (double v : t) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::uint64_t EncoderParams::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  feed(static_cast<std::uint64_t>(shape_.rank));
  feed(static_cast<std::uint64_t>(shape_.history));
  feed(static_cast<std::uint64_t>(shape_.channels));
  for (const auto& t : tensors_) {
    for (double v : t) feed(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

std::vector<std::int64_t> tap_offsets(int rank) {
  const int taps = rank == 3 ? 27 : 9;
  std::vector<std::int64_t> off(static_cast<std::size_t>(taps * rank));
  for (int t = 0; t < taps; ++t) {
    int rem = t;
    for (int a = rank - 1; a >= 0; --a) {
      off[static_cast<std::size_t>(t * rank + a)] = rem % 3 - 1;
      rem /= 3;
    }
  }
  return off;
}

namespace {

// Source rows of every tap for a block-by-row sweep. Rows are runs along the last axis.
class RowStencil {
 public:
  RowStencil(const GridSpec& grid, int sign) : rank_(grid.rank()), taps_(rank_ == 3 ? 27 : 9) {
    n_ = static_cast<std::size_t>(grid.extent(rank_ - 1));
    rows_ = grid.size() / n_;
    const auto offsets = tap_offsets(rank_);
    base_.resize(static_cast<std::size_t>(taps_) * rows_);
    last_.resize(static_cast<std::size_t>(taps_));
    for (int t = 0; t < taps_; ++t) {
      last_[static_cast<std::size_t>(t)] = sign * offsets[static_cast<std::size_t>(t * rank_ + rank_ - 1)];
      for (std::size_t r = 0; r < rows_; ++r) {
        std::size_t rem = r;
        std::size_t src = 0;
        std::size_t scale = 1;
        for (int a = rank_ - 2; a >= 0; --a) {
          const auto ext = grid.extent(a);
          const auto c = static_cast<std::int64_t>(rem % static_cast<std::size_t>(ext));
          rem /= static_cast<std::size_t>(ext);
          const auto s = ((c + sign * offsets[static_cast<std::size_t>(t * rank_ + a)]) % ext + ext) % ext;
          src += static_cast<std::size_t>(s) * scale;
          scale *= static_cast<std::size_t>(ext);
        }
        base_[static_cast<std::size_t>(t) * rows_ + r] = src * n_;
      }
    }
  }

  int taps() const { return taps_; }
  std::size_t row_length() const { return n_; }
  std::size_t rows() const { return rows_; }

  // dst[j] = src[row(r, t)][(j + last) mod n].
  void gather(const double* src, std::size_t r, int t, double* dst) const {
    const double* p = src + base_[static_cast<std::size_t>(t) * rows_ + r];
    const auto d = last_[static_cast<std::size_t>(t)];
    if (d == 0) {
      std::copy(p, p + n_, dst);
    } else if (d > 0) {
      for (std::size_t j = 0; j + 1 < n_; ++j) dst[j] = p[j + 1];
      dst[n_ - 1] = p[0];
    } else {
      dst[0] = p[n_ - 1];
      for (std::size_t j = 1; j < n_; ++j) dst[j] = p[j - 1];
    }
  }

 private:
  int rank_;
  int taps_;
  std::size_t n_ = 0;
  std::size_t rows_ = 0;
  std::vector<std::size_t> base_;
  std::vector<std::int64_t> last_;
};

// Hot loops are built for AVX2 and baseline x86-64 and picked at load time. Neither clone
// contracts to FMA, so both round identically.
#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
#define WAVECAST_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define WAVECAST_CLONES
#endif

WAVECAST_CLONES void axpy2(double* dst, const double* a, const double* b, double w0, double w1, std::size_t len) {
  for (std::size_t x = 0; x < len; ++x) dst[x] = (dst[x] + w0 * a[x]) + w1 * b[x];
}

WAVECAST_CLONES void axpy1(double* dst, const double* a, double w0, std::size_t len) {
  for (std::size_t x = 0; x < len; ++x) dst[x] += w0 * a[x];
}

// part[u] += g[x * stride + u] * col[x] for u < 8, in x order.
WAVECAST_CLONES void correlate8(double* part, const double* g, std::size_t stride, const double* col,
                                std::size_t len) {
  double p[8];
  for (std::size_t u = 0; u < 8; ++u) p[u] = part[u];
  for (std::size_t x = 0; x < len; ++x) {
    const double sx = col[x];
    const double* gx = g + x * stride;
    for (std::size_t u = 0; u < 8; ++u) p[u] += gx[u] * sx;
  }
  for (std::size_t u = 0; u < 8; ++u) part[u] = p[u];
}

constexpr std::size_t kBlockVoxels = 256;

std::size_t rows_per_block(const RowStencil& st) {
  return std::max<std::size_t>(1, kBlockVoxels / st.row_length());
}

}  // namespace

void conv_accumulate(std::span<const RealField> in, std::span<RealField> out, std::span<const double> weights,
                     bool transposed) {
  const auto& grid = in.front().grid();
  const RowStencil st(grid, transposed ? -1 : 1);
  const int taps = st.taps();
  const auto cin = in.size();
  const auto cout = out.size();
  const auto k_count = static_cast<std::size_t>(taps) * cin;
  if (weights.size() != cout * k_count) throw ArgumentError("conv: weight count does not match channels");

  // Nonzero weights of each output channel in (tap, input) order.
  std::vector<std::vector<std::pair<std::size_t, double>>> terms(cout);
  for (std::size_t c = 0; c < cout; ++c) {
    for (int t = 0; t < taps; ++t) {
      for (std::size_t j = 0; j < cin; ++j) {
        const auto idx = (transposed ? j * cout + c : c * cin + j) * static_cast<std::size_t>(taps) +
                         static_cast<std::size_t>(t);
        if (weights[idx] != 0.0) terms[c].emplace_back(static_cast<std::size_t>(t) * cin + j, weights[idx]);
      }
    }
  }

  const auto n = st.row_length();
  const auto block_rows = rows_per_block(st);
  // Every block overwrites the part of the scratch it reads, so it is left uninitialized.
  const auto cols_buf = std::make_unique_for_overwrite<double[]>(k_count * block_rows * n);
  double* const cols = cols_buf.get();
  for (std::size_t r0 = 0; r0 < st.rows(); r0 += block_rows) {
    const auto nr = std::min(block_rows, st.rows() - r0);
    const auto len = nr * n;
    for (int t = 0; t < taps; ++t) {
      for (std::size_t j = 0; j < cin; ++j) {
        double* col = cols + (static_cast<std::size_t>(t) * cin + j) * len;
        for (std::size_t r = 0; r < nr; ++r) st.gather(in[j].values().data(), r0 + r, t, col + r * n);
      }
    }
    for (std::size_t c = 0; c < cout; ++c) {
      double* dst = out[c].values().data() + r0 * n;
      const auto& tc = terms[c];
      std::size_t q = 0;
      for (; q + 1 < tc.size(); q += 2) {
        const double w0 = tc[q].second;
        const double w1 = tc[q + 1].second;
        const double* a = cols + tc[q].first * len;
        const double* b = cols + tc[q + 1].first * len;
        axpy2(dst, a, b, w0, w1, len);
      }
      if (q < tc.size()) {
        const double w0 = tc[q].second;
        const double* a = cols + tc[q].first * len;
        axpy1(dst, a, w0, len);
      }
    }
  }
}

void conv_kernel_grad(std::span<const RealField> in, std::span<const RealField> grad_out,
                      std::span<double> grad_w) {
  const auto& grid = in.front().grid();
  const RowStencil st(grid, 1);
  const int taps = st.taps();
  const auto cin = in.size();
  const auto cout = grad_out.size();
  const auto k_count = static_cast<std::size_t>(taps) * cin;
  if (grad_w.size() != cout * k_count) throw ArgumentError("conv: weight count does not match channels");

  // acc[k * lanes + o], each a running sum over voxels in flat order. Channels are padded to
  // whole groups of kGroup so the inner loop has a fixed width; padded lanes see zero gradients.
  constexpr std::size_t kGroup = 8;  // width of correlate8
  const auto lanes = (cout + kGroup - 1) / kGroup * kGroup;
  std::vector<double> acc(k_count * lanes, 0.0);
  const auto n = st.row_length();
  const auto block_rows = rows_per_block(st);
  std::vector<double> col(block_rows * n);
  std::vector<double> g(block_rows * n * lanes, 0.0);
  for (std::size_t r0 = 0; r0 < st.rows(); r0 += block_rows) {
    const auto nr = std::min(block_rows, st.rows() - r0);
    const auto len = nr * n;
    // Output gradients interleaved per voxel.
    for (std::size_t o = 0; o < cout; ++o) {
      const double* src = grad_out[o].values().data() + r0 * n;
      for (std::size_t x = 0; x < len; ++x) g[x * lanes + o] = src[x];
    }
    for (int t = 0; t < taps; ++t) {
      for (std::size_t j = 0; j < cin; ++j) {
        for (std::size_t r = 0; r < nr; ++r) st.gather(in[j].values().data(), r0 + r, t, col.data() + r * n);
        for (std::size_t o0 = 0; o0 < lanes; o0 += kGroup) {
          correlate8(acc.data() + (static_cast<std::size_t>(t) * cin + j) * lanes + o0, g.data() + o0, lanes,
                     col.data(), len);
        }
      }
    }
  }
  for (std::size_t o = 0; o < cout; ++o) {
    for (int t = 0; t < taps; ++t) {
      for (std::size_t j = 0; j < cin; ++j) {
        grad_w[(o * cin + j) * static_cast<std::size_t>(taps) + static_cast<std::size_t>(t)] +=
            acc[(static_cast<std::size_t>(t) * cin + j) * lanes + o];
      }
    }
  }
}

std::vector<RealField> conv_periodic(std::span<const RealField> inputs, std::span<const double> weights,
                                     std::span<const double> bias, int out_channels) {
  const auto& grid = inputs.front().grid();
  const int taps = grid.rank() == 3 ? 27 : 9;
  if (weights.size() != static_cast<std::size_t>(out_channels) * inputs.size() * static_cast<std::size_t>(taps)) {
    throw ArgumentError("conv: weight count does not match channels");
  }
  std::vector<RealField> out;
  out.reserve(static_cast<std::size_t>(out_channels));
  for (int o = 0; o < out_channels; ++o) out.emplace_back(grid, bias[static_cast<std::size_t>(o)]);
  conv_accumulate(inputs, out, weights, false);
  return out;
}

EncoderTrace encoder_forward_traced(std::span<const RealField> history, const EncoderParams& params) {
  check_history(history, params);
  const int c = params.shape().channels;
  EncoderTrace tr;
  tr.pre1 = conv_periodic(history, params.tensor(ParamId::Conv1Weight), params.tensor(ParamId::Conv1Bias), c);
  for (const auto& f : tr.pre1) tr.post1.push_back(relu(f));
  tr.pre2 = conv_periodic(tr.post1, params.tensor(ParamId::Conv2Weight), params.tensor(ParamId::Conv2Bias), c);
  for (const auto& f : tr.pre2) tr.post2.push_back(relu(f));
  tr.raw.a = pointwise_head(tr.post2, params.tensor(ParamId::HeadAWeight), params.tensor(ParamId::HeadABias)[0]);
  tr.raw.phi =
      pointwise_head(tr.post2, params.tensor(ParamId::HeadPhiWeight), params.tensor(ParamId::HeadPhiBias)[0]);
  tr.raw.v = pointwise_head(tr.post2, params.tensor(ParamId::HeadVWeight), params.tensor(ParamId::HeadVBias)[0]);
  return tr;
}

RawHeads encoder_forward(std::span<const RealField> history, const EncoderParams& params) {
  return std::move(encoder_forward_traced(history, params).raw);
}

FieldTriplet assemble_triplet(const RawHeads& raw) {
  require_same_grid(raw.a.grid(), raw.phi.grid(), "assemble_triplet");
  require_same_grid(raw.a.grid(), raw.v.grid(), "assemble_triplet");
  FieldTriplet t{RealField(raw.a.grid()), RealField(raw.a.grid()), RealField(raw.a.grid())};
  for (std::size_t i = 0; i < raw.a.size(); ++i) {
    t.amplitude[i] = raw.a[i] > 0.0 ? raw.a[i] : 0.0;
    t.phase[i] = std::numbers::pi * std::tanh(raw.phi[i]);
    t.potential[i] = std::tanh(raw.v[i]);
  }
  return t;
}

ComplexField assemble_psi(const FieldTriplet& t) {
  require_same_grid(t.amplitude.grid(), t.phase.grid(), "assemble_psi");
  ComplexField psi(t.amplitude.grid());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    psi[i] = Complex(t.amplitude[i] * std::cos(t.phase[i]), t.amplitude[i] * std::sin(t.phase[i]));
  }
  return psi;
}

RealField reconstruct_intensity(const ComplexField& psi, double epsilon) {
  if (!(epsilon > 0.0)) throw ArgumentError("reconstruct_intensity: epsilon must be positive");
  RealField p = squared_modulus(psi);
  const double peak = *std::max_element(p.values().begin(), p.values().end());
  const double denom = peak + epsilon;
  for (auto& v : p.values()) v /= denom;
  return p;
}

double tv_penalty(const RealField& x) {
  const auto& g = x.grid();
  double sum = 0.0;
  for (int axis = 0; axis < g.rank(); ++axis) {
    const RealField shifted = roll(x, axis, 1);
    for (std::size_t i = 0; i < x.size(); ++i) sum += std::abs(x[i] - shifted[i]);
  }
  return sum / static_cast<double>(x.size());
}

LossValue loss(const RealField& x_hat, const RealField& x_true, double lambda) {
  require_same_grid(x_hat.grid(), x_true.grid(), "loss");
  if (!(lambda >= 0.0)) throw ArgumentError("loss: lambda must be >= 0");
  double sq = 0.0;
  for (std::size_t i = 0; i < x_hat.size(); ++i) {
    const double d = x_hat[i] - x_true[i];
    sq += d * d;
  }
  LossValue l;
  l.mse = sq / static_cast<double>(x_hat.size());
  l.tv = tv_penalty(x_hat);
  l.total = l.mse + lambda * l.tv;
  return l;
}

ForecastOutput forecast(std::span<const RealField> history, const EncoderParams& params,
                        const physics::EvolutionConfig& cfg, double epsilon) {
  ForecastOutput out;
  RawHeads raw;
  try {
    raw = encoder_forward(history, params);
  } catch (const Error& e) {
    throw ArgumentError(std::string("forecast/encoder: ") + e.what());
  }
  out.triplet = assemble_triplet(raw);
  const ComplexField psi0 = assemble_psi(out.triplet);
  physics::Evolution ev;
  try {
    ev = physics::evolve(psi0, out.triplet.potential, cfg);
  } catch (const NumericError& e) {
    throw NumericError(std::string("forecast/evolution: ") + e.what());
  }
  out.psi_final = std::move(ev.psi);
  out.norm_trace = std::move(ev.norm_trace);
  out.x_hat = reconstruct_intensity(out.psi_final, epsilon);
  return out;
}

RealField persistence_baseline(std::span<const RealField> history) {
  if (history.empty()) throw ArgumentError("persistence baseline needs a nonempty history");
  return history.back();
}

}  // namespace wavecast::model
