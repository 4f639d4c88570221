#include "wavecast/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <sys/resource.h>

#include "wavecast/dft.hpp"
#include "wavecast/errors.hpp"

namespace wavecast::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_masks(const BinaryMask& a, const BinaryMask& b) {
  if (a.grid != b.grid) throw ArgumentError("mask grids differ: " + a.grid.describe() + " vs " + b.grid.describe());
}

// Periodic moving mean over `width` taps centred on each voxel, per axis.
RealField box_mean(const RealField& f, int width) {
  const auto& g = f.grid();
  const int half = width / 2;
  RealField cur = f, next(g);
  std::vector<double> line;
  for (int axis = 0; axis < g.rank(); ++axis) {
    const std::int64_t n = g.extent(axis);
    const std::size_t stride = g.stride(axis);
    line.resize(static_cast<std::size_t>(n));
    for (std::size_t start = 0; start < g.size(); ++start) {
      if ((start / stride) % static_cast<std::size_t>(n) != 0) continue;
      for (std::int64_t i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = cur[start + static_cast<std::size_t>(i) * stride];
      for (std::int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = -half; k <= half; ++k) acc += line[static_cast<std::size_t>(((i + k) % n + n) % n)];
        next[start + static_cast<std::size_t>(i) * stride] = acc / width;
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

RealField product(const RealField& a, const RealField& b) {
  RealField out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

// Lower envelope of parabolas over one line (Felzenszwalb & Huttenlocher).
void edt_line(std::span<double> f, std::vector<double>& d, std::vector<std::size_t>& v, std::vector<double>& z) {
  const std::size_t n = f.size();
  d.assign(n, 0.0);
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  std::size_t k = 0;
  std::size_t first = n;
  for (std::size_t q = 0; q < n; ++q) {
    if (std::isfinite(f[q])) {
      first = q;
      break;
    }
  }
  if (first == n) return;  // no finite sample: leave the line at +inf
  v[0] = first;
  z[0] = -kInf;
  z[1] = kInf;
  for (std::size_t q = first + 1; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    const auto fq = f[q] + static_cast<double>(q * q);
    auto meet = [&](std::size_t p) {
      return (fq - (f[p] + static_cast<double>(p * p))) / (2.0 * static_cast<double>(q) - 2.0 * static_cast<double>(p));
    };
    double s = meet(v[k]);
    while (s <= z[k]) {  // z[0] = -inf stops the walk
      --k;
      s = meet(v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double dq = static_cast<double>(q) - static_cast<double>(v[k]);
    d[q] = dq * dq + f[v[k]];
  }
  std::copy(d.begin(), d.end(), f.begin());
}

}  // namespace

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BinaryMask threshold(const RealField& f, double tau) {
  BinaryMask m{f.grid(), std::vector<std::uint8_t>(f.size())};
  for (std::size_t i = 0; i < f.size(); ++i) m.bits[i] = f[i] >= tau ? 1 : 0;
  return m;
}

double mse(const RealField& a, const RealField& b) {
  require_same_grid(a.grid(), b.grid(), "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr_from_mse(double mse_value) {
  if (mse_value < 1e-10) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse_value));
}

double psnr(const RealField& a, const RealField& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const RealField& a, const RealField& b) {
  require_same_grid(a.grid(), b.grid(), "ssim");
  constexpr int kWindow = 7;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto mx = box_mean(a, kWindow), my = box_mean(b, kWindow);
  const auto exx = box_mean(product(a, a), kWindow);
  const auto eyy = box_mean(product(b, b), kWindow);
  const auto exy = box_mean(product(a, b), kWindow);
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double vx = exx[i] - mx[i] * mx[i];
    const double vy = eyy[i] - my[i] * my[i];
    const double cxy = exy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(a.size());
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  require_masks(a, b);
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    na += a.bits[i];
    nb += b.bits[i];
    both += a.bits[i] & b.bits[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double dice(const RealField& a, const RealField& b, double tau) { return dice(threshold(a, tau), threshold(b, tau)); }

DiceSweep dice_sweep(const RealField& a, const RealField& b, std::span<const double> taus) {
  if (taus.empty()) throw ArgumentError("dice_sweep needs at least one threshold");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0 && taus[i] < 1.0)) throw ArgumentError("dice_sweep thresholds must lie in (0, 1)");
    if (i > 0 && !(taus[i] > taus[i - 1])) throw ArgumentError("dice_sweep thresholds must be strictly increasing");
  }
  DiceSweep s;
  s.taus.assign(taus.begin(), taus.end());
  std::size_t peak = 0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    s.dice.push_back(dice(a, b, taus[i]));
    if (s.dice[i] > s.dice[peak]) peak = i;
  }
  s.peak_tau = taus[peak];
  s.peak_dice = s.dice[peak];
  std::size_t lo = peak, hi = peak;
  const double floor = 0.99 * s.peak_dice;
  while (lo > 0 && s.dice[lo - 1] >= floor) --lo;
  while (hi + 1 < taus.size() && s.dice[hi + 1] >= floor) ++hi;
  s.plateau_lo = taus[lo];
  s.plateau_hi = taus[hi];
  return s;
}

std::vector<std::size_t> surface_voxels(const BinaryMask& m) {
  const auto& g = m.grid;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.bits.size(); ++i) {
    if (!m.bits[i]) continue;
    const auto c = g.coords(i);
    bool edge = false;
    for (int a = 0; a < g.rank() && !edge; ++a) {
      const auto ax = static_cast<std::size_t>(a);
      if (c[ax] == 0 || c[ax] == g.extent(a) - 1) {
        edge = true;
      } else if (!m.bits[i - g.stride(a)] || !m.bits[i + g.stride(a)]) {
        edge = true;
      }
    }
    if (edge) out.push_back(i);
  }
  return out;
}

std::vector<double> squared_distance_transform(const GridSpec& g, std::span<const std::uint8_t> feature) {
  std::vector<double> f(g.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = feature[i] ? 0.0 : kInf;
  std::vector<double> line, d, z;
  std::vector<std::size_t> v;
  for (int axis = 0; axis < g.rank(); ++axis) {
    const auto n = static_cast<std::size_t>(g.extent(axis));
    const std::size_t stride = g.stride(axis);
    line.resize(n);
    for (std::size_t start = 0; start < g.size(); ++start) {
      if ((start / stride) % n != 0) continue;
      for (std::size_t i = 0; i < n; ++i) line[i] = f[start + i * stride];
      edt_line(line, d, v, z);
      for (std::size_t i = 0; i < n; ++i) f[start + i * stride] = line[i];
    }
  }
  return f;
}

double percentile_linear(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ArgumentError("percentile of an empty list");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SurfaceMetrics surface_metrics(const BinaryMask& a, const BinaryMask& b) {
  require_masks(a, b);
  const auto sa = surface_voxels(a);
  const auto sb = surface_voxels(b);
  if (sa.empty() || sb.empty()) {
    throw MetricError("surface metrics need non-empty surfaces on both masks; review the threshold");
  }
  auto as_feature = [&](const std::vector<std::size_t>& s) {
    std::vector<std::uint8_t> f(a.bits.size(), 0);
    for (auto i : s) f[i] = 1;
    return f;
  };
  const auto to_b = squared_distance_transform(a.grid, as_feature(sb));
  const auto to_a = squared_distance_transform(a.grid, as_feature(sa));
  std::vector<double> pooled;
  pooled.reserve(sa.size() + sb.size());
  for (auto i : sa) pooled.push_back(std::sqrt(to_b[i]));
  for (auto i : sb) pooled.push_back(std::sqrt(to_a[i]));

  SurfaceMetrics m;
  m.assd_vox = std::accumulate(pooled.begin(), pooled.end(), 0.0) / static_cast<double>(pooled.size());
  const auto within = std::count_if(pooled.begin(), pooled.end(), [](double d) { return d <= 1.0; });
  m.surface_dice_1vox = static_cast<double>(within) / static_cast<double>(pooled.size());
  std::sort(pooled.begin(), pooled.end());
  m.hd95_vox = percentile_linear(pooled, 0.95);
  return m;
}

SpectralSplit spectral_split(const RealField& pred, const RealField& gt, double cutoff_frac) {
  require_same_grid(pred.grid(), gt.grid(), "spectral_split");
  if (!(cutoff_frac > 0.0 && cutoff_frac < 1.0)) throw ArgumentError("spectral cutoff must lie in (0, 1)");
  const auto& g = pred.grid();
  ComplexField e(g);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = pred[i] - gt[i];
  const auto spec = dft(e);
  const double norm = 0.5 * std::sqrt(static_cast<double>(g.rank()));
  double low = 0.0, high = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto c = g.coords(i);
    double r2 = 0.0;
    for (int a = 0; a < g.rank(); ++a) {
      const auto n = g.extent(a);
      const auto k = c[static_cast<std::size_t>(a)];
      // Signed frequency in [-0.5, 0.5).
      const double f = static_cast<double>(2 * k < n ? k : k - n) / static_cast<double>(n);
      r2 += f * f;
    }
    const double energy = std::norm(spec[i]);
    (std::sqrt(r2) / norm <= cutoff_frac ? low : high) += energy;
  }
  const double total = low + high;
  if (total == 0.0) return {0.0, 0.0, true};
  return {high / total, low / total, false};
}

std::vector<double> centroid(const BinaryMask& m) {
  const int rank = m.grid.rank();
  std::vector<double> c(static_cast<std::size_t>(rank), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.bits.size(); ++i) {
    if (!m.bits[i]) continue;
    const auto x = m.grid.coords(i);
    for (int a = 0; a < rank; ++a) c[static_cast<std::size_t>(a)] += static_cast<double>(x[static_cast<std::size_t>(a)]);
    ++n;
  }
  for (auto& v : c) v = n ? v / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  return c;
}

VolumeCom volume_com(const BinaryMask& pred, const BinaryMask& gt) {
  require_masks(pred, gt);
  VolumeCom r;
  r.pred_vol = static_cast<double>(pred.count());
  r.gt_vol = static_cast<double>(gt.count());
  if (r.gt_vol == 0.0) throw MetricError("volume metrics need a non-empty ground-truth mask; review the threshold");
  r.abs_vol_err_pct = 100.0 * std::abs(r.pred_vol - r.gt_vol) / r.gt_vol;
  const auto cp = centroid(pred), cg = centroid(gt);
  double s = 0.0;
  for (std::size_t a = 0; a < cp.size(); ++a) s += (cp[a] - cg[a]) * (cp[a] - cg[a]);
  r.com_err_vox = std::sqrt(s);
  return r;
}

VolumeCom volume_com(const RealField& pred, const RealField& gt, double tau) {
  return volume_com(threshold(pred, tau), threshold(gt, tau));
}

ProfileResult profile(const std::function<void()>& fn, int n_warmup, int n_runs) {
  if (n_runs < 3) throw ArgumentError("profile needs at least 3 timed runs");
  for (int i = 0; i < n_warmup; ++i) fn();
  std::vector<double> ms;
  for (int i = 0; i < n_runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / n_runs;
  double var = 0.0;
  for (double v : ms) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / (n_runs - 1)), 1000.0 / mean, n_runs};
}

std::optional<double> peak_rss_mib() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) != 0) return std::nullopt;
  return static_cast<double>(usage.ru_maxrss) / 1024.0;  // Linux reports KiB
}

ErrorHistogram error_histogram(std::span<const double> errors, int n_bins) {
  if (n_bins < 2) throw ArgumentError("error_histogram needs at least 2 bins");
  if (errors.empty()) throw ArgumentError("error_histogram needs at least one value");
  ErrorHistogram h;
  h.counts.assign(static_cast<std::size_t>(n_bins), 0);
  const auto n = static_cast<double>(errors.size());
  double peak = 0.0, sum = 0.0;
  for (double e : errors) {
    peak = std::max(peak, std::abs(e));
    sum += e;
  }
  h.mean = sum / n;
  double var = 0.0;
  for (double e : errors) var += (e - h.mean) * (e - h.mean);
  h.sd = std::sqrt(var / n);
  h.lo = -peak;
  h.hi = peak;
  if (peak == 0.0) {
    h.counts[static_cast<std::size_t>(n_bins / 2)] = errors.size();
    return h;
  }
  const double width = 2.0 * peak / n_bins;
  for (double e : errors) {
    const auto bin = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((e + peak) / width)), 0, n_bins - 1);
    h.counts[static_cast<std::size_t>(bin)] += 1;
  }
  return h;
}

ErrorHistogram error_histogram(const RealField& pred, const RealField& gt, int n_bins) {
  require_same_grid(pred.grid(), gt.grid(), "error_histogram");
  std::vector<double> e(pred.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = pred[i] - gt[i];
  return error_histogram(e, n_bins);
}

}  // namespace wavecast::metrics
