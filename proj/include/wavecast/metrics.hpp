#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "wavecast/field.hpp"

namespace wavecast::metrics {

struct BinaryMask {
  GridSpec grid;
  std::vector<std::uint8_t> bits;

  std::size_t count() const;
};

// value >= tau
BinaryMask threshold(const RealField& f, double tau);

inline constexpr double kPsnrCapDb = 100.0;

double mse(const RealField& a, const RealField& b);
// 10 log10(1 / mse) for data in [0, 1]; capped when mse < 1e-10.
double psnr_from_mse(double mse_value);
double psnr(const RealField& a, const RealField& b);

// Mean local SSIM over a uniform 7-per-axis periodic window, L = 1.
double ssim(const RealField& a, const RealField& b);

// 2|A n B| / (|A| + |B|); two empty masks score 1.
double dice(const BinaryMask& a, const BinaryMask& b);
double dice(const RealField& a, const RealField& b, double tau);

struct DiceSweep {
  std::vector<double> taus;
  std::vector<double> dice;
  double peak_tau = 0.0;
  double peak_dice = 0.0;
  // Contiguous run of taus around the peak with dice >= 0.99 * peak.
  double plateau_lo = 0.0;
  double plateau_hi = 0.0;
};
DiceSweep dice_sweep(const RealField& a, const RealField& b, std::span<const double> taus);

// Foreground voxels with at least one background face neighbour; voxels outside the grid
// count as background.
std::vector<std::size_t> surface_voxels(const BinaryMask& m);

// Exact squared Euclidean distance from every voxel to the nearest feature voxel
// (separable lower-envelope transform, non-periodic). Without features every entry is +inf.
std::vector<double> squared_distance_transform(const GridSpec& grid, std::span<const std::uint8_t> feature);

struct SurfaceMetrics {
  double hd95_vox = 0.0;
  double assd_vox = 0.0;
  double surface_dice_1vox = 0.0;
};
SurfaceMetrics surface_metrics(const BinaryMask& a, const BinaryMask& b);

// Linear interpolation at rank q * (n - 1) of a sorted list.
double percentile_linear(std::span<const double> sorted, double q);

struct SpectralSplit {
  double highfreq_frac = 0.0;
  double lowfreq_frac = 0.0;
  bool zero_energy = false;
};
SpectralSplit spectral_split(const RealField& pred, const RealField& gt, double cutoff_frac = 0.5);

struct VolumeCom {
  double pred_vol = 0.0;
  double gt_vol = 0.0;
  double abs_vol_err_pct = 0.0;
  double com_err_vox = 0.0;  // NaN when the prediction mask is empty
};
VolumeCom volume_com(const BinaryMask& pred, const BinaryMask& gt);
VolumeCom volume_com(const RealField& pred, const RealField& gt, double tau);
std::vector<double> centroid(const BinaryMask& m);

struct ProfileResult {
  double latency_ms_mean = 0.0;
  double latency_ms_sd = 0.0;
  double throughput_per_s = 0.0;
  int runs = 0;
};
ProfileResult profile(const std::function<void()>& fn, int n_warmup, int n_runs);

// Peak resident set size in MiB, when the platform reports it.
std::optional<double> peak_rss_mib();

struct ErrorHistogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;
  double mean = 0.0;
  double sd = 0.0;
};
// Signed pred - gt errors binned over [-max|e|, max|e|].
ErrorHistogram error_histogram(const RealField& pred, const RealField& gt, int n_bins);
ErrorHistogram error_histogram(std::span<const double> errors, int n_bins);

}  // namespace wavecast::metrics
