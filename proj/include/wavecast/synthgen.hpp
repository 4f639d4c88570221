#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavecast/field.hpp"

// Seeded synthetic tumour-like sequences. Axis convention: the last array axis is x,
// the one before it y, and in 3D axis 0 is z. Angles are measured about the shifted
// centre: theta = atan2(y, x), phi the polar angle from +z.
namespace wavecast::synthgen {

enum class Kind { D2, D3 };
inline constexpr int kFrames = 6;

std::string kind_name(Kind k);
Kind parse_kind(const std::string& s);

struct DynamicsParams {
  double r0 = 0.0;
  double growth_rate = 0.0;
  double rotation_speed = 0.0;
  double irregularity = 0.0;
  std::vector<double> center_shift;  // one entry per axis
  double smooth_sigma = 1.0;

  nlohmann::json to_json() const;
  static DynamicsParams from_json(const nlohmann::json& j);
  bool operator==(const DynamicsParams&) const = default;
};

struct SequenceSample {
  std::vector<RealField> frames;
  DynamicsParams params;
  std::uint64_t sample_index = 0;
  std::uint64_t master_seed = 0;
  int attempts = 1;
};

// Parameter ranges at the reference extent (128 in 2D, 64 in 3D); lengths scale with
// min(dims) / reference.
struct ParamRanges {
  double r0_lo, r0_hi, growth_lo, growth_hi, rotation_lo, rotation_hi, irregularity_lo, irregularity_hi,
      shift_abs, sigma;
};
ParamRanges default_ranges(Kind kind, std::span<const std::int64_t> dims);

// Largest extent the shape reaches from the centre over all frames.
double max_extent(const DynamicsParams& p);
// True when every frame's shape keeps at least two voxels from each face.
bool fits_domain(const DynamicsParams& p, std::span<const std::int64_t> dims);

// Deterministic render of all frames for given parameters.
std::vector<RealField> render_sequence(Kind kind, std::span<const std::int64_t> dims, const DynamicsParams& p);

SequenceSample gen_sequence_3d(std::uint64_t master_seed, std::uint64_t sample_index,
                               std::span<const std::int64_t> dims);
SequenceSample gen_sequence_2d(std::uint64_t master_seed, std::uint64_t sample_index,
                               std::span<const std::int64_t> dims);
SequenceSample gen_sequence(Kind kind, std::uint64_t master_seed, std::uint64_t sample_index,
                            std::span<const std::int64_t> dims);

// Separable periodic Gaussian, radius ceil(3 sigma), kernel renormalized to sum 1.
RealField gaussian_smooth(const RealField& f, double sigma);
std::vector<double> gaussian_kernel(double sigma);

struct DatasetSpec {
  Kind kind = Kind::D2;
  std::vector<std::int64_t> dims{32, 32};
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

// Train samples use indices [0, n_train), test samples [n_train, n_train + n_test).
// Files: <out>/<split>/<index:05>_<t>.vf1 plus <out>/manifest.json. Returns the manifest.
nlohmann::json build_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

std::string frame_file(std::uint64_t index, int t);

// FNV-1a digest of each sample's encoded frames, computed without touching disk.
std::vector<std::uint64_t> sample_digests(const DatasetSpec& spec, std::span<const std::uint64_t> indices,
                                          unsigned threads = 0);

// Reads one split back using the manifest in `dir`.
std::vector<SequenceSample> load_split(const std::filesystem::path& dir, const std::string& split);

}  // namespace wavecast::synthgen
