#include "wavecast/synthgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "wavecast/errors.hpp"
#include "wavecast/parallel.hpp"
#include "wavecast/rng.hpp"
#include "wavecast/vf1.hpp"

namespace wavecast::synthgen {

using nlohmann::json;

namespace {

constexpr int kMaxRetries = 10;
constexpr double kFaceMargin = 2.0;
constexpr std::int64_t kMinExtent = 16;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void check_dims(Kind kind, std::span<const std::int64_t> dims) {
  const std::size_t rank = kind == Kind::D3 ? 3 : 2;
  if (dims.size() != rank) {
    throw ArgumentError(kind_name(kind) + " generation needs " + std::to_string(rank) + " extents");
  }
  for (auto d : dims) {
    if (d < kMinExtent) throw ArgumentError("generation needs every extent >= " + std::to_string(kMinExtent));
  }
}

double centre(std::int64_t extent, double shift) { return 0.5 * static_cast<double>(extent - 1) + shift; }

}  // namespace

std::string kind_name(Kind k) { return k == Kind::D3 ? "3d" : "2d"; }

Kind parse_kind(const std::string& s) {
  if (s == "2d") return Kind::D2;
  if (s == "3d") return Kind::D3;
  throw ConfigError("dataset kind must be \"2d\" or \"3d\", got \"" + s + "\"");
}

json DynamicsParams::to_json() const {
  return {{"r0", r0},
          {"growth_rate", growth_rate},
          {"rotation_speed", rotation_speed},
          {"irregularity", irregularity},
          {"center_shift", center_shift},
          {"smooth_sigma", smooth_sigma}};
}

DynamicsParams DynamicsParams::from_json(const json& j) {
  DynamicsParams p;
  p.r0 = j.at("r0").get<double>();
  p.growth_rate = j.at("growth_rate").get<double>();
  p.rotation_speed = j.at("rotation_speed").get<double>();
  p.irregularity = j.at("irregularity").get<double>();
  p.center_shift = j.at("center_shift").get<std::vector<double>>();
  p.smooth_sigma = j.at("smooth_sigma").get<double>();
  return p;
}

ParamRanges default_ranges(Kind kind, std::span<const std::int64_t> dims) {
  const double reference = kind == Kind::D3 ? 64.0 : 128.0;
  const double s = static_cast<double>(*std::min_element(dims.begin(), dims.end())) / reference;
  const double r0_lo = kind == Kind::D3 ? 6.0 : 10.0;
  const double r0_hi = kind == Kind::D3 ? 10.0 : 18.0;
  return {s * r0_lo, s * r0_hi, 0.5, 1.5, 0.1, 0.5, 0.05, 0.3, s * 3.0, 1.0};
}

double max_extent(const DynamicsParams& p) {
  return (p.r0 + (kFrames - 1) * p.growth_rate) * (1.0 + p.irregularity);
}

bool fits_domain(const DynamicsParams& p, std::span<const std::int64_t> dims) {
  const double reach = max_extent(p);
  for (std::size_t a = 0; a < dims.size(); ++a) {
    const double c = centre(dims[a], p.center_shift[a]);
    if (c - reach < kFaceMargin || c + reach > static_cast<double>(dims[a] - 1) - kFaceMargin) return false;
  }
  return true;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("gaussian sigma must be > 0");
  const auto radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

RealField gaussian_smooth(const RealField& f, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const auto radius = static_cast<std::int64_t>(kernel.size() / 2);
  const auto& g = f.grid();
  RealField cur = f;
  RealField next(g);
  std::vector<double> line;
  for (int axis = 0; axis < g.rank(); ++axis) {
    const std::int64_t n = g.extent(axis);
    const std::size_t stride = g.stride(axis);
    // Lines are copied with `radius` wrapped values on each side.
    line.resize(static_cast<std::size_t>(n + 2 * radius));
    // Each line along `axis` starts at a flat index whose coordinate on that axis is 0.
    for (std::size_t start = 0; start < g.size(); ++start) {
      if ((start / stride) % static_cast<std::size_t>(n) != 0) continue;
      for (std::int64_t i = -radius; i < n + radius; ++i) {
        const auto j = static_cast<std::size_t>(((i % n) + n) % n);
        line[static_cast<std::size_t>(i + radius)] = cur[start + j * stride];
      }
      for (std::int64_t i = 0; i < n; ++i) {
        const double* w = line.data() + i;
        double acc = 0.0;
        for (std::size_t k = 0; k < kernel.size(); ++k) acc += kernel[k] * w[k];
        next[start + static_cast<std::size_t>(i) * stride] = acc;
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

std::vector<RealField> render_sequence(Kind kind, std::span<const std::int64_t> dims, const DynamicsParams& p) {
  check_dims(kind, dims);
  const GridSpec grid(dims);
  const int rank = grid.rank();
  if (p.center_shift.size() != dims.size()) throw ArgumentError("center_shift needs one entry per axis");

  // Geometry is fixed across frames; only the radius and rotation change.
  std::vector<double> dist(grid.size()), theta(grid.size()), polar(grid.size(), 1.0);
  std::array<double, 3> c{};
  for (int a = 0; a < rank; ++a) c[static_cast<std::size_t>(a)] = centre(dims[static_cast<std::size_t>(a)], p.center_shift[static_cast<std::size_t>(a)]);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto ix = grid.coords(i);
    const double dx = static_cast<double>(ix[static_cast<std::size_t>(rank - 1)]) - c[static_cast<std::size_t>(rank - 1)];
    const double dy = static_cast<double>(ix[static_cast<std::size_t>(rank - 2)]) - c[static_cast<std::size_t>(rank - 2)];
    const double dz = rank == 3 ? static_cast<double>(ix[0]) - c[0] : 0.0;
    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
    dist[i] = d;
    theta[i] = (dx == 0.0 && dy == 0.0) ? 0.0 : std::atan2(dy, dx);
    if (rank == 3) {
      const double cos_phi = d > 0.0 ? dz / d : 1.0;
      polar[i] = 2.0 * cos_phi * cos_phi - 1.0;  // cos(2 phi)
    }
  }

  const double width = kind == Kind::D3 ? 5.0 : 10.0;
  std::vector<RealField> frames;
  frames.reserve(kFrames);
  for (int t = 0; t < kFrames; ++t) {
    const double r = p.r0 + t * p.growth_rate;
    const double turn = p.rotation_speed * t;
    RealField f(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double r_eff = r * (1.0 + p.irregularity * std::sin(3.0 * (theta[i] + turn)) * polar[i]);
      const double e = dist[i] - r_eff;
      f[i] = std::exp(-e * e / width);
    }
    f = gaussian_smooth(f, p.smooth_sigma);
    if (kind == Kind::D3) {
      for (auto& v : f.values()) v = std::clamp(v, 0.0, 1.0);
    } else {
      const auto [lo, hi] = std::minmax_element(f.values().begin(), f.values().end());
      const double mn = *lo, span = *hi - *lo;
      for (auto& v : f.values()) v = span > 0.0 ? (v - mn) / span : 0.0;
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

SequenceSample gen_sequence(Kind kind, std::uint64_t master_seed, std::uint64_t sample_index,
                            std::span<const std::int64_t> dims) {
  check_dims(kind, dims);
  const auto r = default_ranges(kind, dims);
  rng::CounterStream stream(master_seed, rng::Purpose::Dataset, sample_index);
  for (int attempt = 1; attempt <= kMaxRetries; ++attempt) {
    DynamicsParams p;
    p.r0 = stream.uniform(r.r0_lo, r.r0_hi);
    p.growth_rate = stream.uniform(r.growth_lo, r.growth_hi);
    p.rotation_speed = stream.uniform(r.rotation_lo, r.rotation_hi);
    p.irregularity = stream.uniform(r.irregularity_lo, r.irregularity_hi);
    for (std::size_t a = 0; a < dims.size(); ++a) p.center_shift.push_back(stream.uniform(-r.shift_abs, r.shift_abs));
    p.smooth_sigma = r.sigma;
    if (!fits_domain(p, dims)) continue;
    SequenceSample s;
    s.frames = render_sequence(kind, dims, p);
    s.params = std::move(p);
    s.sample_index = sample_index;
    s.master_seed = master_seed;
    s.attempts = attempt;
    return s;
  }
  throw GenerationError("sample " + std::to_string(sample_index) + " escapes the domain after " +
                        std::to_string(kMaxRetries) + " draws");
}

SequenceSample gen_sequence_3d(std::uint64_t master_seed, std::uint64_t sample_index,
                               std::span<const std::int64_t> dims) {
  return gen_sequence(Kind::D3, master_seed, sample_index, dims);
}

SequenceSample gen_sequence_2d(std::uint64_t master_seed, std::uint64_t sample_index,
                               std::span<const std::int64_t> dims) {
  return gen_sequence(Kind::D2, master_seed, sample_index, dims);
}

std::string frame_file(std::uint64_t index, int t) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%05llu_%d.vf1", static_cast<unsigned long long>(index), t);
  return buf;
}

namespace {

std::string split_of(const DatasetSpec& spec, std::uint64_t index) { return index < spec.n_train ? "train" : "test"; }

void validate(const DatasetSpec& spec) {
  check_dims(spec.kind, spec.dims);
  if (spec.n_train + spec.n_test == 0) throw ArgumentError("dataset needs at least one sample");
}

}  // namespace

json build_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir) {
  validate(spec);
  const std::size_t total = spec.n_train + spec.n_test;
  std::error_code ec;
  for (const char* split : {"train", "test"}) {
    std::filesystem::create_directories(out_dir / split, ec);
    if (ec) throw IoError((out_dir / split).string() + ": " + ec.message());
  }

  std::vector<json> entries(total);
  parallel_for(total, [&](std::size_t i) {
    const auto index = static_cast<std::uint64_t>(i);
    const auto s = gen_sequence(spec.kind, spec.seed, index, spec.dims);
    const auto split = split_of(spec, index);
    json files = json::array();
    for (int t = 0; t < kFrames; ++t) {
      const auto rel = std::filesystem::path(split) / frame_file(index, t);
      vf1::write(out_dir / rel, s.frames[static_cast<std::size_t>(t)],
                 {{"generator", "wavecast.synthgen"},
                  {"kind", kind_name(spec.kind)},
                  {"master_seed", spec.seed},
                  {"sample_index", index},
                  {"frame", t}});
      files.push_back(rel.generic_string());
    }
    entries[i] = {{"split", split},
                  {"index", index},
                  {"attempts", s.attempts},
                  {"params", s.params.to_json()},
                  {"files", files}};
  });

  json manifest;
  manifest["format"] = "wavecast-dataset";
  manifest["version"] = 1;
  manifest["kind"] = kind_name(spec.kind);
  manifest["dims"] = spec.dims;
  manifest["frames"] = kFrames;
  manifest["master_seed"] = spec.seed;
  manifest["n_train"] = spec.n_train;
  manifest["n_test"] = spec.n_test;
  manifest["train_indices"] = {0, spec.n_train};
  manifest["test_indices"] = {spec.n_train, total};
  manifest["samples"] = entries;
  vf1::write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

std::vector<std::uint64_t> sample_digests(const DatasetSpec& spec, std::span<const std::uint64_t> indices,
                                          unsigned threads) {
  validate(spec);
  std::vector<std::uint64_t> out(indices.size());
  parallel_for(
      indices.size(),
      [&](std::size_t i) {
        const auto s = gen_sequence(spec.kind, spec.seed, indices[i], spec.dims);
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& f : s.frames) h = fnv1a(vf1::encode(f), h);
        out[i] = h;
      },
      threads);
  return out;
}

std::vector<SequenceSample> load_split(const std::filesystem::path& dir, const std::string& split) {
  json manifest;
  try {
    manifest = json::parse(vf1::read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  std::vector<SequenceSample> out;
  try {
    if (manifest.at("format") != "wavecast-dataset") throw FormatError((dir / "manifest.json").string() + ": not a dataset manifest");
    for (const auto& e : manifest.at("samples")) {
      if (e.at("split") != split) continue;
      SequenceSample s;
      s.sample_index = e.at("index").get<std::uint64_t>();
      s.master_seed = manifest.at("master_seed").get<std::uint64_t>();
      s.attempts = e.at("attempts").get<int>();
      s.params = DynamicsParams::from_json(e.at("params"));
      for (const auto& f : e.at("files")) s.frames.push_back(vf1::read_real(dir / f.get<std::string>()));
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  if (out.empty()) throw IoError(dir.string() + ": split \"" + split + "\" has no samples");
  return out;
}

}  // namespace wavecast::synthgen
