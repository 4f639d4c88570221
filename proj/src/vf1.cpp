#include "wavecast/vf1.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "wavecast/errors.hpp"

namespace wavecast::vf1 {

namespace {

constexpr char kMagic[4] = {'W', 'V', 'C', '1'};

std::vector<std::uint8_t> header(const GridSpec& g, DType dtype) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(static_cast<std::uint8_t>(g.rank()));
  for (int a = 0; a < g.rank(); ++a) put_u32(out, static_cast<std::uint32_t>(g.extent(a)));
  out.push_back(static_cast<std::uint8_t>(dtype));
  return out;
}

struct Header {
  std::vector<std::int64_t> dims;
  DType dtype;
  std::size_t payload_offset;
};

Header parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("VF1: bad magic");
  }
  const int rank = bytes[4];
  if (rank != 2 && rank != 3) throw FormatError("VF1: unsupported rank " + std::to_string(rank));
  const std::size_t dtype_at = 5 + 4 * static_cast<std::size_t>(rank);
  if (bytes.size() < dtype_at + 1) throw FormatError("VF1: truncated header");
  Header h;
  for (int a = 0; a < rank; ++a) h.dims.push_back(get_u32(bytes, 5 + 4 * static_cast<std::size_t>(a)));
  const auto code = bytes[dtype_at];
  if (code > 1) throw FormatError("VF1: unknown dtype code " + std::to_string(code));
  h.dtype = static_cast<DType>(code);
  h.payload_offset = dtype_at + 1;
  return h;
}

GridSpec make_grid(const Header& h, std::span<const double> spacing) {
  try {
    return GridSpec(h.dims, spacing);
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("VF1: invalid grid: ") + e.what());
  }
}

void check_payload(std::span<const std::uint8_t> bytes, const Header& h, std::size_t count) {
  const std::size_t scalars = h.dtype == DType::ComplexF32 ? 2 * count : count;
  if (bytes.size() != h.payload_offset + 4 * scalars) {
    throw FormatError("VF1: payload size " + std::to_string(bytes.size() - h.payload_offset) +
                      " does not match header (" + std::to_string(4 * scalars) + " expected)");
  }
}

std::vector<double> sidecar_spacing(const std::filesystem::path& path) {
  const auto meta = sidecar_path(path);
  if (!std::filesystem::exists(meta)) return {};
  std::ifstream in(meta);
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.contains("spacing")) return j.at("spacing").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("VF1 sidecar " + meta.string() + ": " + e.what());
  }
  return {};
}

template <typename FieldT>
void write_with_sidecar(const std::filesystem::path& path, const FieldT& f, DType dtype,
                        const nlohmann::json& provenance) {
  write_file(path, encode(f));
  nlohmann::json meta;
  meta["format"] = "VF1";
  meta["dims"] = f.grid().dims();
  meta["spacing"] = f.grid().spacings();
  meta["boundary"] = "periodic";
  meta["dtype"] = dtype == DType::RealF32 ? "f32" : "c64";
  meta["provenance"] = provenance;
  write_text(sidecar_path(path), meta.dump(2) + "\n");
}

}  // namespace

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

float get_f32(std::span<const std::uint8_t> in, std::size_t offset) {
  return std::bit_cast<float>(get_u32(in, offset));
}

std::vector<std::uint8_t> encode(const RealField& f) {
  auto out = header(f.grid(), DType::RealF32);
  out.reserve(out.size() + 4 * f.size());
  for (double v : f.values()) put_f32(out, static_cast<float>(v));
  return out;
}

std::vector<std::uint8_t> encode(const ComplexField& f) {
  auto out = header(f.grid(), DType::ComplexF32);
  out.reserve(out.size() + 8 * f.size());
  for (const auto& z : f.values()) {
    put_f32(out, static_cast<float>(z.real()));
    put_f32(out, static_cast<float>(z.imag()));
  }
  return out;
}

DType peek_dtype(std::span<const std::uint8_t> bytes) { return parse_header(bytes).dtype; }

RealField decode_real(std::span<const std::uint8_t> bytes, std::span<const double> spacing) {
  const auto h = parse_header(bytes);
  if (h.dtype != DType::RealF32) throw FormatError("VF1: expected real payload");
  RealField f(make_grid(h, spacing));
  check_payload(bytes, h, f.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = get_f32(bytes, h.payload_offset + 4 * i);
  return f;
}

ComplexField decode_complex(std::span<const std::uint8_t> bytes, std::span<const double> spacing) {
  const auto h = parse_header(bytes);
  if (h.dtype != DType::ComplexF32) throw FormatError("VF1: expected complex payload");
  ComplexField f(make_grid(h, spacing));
  check_payload(bytes, h, f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = Complex(get_f32(bytes, h.payload_offset + 8 * i), get_f32(bytes, h.payload_offset + 8 * i + 4));
  }
  return f;
}

std::filesystem::path sidecar_path(const std::filesystem::path& vf1_path) {
  auto p = vf1_path;
  p.replace_extension(".meta.json");
  return p;
}

void write(const std::filesystem::path& path, const RealField& f, const nlohmann::json& provenance) {
  write_with_sidecar(path, f, DType::RealF32, provenance);
}

void write(const std::filesystem::path& path, const ComplexField& f, const nlohmann::json& provenance) {
  write_with_sidecar(path, f, DType::ComplexF32, provenance);
}

RealField read_real(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto spacing = sidecar_spacing(path);
  try {
    return decode_real(bytes, spacing);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ComplexField read_complex(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto spacing = sidecar_spacing(path);
  try {
    return decode_complex(bytes, spacing);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace wavecast::vf1
