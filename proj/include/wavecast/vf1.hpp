#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "wavecast/field.hpp"

// VF1 volume container.
//
//   offset  size        content
//   0       4           magic "WVC1"
//   4       1           rank (2 or 3)
//   5       4*rank      u32 little-endian extents, axis 0 first
//   5+4r    1           dtype: 0 = f32 real, 1 = f32 complex interleaved (re, im)
//   6+4r    ...         little-endian payload, row-major, last axis fastest
//
// A sidecar "<stem>.meta.json" carries spacing, boundary and provenance.
namespace wavecast::vf1 {

enum class DType : std::uint8_t { RealF32 = 0, ComplexF32 = 1 };

std::vector<std::uint8_t> encode(const RealField& f);
std::vector<std::uint8_t> encode(const ComplexField& f);

// Decoding needs spacing from the sidecar; pass an empty span for unit spacing.
RealField decode_real(std::span<const std::uint8_t> bytes, std::span<const double> spacing = {});
ComplexField decode_complex(std::span<const std::uint8_t> bytes, std::span<const double> spacing = {});
DType peek_dtype(std::span<const std::uint8_t> bytes);

std::filesystem::path sidecar_path(const std::filesystem::path& vf1_path);

void write(const std::filesystem::path& path, const RealField& f,
           const nlohmann::json& provenance = nlohmann::json::object());
void write(const std::filesystem::path& path, const ComplexField& f,
           const nlohmann::json& provenance = nlohmann::json::object());
RealField read_real(const std::filesystem::path& path);
ComplexField read_complex(const std::filesystem::path& path);

// Little-endian helpers shared with the checkpoint format.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset);
float get_f32(std::span<const std::uint8_t> in, std::size_t offset);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never see partial files.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace wavecast::vf1
