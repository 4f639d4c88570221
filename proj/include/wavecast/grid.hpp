#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace wavecast {

enum class Boundary { Periodic };

inline constexpr int kMaxRank = 3;
inline constexpr std::int64_t kMinExtent = 4;

// Shape, spacing and boundary of a dense voxel grid. Row-major, last axis fastest.
class GridSpec {
 public:
  GridSpec() = default;
  GridSpec(std::span<const std::int64_t> dims, std::span<const double> spacing = {},
           Boundary boundary = Boundary::Periodic);
  GridSpec(std::initializer_list<std::int64_t> dims)
      : GridSpec(std::span<const std::int64_t>(dims.begin(), dims.size())) {}

  int rank() const { return rank_; }
  std::int64_t extent(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
  double spacing(int axis) const { return spacing_[static_cast<std::size_t>(axis)]; }
  Boundary boundary() const { return boundary_; }
  std::size_t size() const { return size_; }

  std::vector<std::int64_t> dims() const;
  std::vector<double> spacings() const;
  // Element stride of an axis in the flat row-major buffer.
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }
  // Product of the per-axis spacings, the volume element of a voxel.
  double cell_volume() const;

  std::size_t flat_index(std::span<const std::int64_t> coords) const;
  std::array<std::int64_t, kMaxRank> coords(std::size_t flat) const;

  std::string describe() const;

  bool operator==(const GridSpec& other) const;

 private:
  int rank_ = 0;
  std::array<std::int64_t, kMaxRank> dims_{1, 1, 1};
  std::array<double, kMaxRank> spacing_{1.0, 1.0, 1.0};
  std::array<std::size_t, kMaxRank> strides_{0, 0, 0};
  std::size_t size_ = 0;
  Boundary boundary_ = Boundary::Periodic;
};

}  // namespace wavecast
