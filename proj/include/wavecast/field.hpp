#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "wavecast/grid.hpp"

namespace wavecast {

using Complex = std::complex<double>;

// Dense scalar field on a grid. Values are stored row-major with the last axis fastest.
template <typename T>
class Field {
 public:
  using value_type = T;

  Field() = default;
  explicit Field(GridSpec grid, T fill = T{}) : grid_(std::move(grid)), data_(grid_.size(), fill) {}
  Field(GridSpec grid, std::vector<T> values);

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return data_.size(); }

  std::span<const T> values() const { return data_; }
  std::span<T> values() { return data_; }
  const T* data() const { return data_.data(); }
  T* data() { return data_.data(); }

  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }

  bool operator==(const Field& other) const = default;

 private:
  GridSpec grid_;
  std::vector<T> data_;
};

using RealField = Field<double>;
using ComplexField = Field<Complex>;

// Cyclic shift: output[i] = input[i - shift] along `axis`, modulo the extent.
template <typename T>
Field<T> roll(const Field<T>& f, int axis, std::int64_t shift);

// Cyclic shift of every axis at once; shifts.size() must equal the rank.
template <typename T>
Field<T> roll(const Field<T>& f, std::span<const std::int64_t> shifts);

// Writes src shifted by `shifts` into dst without allocating. dst must be sized like src.
template <typename T>
void roll_into(std::span<const T> src, const GridSpec& grid, std::span<const std::int64_t> shifts,
               std::span<T> dst);

// sqrt(sum |f_i|^2 * cell volume).
double l2_norm(const ComplexField& f);

ComplexField to_complex(const RealField& f);
RealField squared_modulus(const ComplexField& f);

template <typename T>
bool all_finite(const Field<T>& f);

// Throws ArgumentError naming `context` when the grids differ.
void require_same_grid(const GridSpec& a, const GridSpec& b, std::string_view context);

}  // namespace wavecast
