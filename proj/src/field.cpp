#include "wavecast/field.hpp"

#include <cmath>
#include <string>

#include "wavecast/errors.hpp"

namespace wavecast {

template <typename T>
Field<T>::Field(GridSpec grid, std::vector<T> values) : grid_(std::move(grid)), data_(std::move(values)) {
  if (data_.size() != grid_.size()) {
    throw ArgumentError("field has " + std::to_string(data_.size()) + " values but grid " +
                        grid_.describe() + " needs " + std::to_string(grid_.size()));
  }
}

namespace {

std::int64_t wrap(std::int64_t i, std::int64_t n) {
  const auto r = i % n;
  return r < 0 ? r + n : r;
}

}  // namespace

template <typename T>
void roll_into(std::span<const T> src, const GridSpec& grid, std::span<const std::int64_t> shifts,
               std::span<T> dst) {
  const int rank = grid.rank();
  if (static_cast<int>(shifts.size()) != rank) throw ArgumentError("roll: one shift per axis required");
  if (src.size() != grid.size() || dst.size() != grid.size()) throw ArgumentError("roll: size mismatch");

  // Source index along each axis for every destination index.
  std::array<std::vector<std::size_t>, kMaxRank> source_offset;
  for (int a = 0; a < rank; ++a) {
    const auto n = grid.extent(a);
    auto& table = source_offset[static_cast<std::size_t>(a)];
    table.resize(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) {
      table[static_cast<std::size_t>(j)] =
          static_cast<std::size_t>(wrap(j - shifts[static_cast<std::size_t>(a)], n)) * grid.stride(a);
    }
  }

  const auto last = static_cast<std::size_t>(rank - 1);
  const auto n_last = static_cast<std::size_t>(grid.extent(rank - 1));
  const auto& inner = source_offset[last];
  std::size_t out = 0;
  if (rank == 2) {
    for (std::int64_t i = 0; i < grid.extent(0); ++i) {
      const auto base = source_offset[0][static_cast<std::size_t>(i)];
      for (std::size_t k = 0; k < n_last; ++k) dst[out++] = src[base + inner[k]];
    }
  } else {
    for (std::int64_t i = 0; i < grid.extent(0); ++i) {
      const auto b0 = source_offset[0][static_cast<std::size_t>(i)];
      for (std::int64_t j = 0; j < grid.extent(1); ++j) {
        const auto base = b0 + source_offset[1][static_cast<std::size_t>(j)];
        for (std::size_t k = 0; k < n_last; ++k) dst[out++] = src[base + inner[k]];
      }
    }
  }
}

template <typename T>
Field<T> roll(const Field<T>& f, std::span<const std::int64_t> shifts) {
  Field<T> out(f.grid());
  roll_into<T>(f.values(), f.grid(), shifts, out.values());
  return out;
}

template <typename T>
Field<T> roll(const Field<T>& f, int axis, std::int64_t shift) {
  if (axis < 0 || axis >= f.grid().rank()) {
    throw ArgumentError("roll: axis " + std::to_string(axis) + " out of range for rank " +
                        std::to_string(f.grid().rank()));
  }
  std::array<std::int64_t, kMaxRank> shifts{0, 0, 0};
  shifts[static_cast<std::size_t>(axis)] = shift;
  return roll(f, std::span<const std::int64_t>(shifts.data(), static_cast<std::size_t>(f.grid().rank())));
}

double l2_norm(const ComplexField& f) {
  double sum = 0.0;
  for (const auto& z : f.values()) sum += std::norm(z);
  return std::sqrt(sum * f.grid().cell_volume());
}

ComplexField to_complex(const RealField& f) {
  ComplexField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = Complex(f[i], 0.0);
  return out;
}

RealField squared_modulus(const ComplexField& f) {
  RealField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = std::norm(f[i]);
  return out;
}

template <typename T>
bool all_finite(const Field<T>& f) {
  for (const auto& v : f.values()) {
    if constexpr (std::is_same_v<T, Complex>) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    } else {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void require_same_grid(const GridSpec& a, const GridSpec& b, std::string_view context) {
  if (!(a == b)) {
    throw ArgumentError(std::string(context) + ": grid mismatch (" + a.describe() + " vs " +
                        b.describe() + ")");
  }
}

template class Field<double>;
template class Field<Complex>;
template Field<double> roll(const Field<double>&, int, std::int64_t);
template Field<Complex> roll(const Field<Complex>&, int, std::int64_t);
template Field<double> roll(const Field<double>&, std::span<const std::int64_t>);
template Field<Complex> roll(const Field<Complex>&, std::span<const std::int64_t>);
template void roll_into(std::span<const double>, const GridSpec&, std::span<const std::int64_t>,
                        std::span<double>);
template void roll_into(std::span<const Complex>, const GridSpec&, std::span<const std::int64_t>,
                        std::span<Complex>);
template bool all_finite(const Field<double>&);
template bool all_finite(const Field<Complex>&);

}  // namespace wavecast
