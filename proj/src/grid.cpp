#include "wavecast/grid.hpp"

#include <cmath>
#include <sstream>

#include "wavecast/errors.hpp"

namespace wavecast {

GridSpec::GridSpec(std::span<const std::int64_t> dims, std::span<const double> spacing,
                   Boundary boundary)
    : boundary_(boundary) {
  if (dims.size() != 2 && dims.size() != 3) {
    throw ArgumentError("grid rank must be 2 or 3, got " + std::to_string(dims.size()));
  }
  if (!spacing.empty() && spacing.size() != dims.size()) {
    throw ArgumentError("grid spacing count does not match rank");
  }
  rank_ = static_cast<int>(dims.size());
  size_ = 1;
  for (int a = 0; a < rank_; ++a) {
    const auto n = dims[static_cast<std::size_t>(a)];
    if (n < kMinExtent) {
      throw ArgumentError("grid extent " + std::to_string(n) + " on axis " + std::to_string(a) +
                          " is below the minimum of " + std::to_string(kMinExtent));
    }
    dims_[static_cast<std::size_t>(a)] = n;
    size_ *= static_cast<std::size_t>(n);
    if (!spacing.empty()) {
      const double h = spacing[static_cast<std::size_t>(a)];
      if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("grid spacing must be positive");
      spacing_[static_cast<std::size_t>(a)] = h;
    }
  }
  std::size_t s = 1;
  for (int a = rank_ - 1; a >= 0; --a) {
    strides_[static_cast<std::size_t>(a)] = s;
    s *= static_cast<std::size_t>(dims_[static_cast<std::size_t>(a)]);
  }
}

std::vector<std::int64_t> GridSpec::dims() const {
  return {dims_.begin(), dims_.begin() + rank_};
}

std::vector<double> GridSpec::spacings() const {
  return {spacing_.begin(), spacing_.begin() + rank_};
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < rank_; ++a) v *= spacing_[static_cast<std::size_t>(a)];
  return v;
}

std::size_t GridSpec::flat_index(std::span<const std::int64_t> coords) const {
  std::size_t idx = 0;
  for (int a = 0; a < rank_; ++a) {
    idx += static_cast<std::size_t>(coords[static_cast<std::size_t>(a)]) *
           strides_[static_cast<std::size_t>(a)];
  }
  return idx;
}

std::array<std::int64_t, kMaxRank> GridSpec::coords(std::size_t flat) const {
  std::array<std::int64_t, kMaxRank> c{0, 0, 0};
  for (int a = 0; a < rank_; ++a) {
    const auto s = strides_[static_cast<std::size_t>(a)];
    c[static_cast<std::size_t>(a)] = static_cast<std::int64_t>(flat / s);
    flat %= s;
  }
  return c;
}

std::string GridSpec::describe() const {
  std::ostringstream os;
  for (int a = 0; a < rank_; ++a) {
    if (a) os << 'x';
    os << dims_[static_cast<std::size_t>(a)];
  }
  return os.str();
}

bool GridSpec::operator==(const GridSpec& other) const {
  if (rank_ != other.rank_ || boundary_ != other.boundary_) return false;
  for (int a = 0; a < rank_; ++a) {
    const auto i = static_cast<std::size_t>(a);
    if (dims_[i] != other.dims_[i] || spacing_[i] != other.spacing_[i]) return false;
  }
  return true;
}

}  // namespace wavecast
