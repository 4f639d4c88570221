#include "wavecast/dft.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace wavecast {

namespace {

bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

void radix2(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // Twiddles are evaluated directly rather than by repeated multiplication to keep
    // the round-off independent of the transform length.
    std::vector<Complex> w(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      w[k] = Complex(std::cos(ang), std::sin(ang));
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * w[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

void direct(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{};
    for (std::size_t j = 0; j < n; ++j) {
      const auto phase = static_cast<double>((k * j) % n) / static_cast<double>(n);
      const double ang = sign * 2.0 * std::numbers::pi * phase;
      acc += a[j] * Complex(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  std::copy(out.begin(), out.end(), a.begin());
}

ComplexField transform(const ComplexField& f, bool inverse) {
  ComplexField out = f;
  const auto& g = f.grid();
  std::vector<Complex> line;
  for (int axis = 0; axis < g.rank(); ++axis) {
    const auto n = static_cast<std::size_t>(g.extent(axis));
    const auto stride = g.stride(axis);
    const std::size_t outer = g.size() / (n * stride);
    line.resize(n);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < stride; ++in) {
        const std::size_t base = o * n * stride + in;
        for (std::size_t j = 0; j < n; ++j) line[j] = out[base + j * stride];
        dft_line(line, inverse);
        for (std::size_t j = 0; j < n; ++j) out[base + j * stride] = line[j];
      }
    }
  }
  return out;
}

}  // namespace

void dft_line(std::span<Complex> line, bool inverse) {
  if (is_power_of_two(line.size())) {
    radix2(line, inverse);
  } else {
    direct(line, inverse);
  }
}

ComplexField dft(const ComplexField& f) { return transform(f, false); }

ComplexField inverse_dft(const ComplexField& f) {
  ComplexField out = transform(f, true);
  const double scale = 1.0 / static_cast<double>(f.size());
  for (auto& z : out.values()) z *= scale;
  return out;
}

}  // namespace wavecast
