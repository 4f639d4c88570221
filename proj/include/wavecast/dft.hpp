#pragma once

#include <span>

#include "wavecast/field.hpp"

namespace wavecast {

// Unnormalized forward multi-dimensional DFT, exp(-2*pi*i*k*n/N) kernel on every axis.
ComplexField dft(const ComplexField& f);

// Inverse of dft, including the 1/N normalization.
ComplexField inverse_dft(const ComplexField& f);

// In-place 1D transform of a contiguous line. Power-of-two lengths take the radix-2 path.
void dft_line(std::span<Complex> line, bool inverse);

}  // namespace wavecast
