#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wavecast/field.hpp"

// Minimal hand-emitted SVG charts and PGM images. Output is a pure function of the input.
namespace wavecast::cli {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);
std::string svg_histogram(const std::string& title, const std::string& x_label, double lo, double hi,
                          const std::vector<std::size_t>& counts);

// 2D fields are returned as is; 3D fields are cut at the middle of axis 0.
RealField mid_slice(const RealField& f);

// Binary 8-bit graymap, min-max scaled; a uniform field maps to all zeros.
std::string pgm(const RealField& slice);

}  // namespace wavecast::cli
