#include "wavecast/cli/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "wavecast/errors.hpp"

namespace wavecast::cli {

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
const char* const kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string open_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                     const Frame& f) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
       "</text>\n";
  const double bx = kLeft, by = kHeight - kBottom, tx = kWidth - kRight;
  s += "<line x1=\"" + num(bx) + "\" y1=\"" + num(by) + "\" x2=\"" + num(tx) + "\" y2=\"" + num(by) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(bx) + "\" y1=\"" + num(by) + "\" x2=\"" + num(bx) + "\" y2=\"" + num(kTop) +
       "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0, yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(by + 16) + "\" text-anchor=\"middle\">" + num(xv) +
         "</text>\n";
    s += "<text x=\"" + num(bx - 6) + "\" y=\"" + num(f.py(yv) + 4) + "\" text-anchor=\"end\">" + num(yv) +
         "</text>\n";
  }
  s += "<text x=\"" + num((bx + tx) / 2) + "\" y=\"" + num(kHeight - 18) + "\" text-anchor=\"middle\">" +
       escape(x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((by + kTop) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num((by + kTop) / 2) + ")\">" + escape(y_label) + "</text>\n";
  return s;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  Frame f{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      f.x0 = std::min(f.x0, s.x[i]);
      f.x1 = std::max(f.x1, s.x[i]);
      f.y0 = std::min(f.y0, s.y[i]);
      f.y1 = std::max(f.y1, s.y[i]);
    }
  }
  if (!std::isfinite(f.x0)) f = {0, 1, 0, 1};
  widen(f.x0, f.x1);
  widen(f.y0, f.y1);
  std::string out = open_svg(title, x_label, y_label, f);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = kColours[k % std::size(kColours)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts += num(f.px(s.x[i])) + "," + num(f.py(s.y[i])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"2\" points=\"" + pts +
           "\"/>\n";
    out += "<text x=\"" + num(kWidth - kRight - 4) + "\" y=\"" + num(kTop + 14 * (static_cast<double>(k) + 1)) +
           "\" text-anchor=\"end\" fill=\"" + colour + "\">" + escape(s.label) + "</text>\n";
  }
  return out + "</svg>\n";
}

std::string svg_histogram(const std::string& title, const std::string& x_label, double lo, double hi,
                          const std::vector<std::size_t>& counts) {
  double peak = 0;
  for (auto c : counts) peak = std::max(peak, static_cast<double>(c));
  Frame f{lo, hi, 0.0, peak};
  widen(f.x0, f.x1);
  widen(f.y0, f.y1);
  std::string out = open_svg(title, x_label, "count", f);
  const double w = (f.x1 - f.x0) / static_cast<double>(std::max<std::size_t>(1, counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double x = f.x0 + w * static_cast<double>(i);
    const double top = f.py(static_cast<double>(counts[i])), base = f.py(0.0);
    out += "<rect x=\"" + num(f.px(x)) + "\" y=\"" + num(top) + "\" width=\"" + num(f.px(x + w) - f.px(x)) +
           "\" height=\"" + num(base - top) + "\" fill=\"#1f77b4\" stroke=\"white\"/>\n";
  }
  return out + "</svg>\n";
}

RealField mid_slice(const RealField& f) {
  const auto& g = f.grid();
  if (g.rank() == 2) return f;
  const std::int64_t dims[] = {g.extent(1), g.extent(2)};
  RealField out{GridSpec(dims)};
  const std::size_t base = static_cast<std::size_t>(g.extent(0) / 2) * g.stride(0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f[base + i];
  return out;
}

std::string pgm(const RealField& slice) {
  const auto& g = slice.grid();
  if (g.rank() != 2) throw ArgumentError("pgm needs a 2D field");
  const auto [lo, hi] = std::minmax_element(slice.values().begin(), slice.values().end());
  const double mn = *lo, span = *hi - *lo;
  std::string out = "P5\n" + std::to_string(g.extent(1)) + " " + std::to_string(g.extent(0)) + "\n255\n";
  for (double v : slice.values()) {
    const double u = span > 0.0 ? (v - mn) / span : 0.0;
    out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * u)));
  }
  return out;
}

}  // namespace wavecast::cli
