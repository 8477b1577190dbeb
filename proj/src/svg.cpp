#include "archfit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace archfit::svg {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Viridis-like ramp through five anchors.
std::string ramp(double t) {
  static const double anchors[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(t));
  const double f = t - i;
  int rgb[3];
  for (int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(anchors[i][c] + f * (anchors[i + 1][c] - anchors[i][c])));
  return fmt::format("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2]);
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string header(int w, int h) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      w, h);
}

}  // namespace

std::string render(const Heatmap& map) {
  const int rows = static_cast<int>(map.values.size());
  const int cols = rows ? static_cast<int>(map.values.front().size()) : 0;
  const int cell = 44, left = 70, top = 46;
  const int w = left + cols * cell + 20, h = top + rows * cell + 50;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : map.values)
    for (double v : r)
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  const double span = hi > lo ? hi - lo : 1.0;

  std::string out = header(w, h);
  out += fmt::format("<text x=\"{}\" y=\"20\" font-size=\"14\" font-weight=\"bold\">{}</text>\n", left, escape(map.title));
  for (int c = 0; c < cols; ++c) {
    const std::string label = c < static_cast<int>(map.col_labels.size()) ? map.col_labels[static_cast<std::size_t>(c)] : "";
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + c * cell + cell / 2, top - 6, escape(label));
  }
  for (int r = 0; r < rows; ++r) {
    const std::string label = r < static_cast<int>(map.row_labels.size()) ? map.row_labels[static_cast<std::size_t>(r)] : "";
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 6, top + r * cell + cell / 2 + 4, escape(label));
    for (int c = 0; c < cols; ++c) {
      const double v = map.values[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      if (!std::isfinite(v)) continue;
      double t = (v - lo) / span;
      if (!map.higher_is_better) t = 1.0 - t;
      const int x = left + c * cell, y = top + r * cell;
      out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", x, y, cell, cell, ramp(t));
      out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"9\" fill=\"{}\">{:.{}f}</text>\n", x + cell / 2,
                         y + cell / 2 + 3, t > 0.6 ? "black" : "white", v, map.decimals);
    }
  }
  for (const auto& [r, c] : map.marked) {
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"red\" stroke-width=\"2.5\"/>\n",
                       left + c * cell, top + r * cell, cell, cell);
  }
  out += "</svg>\n";
  return out;
}

std::string render(const LineChart& chart) {
  const int w = 640, h = 400, left = 70, right = 150, top = 36, bottom = 50;
  const int pw = w - left - right, ph = h - top - bottom;
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  auto ty = [&](double y) { return chart.log_y ? std::log10(std::max(y, 1e-12)) : y; };
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, ty(s.y[i]));
      yhi = std::max(yhi, ty(s.y[i]));
    }
  }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  if (chart.zero_line && !chart.log_y) ylo = std::min(ylo, 0.0), yhi = std::max(yhi, 0.0);
  if (xhi <= xlo) xhi = xlo + 1;
  if (yhi <= ylo) yhi = ylo + 1;
  auto px = [&](double x) { return left + (x - xlo) / (xhi - xlo) * pw; };
  auto py = [&](double y) { return top + ph - (ty(y) - ylo) / (yhi - ylo) * ph; };

  std::string out = header(w, h);
  out += fmt::format("<text x=\"{}\" y=\"20\" font-size=\"14\" font-weight=\"bold\">{}</text>\n", left, escape(chart.title));
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", left, top, pw, ph);
  for (int i = 0; i <= 4; ++i) {
    const double yv = ylo + (yhi - ylo) * i / 4.0;
    const double y = top + ph - ph * i / 4.0;
    const std::string label = chart.log_y ? fmt::format("1e{:.1f}", yv) : fmt::format("{:.3g}", yv);
    out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{}</text>\n", left - 5, y + 4, label);
    const double xv = xlo + (xhi - xlo) * i / 4.0;
    out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:.3g}</text>\n", left + pw * i / 4.0, top + ph + 16, xv);
  }
  if (chart.zero_line && !chart.log_y && ylo < 0 && yhi > 0) {
    out += fmt::format("<line x1=\"{}\" x2=\"{}\" y1=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n", left,
                       left + pw, py(0.0), py(0.0));
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2, h - 12, escape(chart.x_label));
  out += fmt::format("<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n", top + ph / 2,
                     top + ph / 2, escape(chart.y_label));
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const Series& s = chart.series[k];
    const char* color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts += fmt::format("{:.1f},{:.1f} ", px(s.x[i]), py(s.y[i]));
    }
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, pts);
    const int ly = top + 12 + static_cast<int>(k) * 16;
    out += fmt::format("<line x1=\"{}\" x2=\"{}\" y1=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n", left + pw + 10,
                       left + pw + 28, ly - 4, ly - 4, color);
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", left + pw + 32, ly, escape(s.name));
  }
  out += "</svg>\n";
  return out;
}

}  // namespace archfit::svg
