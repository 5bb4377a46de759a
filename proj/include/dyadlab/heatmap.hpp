#pragma once

// SVG heatmap of a cooperation matrix. T runs left to right, S bottom to top.
// Each cell is one <rect class="tile ..."> carrying data-s / data-t /
// data-value; tiles inside the outlined region get the extra class
// "outlined" and a black stroke. Colors interpolate linearly in RGB between
// the two endpoints of HeatmapStyle.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "dyadlab/analysis.hpp"
#include "dyadlab/matrix.hpp"

namespace dyadlab {

struct Rgb {
  int r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline std::string to_hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

struct HeatmapStyle {
  Rgb low{0x44, 0x01, 0x54};   // value 0: purple
  Rgb high{0xfd, 0xe7, 0x25};  // value 1: yellow
  int tile = 24;               // px per cell
  bool outline_original = false;
  std::string title;
};

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline Rgb scale_color(double v, const HeatmapStyle& style) {
  v = std::clamp(v, 0.0, 1.0);
  auto lerp = [v](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * v)); };
  return {lerp(style.low.r, style.high.r), lerp(style.low.g, style.high.g), lerp(style.low.b, style.high.b)};
}

inline std::string render_heatmap(const CooperationMatrix& m, const HeatmapStyle& style = {}) {
  const GridSpec& g = m.grid();
  const int cols = static_cast<int>(g.t_count());
  const int rows = static_cast<int>(g.s_count());
  const int tile = style.tile;
  const int left = 48, top = style.title.empty() ? 16 : 36, legend = 72;
  const int plot_w = cols * tile, plot_h = rows * tile;
  const int width = left + plot_w + legend, height = top + plot_h + 48;
  const Region original = original_region();

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  if (!style.title.empty())
    os << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << xml_escape(style.title) << "</text>\n";

  os << "<g class=\"tiles\">\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Points s = g.s_at(i), t = g.t_at(i);
    const int col = static_cast<int>(g.index_of(g.s_min, t));
    const int row = rows - 1 - static_cast<int>((s - g.s_min) / g.step);
    const bool outlined = style.outline_original && original.contains(s, t);
    os << "<rect class=\"tile" << (outlined ? " outlined" : "") << "\" x=\"" << left + col * tile << "\" y=\""
       << top + row * tile << "\" width=\"" << tile << "\" height=\"" << tile << "\" fill=\""
       << to_hex(scale_color(m[i], style)) << '"';
    if (outlined) os << " stroke=\"#000000\" stroke-width=\"1\"";
    os << " data-s=\"" << s << "\" data-t=\"" << t << "\" data-value=\"" << format_value(m[i]) << "\"/>\n";
  }
  os << "</g>\n";

  // Axes: T along the bottom, S along the left.
  os << "<g class=\"axes\">\n";
  for (int c = 0; c < cols; ++c)
    os << "<text x=\"" << left + c * tile + tile / 2 << "\" y=\"" << top + plot_h + 14
       << "\" text-anchor=\"middle\">" << g.t_min + c * g.step << "</text>\n";
  for (int r = 0; r < rows; ++r)
    os << "<text x=\"" << left - 6 << "\" y=\"" << top + (rows - 1 - r) * tile + tile / 2 + 4
       << "\" text-anchor=\"end\">" << g.s_min + r * g.step << "</text>\n";
  os << "<text class=\"axis-label\" x=\"" << left + plot_w / 2 << "\" y=\"" << top + plot_h + 34
     << "\" text-anchor=\"middle\">T</text>\n"
     << "<text class=\"axis-label\" x=\"14\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\">S</text>\n"
     << "</g>\n";

  // Color bar, 0 at the bottom.
  constexpr int steps = 10;
  const int bar_x = left + plot_w + 16, bar_h = std::max(plot_h, 50);
  os << "<g class=\"legend\">\n";
  for (int k = 0; k < steps; ++k) {
    const double v = (k + 0.5) / steps;
    os << "<rect x=\"" << bar_x << "\" y=\"" << top + bar_h - (k + 1) * bar_h / steps << "\" width=\"14\" height=\""
       << bar_h / steps + 1 << "\" fill=\"" << to_hex(scale_color(v, style)) << "\"/>\n";
  }
  os << "<text x=\"" << bar_x + 18 << "\" y=\"" << top + bar_h << "\">0</text>\n"
     << "<text x=\"" << bar_x + 18 << "\" y=\"" << top + 10 << "\">1</text>\n"
     << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace dyadlab
