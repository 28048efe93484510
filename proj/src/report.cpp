// Standalone SVG bar charts; no renderer or plotting dependency.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "vac/harness.hpp"

namespace vac {

namespace {

constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2",
                                    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

std::string escape(const std::string& s) {
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

}  // namespace

std::string bar_chart_svg(const Comparison& comparison, const std::string& title) {
  if (comparison.groups.empty()) throw ConfigError("nothing to plot");
  std::vector<std::string> categories;
  std::vector<std::vector<double>> values(comparison.groups.size());
  for (const auto& [kind, stat] : comparison.groups.front().per_kind) categories.emplace_back(to_string(kind));
  categories.emplace_back("mCE");
  for (std::size_t g = 0; g < comparison.groups.size(); ++g) {
    for (const auto& [kind, stat] : comparison.groups[g].per_kind) values[g].push_back(stat.mean);
    values[g].push_back(comparison.groups[g].mce.mean);
  }
  double top = 0.0;
  for (const auto& row : values)
    for (double v : row) top = std::max(top, v);
  top = top > 0 ? std::min(1.0, std::ceil(top * 10.0) / 10.0) : 1.0;

  const int groups = static_cast<int>(comparison.groups.size());
  const int bar = 10, gap = 14, left = 56, plot_h = 260, top_margin = 40, bottom = 110;
  const int slot = groups * bar + gap;
  const int width = left + slot * static_cast<int>(categories.size()) + 20 + 140;
  const int height = top_margin + plot_h + bottom;

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(1);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"22\" font-size=\"14\">" << escape(title) << "</text>\n";

  for (int t = 0; t <= 5; ++t) {
    const double v = top * t / 5.0;
    const double y = top_margin + plot_h - plot_h * v / top;
    svg << "<line x1=\"" << left << "\" x2=\"" << width - 150 << "\" y1=\"" << y << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << 100 * v << "%</text>\n";
  }

  for (std::size_t c = 0; c < categories.size(); ++c) {
    const int x0 = left + static_cast<int>(c) * slot + gap / 2;
    for (int g = 0; g < groups; ++g) {
      const double v = values[g][c];
      const double h = plot_h * std::clamp(v / top, 0.0, 1.0);
      svg << "<rect x=\"" << x0 + g * bar << "\" y=\"" << top_margin + plot_h - h << "\" width=\"" << bar - 1
          << "\" height=\"" << h << "\" fill=\"" << kPalette[g % 10] << "\"><title>"
          << escape(comparison.groups[g].label) << " " << escape(categories[c]) << ": " << 100 * v
          << "%</title></rect>\n";
    }
    const double lx = x0 + groups * bar / 2.0;
    const int ly = top_margin + plot_h + 8;
    svg << "<text x=\"" << lx << "\" y=\"" << ly << "\" text-anchor=\"end\" transform=\"rotate(-55 " << lx << ' '
        << ly << ")\">" << escape(categories[c]) << "</text>\n";
  }

  const int lx = width - 140;
  for (int g = 0; g < groups; ++g) {
    const int ly = top_margin + 14 * g;
    svg << "<rect x=\"" << lx << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[g % 10]
        << "\"/>\n";
    svg << "<text x=\"" << lx + 14 << "\" y=\"" << ly + 9 << "\">" << escape(comparison.groups[g].label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace vac
