#include "uwauth/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include "uwauth/errors.hpp"
#include "uwauth/util.hpp"

namespace uwauth::plot {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 200.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

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

std::string num(double v) {
  // two decimals are plenty for pixel coordinates
  return format_double(std::round(v * 100.0) / 100.0);
}

}  // namespace

void write_log_plot_svg(std::ostream& os, const std::vector<Series>& series, const LogPlotSpec& spec) {
  if (!(spec.floor > 0.0)) throw DomainError("plot floor must be positive");
  double x_lo = INFINITY, x_hi = -INFINITY, y_hi = spec.floor;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw InputShapeError("series '" + s.label + "' has unequal x and y");
    for (double x : s.x) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
    }
    for (double y : s.y)
      if (std::isfinite(y)) y_hi = std::max(y_hi, y);
  }
  if (!std::isfinite(x_lo)) {
    x_lo = 0.0;
    x_hi = 1.0;
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  const int decade_lo = static_cast<int>(std::floor(std::log10(spec.floor)));
  int decade_hi = static_cast<int>(std::ceil(std::log10(y_hi)));
  if (decade_hi <= decade_lo) decade_hi = decade_lo + 1;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) {
    const double ly = std::log10(std::max(y, spec.floor));
    return kTop + (decade_hi - ly) / static_cast<double>(decade_hi - decade_lo) * plot_h;
  };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(spec.title) << "</text>\n";

  for (int d = decade_lo; d <= decade_hi; ++d) {
    const double y = py(std::pow(10.0, d));
    os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft + plot_w) << "\" y2=\""
       << num(y) << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">1e" << d
       << "</text>\n";
  }
  const int x_ticks = 10;
  for (int t = 0; t <= x_ticks; ++t) {
    const double x = x_lo + (x_hi - x_lo) * t / x_ticks;
    os << "<line x1=\"" << num(px(x)) << "\" y1=\"" << num(kTop + plot_h) << "\" x2=\"" << num(px(x)) << "\" y2=\""
       << num(kTop + plot_h + 4) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(px(x)) << "\" y=\"" << num(kTop + plot_h + 18) << "\" text-anchor=\"middle\">"
       << format_double(std::round(x * 100.0) / 100.0) << "</text>\n";
  }
  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(plot_w) << "\" height=\""
     << num(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << num(kHeight - 12)
     << "\" text-anchor=\"middle\">" << escape(spec.x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << num(kTop + plot_h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(spec.y_label) << " (log scale)</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % kPalette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t j = 0; j < s.x.size(); ++j) os << (j ? " " : "") << num(px(s.x[j])) << ',' << num(py(s.y[j]));
    os << "\"/>\n";
    for (std::size_t j = 0; j < s.x.size(); ++j)
      os << "<circle cx=\"" << num(px(s.x[j])) << "\" cy=\"" << num(py(s.y[j])) << "\" r=\"2.5\" fill=\"" << color
         << "\"/>\n";
    const double ly = kTop + 14.0 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << num(kWidth - kRight + 15) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
       << num(kWidth - kRight + 40) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(kWidth - kRight + 46) << "\" y=\"" << num(ly) << "\">" << escape(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace uwauth::plot
