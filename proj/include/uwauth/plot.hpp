#pragma once

// Self-contained SVG line chart with a log10 y axis.

#include <iosfwd>
#include <string>
#include <vector>

namespace uwauth::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LogPlotSpec {
  std::string title;
  std::string x_label = "alpha";
  std::string y_label = "epsilon";
  double floor = 1e-6;  // values at or below this (including 0) are drawn on it
};

void write_log_plot_svg(std::ostream& os, const std::vector<Series>& series, const LogPlotSpec& spec);

}  // namespace uwauth::plot
