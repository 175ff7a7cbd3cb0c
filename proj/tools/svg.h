#pragma once

#include <string>
#include <utility>
#include <vector>

namespace zachvit::cli {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  bool dashed = false;
};

// Self-contained SVG line chart: axes with ticks, one polyline per series and
// a legend. Non-finite points are skipped.
std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series);

}  // namespace zachvit::cli
