#pragma once

#include <span>
#include <string>
#include <vector>

namespace ratio_forge {

struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 400;
};

// Plain SVG line chart. Output depends only on the arguments; non-finite
// points are skipped.
std::string render_line_chart(const ChartSpec& spec, std::span<const ChartSeries> series);

}  // namespace ratio_forge
