#pragma once

#include <string>
#include <utility>
#include <vector>

namespace archfit::svg {

/// Cell grid with a sequential color ramp; NaN cells stay blank. `marked` cells get an outline.
struct Heatmap {
  std::string title;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<double>> values;  // rows x cols
  std::vector<std::pair<int, int>> marked;
  bool higher_is_better = true;
  int decimals = 3;
};
std::string render(const Heatmap& map);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_y = false;
  bool zero_line = false;
};
std::string render(const LineChart& chart);

}  // namespace archfit::svg
