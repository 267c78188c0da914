#pragma once

#include <string>
#include <vector>

namespace heatcast::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool markers = false;  // circles instead of a polyline
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 400;
  // Optional horizontal reference line (e.g. zero for correlograms).
  bool show_zero = false;
};

// Minimal standalone SVG document. Non-finite points are skipped; output is
// a pure function of the inputs.
std::string render(const Chart& chart, const std::vector<Series>& series);

}  // namespace heatcast::svg
