#include "heatcast/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "heatcast/csv.hpp"

namespace heatcast::svg {

namespace {

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

std::string fixed(double v, int digits = 2) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (lo == hi) lo -= 0.5, hi += 0.5;
  }
};

}  // namespace

std::string render(const Chart& chart, const std::vector<Series>& series) {
  constexpr double left = 70, right = 20, top = 40, bottom = 50;
  const double w = chart.width, h = chart.height;
  const double pw = w - left - right, ph = h - top - bottom;

  Range xr, yr;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        xr.add(s.x[i]);
        yr.add(s.y[i]);
      }
    }
  }
  if (chart.show_zero) yr.add(0.0);
  xr.finish();
  yr.finish();
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\"" << chart.height
    << "\" viewBox=\"0 0 " << chart.width << ' ' << chart.height << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fixed(w / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(chart.title) << "</text>\n";
  o << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(pw) << "\" height=\""
    << fixed(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double xv = xr.lo + (xr.hi - xr.lo) * k / 4.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * k / 4.0;
    o << "<text x=\"" << fixed(px(xv)) << "\" y=\"" << fixed(top + ph + 16)
      << "\" text-anchor=\"middle\" font-size=\"11\">" << csv::format(std::round(xv * 100) / 100) << "</text>\n";
    o << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(py(yv) + 4)
      << "\" text-anchor=\"end\" font-size=\"11\">" << csv::format(std::round(yv * 100) / 100) << "</text>\n";
  }
  o << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << fixed(h - 10)
    << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(chart.x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << fixed(top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << fixed(top + ph / 2) << ")\">" << escape(chart.y_label) << "</text>\n";
  if (chart.show_zero) {
    o << "<line x1=\"" << fixed(left) << "\" x2=\"" << fixed(left + pw) << "\" y1=\"" << fixed(py(0.0))
      << "\" y2=\"" << fixed(py(0.0)) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const auto n = std::min(s.x.size(), s.y.size());
    if (s.markers) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        o << "<circle cx=\"" << fixed(px(s.x[i])) << "\" cy=\"" << fixed(py(s.y[i])) << "\" r=\"2\" fill=\""
          << escape(s.color) << "\" fill-opacity=\"0.6\"/>\n";
      }
    } else {
      o << "<polyline fill=\"none\" stroke=\"" << escape(s.color) << "\" stroke-width=\"1.5\" points=\"";
      bool first = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        o << (first ? "" : " ") << fixed(px(s.x[i])) << ',' << fixed(py(s.y[i]));
        first = false;
      }
      o << "\"/>\n";
    }
    if (!s.label.empty()) {
      const double ly = top + 14 + 16.0 * static_cast<double>(k);
      o << "<rect x=\"" << fixed(left + pw - 150) << "\" y=\"" << fixed(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
        << escape(s.color) << "\"/>\n";
      o << "<text x=\"" << fixed(left + pw - 135) << "\" y=\"" << fixed(ly) << "\" font-size=\"11\">"
        << escape(s.label) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace heatcast::svg
