// svg.hpp
//
// Small deterministic SVG chart writer: line charts and histogram+CDF
// views. Figures are rendered from plain numeric series so that every SVG
// is regenerable from its CSV alone.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrc/csv.hpp"

namespace mrc::svg {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

namespace detail {

inline const char* palette(int i) {
  static const char* colors[] = {"#1f6fb2", "#d1495b", "#2e933c", "#7b5ea7", "#c77d2e", "#3a3a3a"};
  return colors[i % 6];
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Frame {
  double x0 = 64, y0 = 24, w = 520, h = 360;  // plot area
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
  double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

inline void axes(std::ostringstream& os, const Frame& f, const std::string& xlabel,
                 const std::string& ylabel) {
  os << "<rect x='" << num(f.x0) << "' y='" << num(f.y0) << "' width='" << num(f.w) << "' height='"
     << num(f.h) << "' fill='none' stroke='#444' stroke-width='1'/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = f.xmin + (f.xmax - f.xmin) * t / 5.0;
    const double yv = f.ymin + (f.ymax - f.ymin) * t / 5.0;
    os << "<line x1='" << num(f.px(xv)) << "' y1='" << num(f.y0 + f.h) << "' x2='" << num(f.px(xv))
       << "' y2='" << num(f.y0 + f.h + 5) << "' stroke='#444'/>\n";
    os << "<text x='" << num(f.px(xv)) << "' y='" << num(f.y0 + f.h + 18)
       << "' font-size='11' text-anchor='middle' fill='#222'>" << tick_label(xv) << "</text>\n";
    os << "<line x1='" << num(f.x0 - 5) << "' y1='" << num(f.py(yv)) << "' x2='" << num(f.x0)
       << "' y2='" << num(f.py(yv)) << "' stroke='#444'/>\n";
    os << "<text x='" << num(f.x0 - 8) << "' y='" << num(f.py(yv) + 4)
       << "' font-size='11' text-anchor='end' fill='#222'>" << tick_label(yv) << "</text>\n";
    if (t > 0) {
      os << "<line x1='" << num(f.x0) << "' y1='" << num(f.py(yv)) << "' x2='" << num(f.x0 + f.w)
         << "' y2='" << num(f.py(yv)) << "' stroke='#ddd' stroke-width='0.5'/>\n";
    }
  }
  os << "<text x='" << num(f.x0 + f.w / 2) << "' y='" << num(f.y0 + f.h + 36)
     << "' font-size='12' text-anchor='middle' fill='#000'>" << xlabel << "</text>\n";
  os << "<text x='16' y='" << num(f.y0 + f.h / 2)
     << "' font-size='12' text-anchor='middle' fill='#000' transform='rotate(-90 16 "
     << num(f.y0 + f.h / 2) << ")'>" << ylabel << "</text>\n";
}

}  // namespace detail

inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& xlabel, const std::string& ylabel,
                             const std::vector<Series>& series) {
  if (series.empty()) throw std::invalid_argument("write_line_chart: no series");
  detail::Frame f;
  f.xmin = 1e300;
  f.xmax = -1e300;
  f.ymin = 1e300;
  f.ymax = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      f.xmin = std::min(f.xmin, s.x[i]);
      f.xmax = std::max(f.xmax, s.x[i]);
      f.ymin = std::min(f.ymin, s.y[i]);
      f.ymax = std::max(f.ymax, s.y[i]);
    }
  if (f.xmax <= f.xmin) f.xmax = f.xmin + 1;
  const double pad = 0.06 * (f.ymax - f.ymin + 1e-12);
  f.ymin -= pad;
  f.ymax += pad;
  if (f.ymax <= f.ymin) f.ymax = f.ymin + 1;

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='640' height='440' viewBox='0 0 640 440'>\n";
  os << "<rect width='640' height='440' fill='white'/>\n";
  os << "<text x='320' y='16' font-size='13' text-anchor='middle' fill='#000'>" << title << "</text>\n";
  detail::axes(os, f, xlabel, ylabel);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    os << "<polyline fill='none' stroke='" << detail::palette(static_cast<int>(k))
       << "' stroke-width='1.8' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << detail::num(f.px(s.x[i])) << "," << detail::num(f.py(s.y[i])) << " ";
    os << "'/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << "<circle cx='" << detail::num(f.px(s.x[i])) << "' cy='" << detail::num(f.py(s.y[i]))
         << "' r='2.6' fill='" << detail::palette(static_cast<int>(k)) << "'/>\n";
    os << "<rect x='" << detail::num(f.x0 + f.w - 150) << "' y='" << detail::num(f.y0 + 8 + 18.0 * k)
       << "' width='14' height='4' fill='" << detail::palette(static_cast<int>(k)) << "'/>\n";
    os << "<text x='" << detail::num(f.x0 + f.w - 130) << "' y='" << detail::num(f.y0 + 14 + 18.0 * k)
       << "' font-size='11' fill='#222'>" << s.name << "</text>\n";
  }
  os << "</svg>\n";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << os.str();
}

// histogram with CDF overlay and a reference vertical line (the bound)
inline void write_gap_histogram(const std::string& path, const std::string& title,
                                const std::vector<double>& samples, double bound_line, int bins = 30) {
  if (samples.empty()) throw std::invalid_argument("write_gap_histogram: no samples");
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  double lo = std::min(sorted.front(), 0.0);
  double hi = std::max(sorted.back(), bound_line);
  const double span = (hi - lo) > 0 ? hi - lo : 1.0;
  lo -= 0.05 * span;
  hi += 0.05 * span;
  std::vector<int> counts(bins, 0);
  for (double v : sorted) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    ++counts[b];
  }
  int cmax = 1;
  for (int c : counts) cmax = std::max(cmax, c);

  detail::Frame f;
  f.xmin = lo;
  f.xmax = hi;
  f.ymin = 0;
  f.ymax = cmax * 1.08;
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='640' height='440' viewBox='0 0 640 440'>\n";
  os << "<rect width='640' height='440' fill='white'/>\n";
  os << "<text x='320' y='16' font-size='13' text-anchor='middle' fill='#000'>" << title << "</text>\n";
  detail::axes(os, f, "generalization gap", "frequency");
  const double bw = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) {
    if (counts[b] == 0) continue;
    const double x = lo + b * bw;
    os << "<rect x='" << detail::num(f.px(x)) << "' y='" << detail::num(f.py(counts[b])) << "' width='"
       << detail::num(f.px(x + bw) - f.px(x) - 0.5) << "' height='"
       << detail::num(f.py(0) - f.py(counts[b])) << "' fill='#1f6fb2' fill-opacity='0.65'/>\n";
  }
  // CDF on the right axis (scaled into the same frame)
  os << "<polyline fill='none' stroke='#d1495b' stroke-width='1.8' points='";
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = static_cast<double>(i + 1) / sorted.size();
    os << detail::num(f.px(sorted[i])) << "," << detail::num(f.py(cdf * cmax)) << " ";
  }
  os << "'/>\n";
  os << "<line x1='" << detail::num(f.px(bound_line)) << "' y1='" << detail::num(f.y0) << "' x2='"
     << detail::num(f.px(bound_line)) << "' y2='" << detail::num(f.y0 + f.h)
     << "' stroke='#2e933c' stroke-width='2' stroke-dasharray='6,4'/>\n";
  os << "<text x='" << detail::num(f.px(bound_line) - 4) << "' y='" << detail::num(f.y0 + 14)
     << "' font-size='11' text-anchor='end' fill='#2e933c'>bound</text>\n";
  os << "</svg>\n";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << os.str();
}

}  // namespace mrc::svg
