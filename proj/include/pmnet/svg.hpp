#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace pmnet::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

enum class Style { line, bars, points };

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  Style style = Style::line;
  bool identity_line = false;
};

namespace detail {

inline const char* colour(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f"};
  return palette[i % (sizeof palette / sizeof *palette)];
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

inline std::string render(const Chart& chart) {
  using namespace detail;
  const double W = 640, H = 420, L = 70, R = 150, T = 40, B = 55;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : chart.series) {
    for (double v : s.x) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
    for (double v : s.y) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (chart.style == Style::bars) xmin -= 0.5, xmax += 0.5, ymin = std::min(ymin, 0.0);
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double pad = 0.05 * (ymax - ymin);
  ymax += pad;
  if (ymin != 0.0) ymin -= pad;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(chart.title) + "</text>\n";
  out += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(W - R) + "\" y2=\"" +
         num(H - B) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(L) + "\" y1=\"" + num(T) + "\" x2=\"" + num(L) + "\" y2=\"" +
         num(H - B) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    out += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(H - B + 16) +
           "\" text-anchor=\"middle\">" + tick(xv) + "</text>\n";
    out += "<text x=\"" + num(L - 6) + "\" y=\"" + num(py(yv) + 4) + "\" text-anchor=\"end\">" +
           tick(yv) + "</text>\n";
  }
  out += "<text x=\"" + num((L + W - R) / 2) + "\" y=\"" + num(H - 12) +
         "\" text-anchor=\"middle\">" + escape(chart.x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + num((T + H - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num((T + H - B) / 2) + ")\">" + escape(chart.y_label) + "</text>\n";
  if (chart.identity_line) {
    const double lo = std::max(xmin, ymin), hi = std::min(xmax, ymax);
    out += "<line x1=\"" + num(px(lo)) + "\" y1=\"" + num(py(lo)) + "\" x2=\"" + num(px(hi)) +
           "\" y2=\"" + num(py(hi)) + "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  }

  const std::size_t groups = chart.series.size();
  for (std::size_t si = 0; si < groups; ++si) {
    const auto& s = chart.series[si];
    const char* c = colour(si);
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (chart.style == Style::line) {
      std::string pts;
      for (std::size_t i = 0; i < n; ++i) pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
      out += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1.5\" points=\"" +
             pts + "\"/>\n";
    } else if (chart.style == Style::points) {
      for (std::size_t i = 0; i < n; ++i) {
        out += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) +
               "\" r=\"2\" fill=\"" + c + "\" fill-opacity=\"0.6\"/>\n";
      }
    } else {
      const double slot = (px(1.0) - px(0.0)) * 0.8;
      const double bw = slot / static_cast<double>(groups);
      for (std::size_t i = 0; i < n; ++i) {
        const double x0 = px(s.x[i]) - slot / 2 + bw * static_cast<double>(si);
        const double y0 = py(std::max(0.0, s.y[i]));
        const double y1 = py(std::min(0.0, s.y[i]));
        out += "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(bw) +
               "\" height=\"" + num(y1 - y0) + "\" fill=\"" + c + "\"/>\n";
      }
    }
    const double ly = T + 18.0 * static_cast<double>(si);
    out += "<rect x=\"" + num(W - R + 12) + "\" y=\"" + num(ly) + "\" width=\"12\" height=\"12\" fill=\"" +
           c + "\"/>\n";
    out += "<text x=\"" + num(W - R + 30) + "\" y=\"" + num(ly + 10) + "\">" + escape(s.name) +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace pmnet::svg
