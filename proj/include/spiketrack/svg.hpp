// SPDX-License-Identifier: Apache-2.0
//
// Minimal static SVG plots: axes, polylines, scatter markers and circles.
#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spiketrack/vec2.hpp"

namespace spiketrack::svg {

struct Series {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<Vec2> points;
  bool markers = true;
  bool dashed = false;
};

struct Circle {
  Vec2 center;
  double radius;
  std::string color;
  bool dashed = false;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<Circle> circles;
  double width = 640;
  double height = 420;
  bool equal_aspect = false;
};

namespace detail {

inline std::string num(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

inline std::string escape(const std::string& in) {
  std::string out;
  for (char c : in) {
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

inline void write(std::ostream& os, const Plot& p) {
  double x0 = std::numeric_limits<double>::max(), x1 = -x0, y0 = x0, y1 = -x0;
  auto grow = [&](double x, double y) {
    x0 = std::min(x0, x); x1 = std::max(x1, x);
    y0 = std::min(y0, y); y1 = std::max(y1, y);
  };
  for (const auto& s : p.series) for (const auto& q : s.points) grow(q.x, q.y);
  for (const auto& c : p.circles) {
    grow(c.center.x - c.radius, c.center.y - c.radius);
    grow(c.center.x + c.radius, c.center.y + c.radius);
  }
  if (x0 > x1) { x0 = 0; x1 = 1; y0 = 0; y1 = 1; }
  if (x1 - x0 < 1e-12) { x0 -= 0.5; x1 += 0.5; }
  if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }

  const double ml = 70, mr = 20, mt = 40, mb = 50;
  const double pw = p.width - ml - mr, ph = p.height - mt - mb;
  double sx = pw / (x1 - x0), sy = ph / (y1 - y0);
  if (p.equal_aspect) sx = sy = std::min(sx, sy);
  auto X = [&](double x) { return ml + (x - x0) * sx; };
  auto Y = [&](double y) { return mt + ph - (y - y0) * sy; };
  using detail::num;

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(p.width) << "\" height=\""
     << num(p.height) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(p.width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << detail::escape(p.title) << "</text>\n";
  os << "<line x1=\"" << num(ml) << "\" y1=\"" << num(mt + ph) << "\" x2=\"" << num(ml + pw)
     << "\" y2=\"" << num(mt + ph) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << num(ml) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(ml)
     << "\" y2=\"" << num(mt + ph) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    os << "<text x=\"" << num(X(xv)) << "\" y=\"" << num(mt + ph + 16)
       << "\" text-anchor=\"middle\" font-size=\"11\">" << num(xv) << "</text>\n";
    os << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(Y(yv) + 4)
       << "\" text-anchor=\"end\" font-size=\"11\">" << num(yv) << "</text>\n";
  }
  os << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(p.height - 10)
     << "\" text-anchor=\"middle\" font-size=\"12\">" << detail::escape(p.x_label) << "</text>\n";
  os << "<text x=\"14\" y=\"" << num(mt + ph / 2) << "\" font-size=\"12\" transform=\"rotate(-90 14 "
     << num(mt + ph / 2) << ")\" text-anchor=\"middle\">" << detail::escape(p.y_label)
     << "</text>\n";

  for (const auto& c : p.circles) {
    os << "<circle cx=\"" << num(X(c.center.x)) << "\" cy=\"" << num(Y(c.center.y)) << "\" r=\""
       << num(c.radius * sx) << "\" fill=\"none\" stroke=\"" << c.color << "\""
       << (c.dashed ? " stroke-dasharray=\"4 3\"" : "") << "/>\n";
  }
  double ly = mt + 4;
  for (const auto& s : p.series) {
    if (s.points.size() > 1) {
      os << "<polyline fill=\"none\" stroke=\"" << s.color << "\""
         << (s.dashed ? " stroke-dasharray=\"5 3\"" : "") << " points=\"";
      for (const auto& q : s.points) os << num(X(q.x)) << ',' << num(Y(q.y)) << ' ';
      os << "\"/>\n";
    }
    if (s.markers) {
      for (const auto& q : s.points) {
        os << "<circle cx=\"" << num(X(q.x)) << "\" cy=\"" << num(Y(q.y)) << "\" r=\"2.5\" fill=\""
           << s.color << "\"/>\n";
      }
    }
    if (!s.label.empty()) {
      os << "<text x=\"" << num(ml + pw - 4) << "\" y=\"" << num(ly + 10)
         << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << s.color << "\">"
         << detail::escape(s.label) << "</text>\n";
      ly += 14;
    }
  }
  os << "</svg>\n";
}

inline std::string to_string(const Plot& p) {
  std::ostringstream s;
  write(s, p);
  return s.str();
}

}  // namespace spiketrack::svg
