// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "spiketrack/image.hpp"

namespace spiketrack {

struct Component {
  std::size_t area = 0;
  double sum_x = 0.0;
  double sum_y = 0.0;
  std::size_t min_x = 0, min_y = 0, max_x = 0, max_y = 0;

  double centroid_x() const { return sum_x / double(area); }
  double centroid_y() const { return sum_y / double(area); }
};

/// 8-connected labeling of white pixels. labels[i] is 0 for black pixels and
/// 1 + component index otherwise. Components are numbered in raster order of
/// their first pixel.
struct Labeling {
  std::vector<std::uint32_t> labels;
  std::vector<Component> components;
};

inline Labeling label_components(const BinaryImage& img) {
  const std::size_t w = img.width(), h = img.height();
  Labeling out;
  out.labels.assign(w * h, 0);
  const auto& px = img.pixels();
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < w * h; ++start) {
    if (!px[start] || out.labels[start]) continue;
    const auto label = static_cast<std::uint32_t>(out.components.size() + 1);
    Component c;
    c.min_x = c.max_x = start % w;
    c.min_y = c.max_y = start / w;
    out.labels[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t x = i % w, y = i / w;
      ++c.area;
      c.sum_x += double(x);
      c.sum_y += double(y);
      c.min_x = std::min(c.min_x, x);
      c.max_x = std::max(c.max_x, x);
      c.min_y = std::min(c.min_y, y);
      c.max_y = std::max(c.max_y, y);
      const std::size_t y0 = y > 0 ? y - 1 : 0, y1 = y + 1 < h ? y + 1 : y;
      const std::size_t x0 = x > 0 ? x - 1 : 0, x1 = x + 1 < w ? x + 1 : x;
      for (std::size_t ny = y0; ny <= y1; ++ny) {
        for (std::size_t nx = x0; nx <= x1; ++nx) {
          const std::size_t j = ny * w + nx;
          if (px[j] && !out.labels[j]) {
            out.labels[j] = label;
            stack.push_back(j);
          }
        }
      }
    }
    out.components.push_back(c);
  }
  return out;
}

}  // namespace spiketrack
