// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "spiketrack/error.hpp"

namespace spiketrack {

/// Dense binary image, row-major, one byte per pixel holding 0 or 1.
class BinaryImage {
 public:
  BinaryImage() = default;
  BinaryImage(std::size_t width, std::size_t height)
      : width_(width), height_(height), pixels_(width * height, 0) {}
  BinaryImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != width_ * height_) {
      fail(ErrorKind::parameter, "pixel buffer does not match image dimensions");
    }
    for (auto& p : pixels_) p = p ? 1 : 0;
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
  void set(std::size_t x, std::size_t y, bool v) { pixels_[y * width_ + x] = v ? 1 : 0; }

  const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }
  std::vector<std::uint8_t>& pixels() noexcept { return pixels_; }

  std::size_t count_white() const {
    std::size_t n = 0;
    for (auto p : pixels_) n += p;
    return n;
  }

  bool same_shape(const BinaryImage& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Intersection over union of the white sets of two equally sized images.
inline double intersection_over_union(const BinaryImage& a, const BinaryImage& b) {
  if (!a.same_shape(b)) fail(ErrorKind::parameter, "iou: image shapes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a.pixels()[i] & b.pixels()[i];
    uni += a.pixels()[i] | b.pixels()[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// 8-bit binary PGM (P5), white = 255.
inline void write_pgm(std::ostream& os, const BinaryImage& img) {
  os << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> row(img.width());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) row[x] = img.at(x, y) ? char(255) : char(0);
    os.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

inline void write_pgm(const std::string& path, const BinaryImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::io, "cannot open " + path + " for writing");
  write_pgm(os, img);
  if (!os) fail(ErrorKind::io, "write failed: " + path);
}

namespace detail {
inline std::string next_pgm_token(std::istream& is) {
  std::string tok;
  while (is) {
    int c = is.peek();
    if (c == '#') {
      std::string skip;
      std::getline(is, skip);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  is >> tok;
  return tok;
}
}  // namespace detail

/// Reads P5 (binary) or P2 (ASCII) graymaps; any non-zero sample is white.
inline BinaryImage read_pgm(std::istream& is) {
  const std::string magic = detail::next_pgm_token(is);
  if (magic != "P5" && magic != "P2") fail(ErrorKind::format, "not a PGM file (magic '" + magic + "')");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(detail::next_pgm_token(is));
    h = std::stoul(detail::next_pgm_token(is));
    maxval = std::stoul(detail::next_pgm_token(is));
  } catch (const std::exception&) {
    fail(ErrorKind::format, "malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255) fail(ErrorKind::format, "unsupported PGM geometry");
  std::vector<std::uint8_t> px(w * h);
  if (magic == "P5") {
    is.get();  // single whitespace after maxval
    is.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (static_cast<std::size_t>(is.gcount()) != px.size()) {
      fail(ErrorKind::truncation, "PGM raster truncated", static_cast<std::uint64_t>(is.gcount()));
    }
  } else {
    for (auto& p : px) {
      int v = 0;
      if (!(is >> v)) fail(ErrorKind::truncation, "PGM raster truncated");
      p = static_cast<std::uint8_t>(v);
    }
  }
  return BinaryImage(w, h, std::move(px));
}

inline BinaryImage read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::io, "cannot open " + path);
  return read_pgm(is);
}

}  // namespace spiketrack
