// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "spiketrack/error.hpp"
#include "spiketrack/events.hpp"
#include "spiketrack/image.hpp"

namespace spiketrack {

/// Persistent binary occupancy grid reconstructed from contrast events.
///
/// A +1 event paints its pixel white, a -1 event erases it to black. Nothing
/// else ever changes a cell: there is no decay, only an explicit reset().
class StateMap {
 public:
  StateMap(std::size_t width, std::size_t height) : width_(width), height_(height) {
    if (width == 0 || height == 0) fail(ErrorKind::parameter, "state map dimensions must be >= 1");
    cells_.assign(width * height, 0);
    stamp_.assign(width * height, 0);
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::uint64_t last_update_t() const noexcept { return last_update_t_; }
  std::uint8_t cell(std::size_t x, std::size_t y) const { return cells_[y * width_ + x]; }
  const std::vector<std::uint8_t>& cells() const noexcept { return cells_; }

  std::size_t count_white() const {
    std::size_t n = 0;
    for (auto c : cells_) n += c;
    return n;
  }

  /// Returns true when the cell changed.
  bool apply(const Event& e) {
    check(e);
    last_update_t_ = e.t;
    auto& c = cells_[std::size_t(e.y) * width_ + e.x];
    const std::uint8_t v = e.polarity > 0 ? 1 : 0;
    const bool changed = c != v;
    c = v;
    return changed;
  }

  /// Equivalent to sequential apply(); returns the number of cells whose value
  /// differs between the start and the end of the batch.
  std::size_t apply_batch(std::span<const Event> events) {
    if (++generation_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      generation_ = 1;
    }
    touched_.clear();
    for (std::size_t i = 0; i < events.size(); ++i) {
      const Event& e = events[i];
      check(e, i);
      last_update_t_ = e.t;
      const std::size_t idx = std::size_t(e.y) * width_ + e.x;
      const std::uint8_t v = e.polarity > 0 ? 1 : 0;
      if (cells_[idx] != v) {
        if (stamp_[idx] != generation_) {
          stamp_[idx] = generation_;
          touched_.push_back({idx, cells_[idx]});
        }
        cells_[idx] = v;
      }
    }
    std::size_t changed = 0;
    for (const auto& [idx, original] : touched_) changed += cells_[idx] != original;
    return changed;
  }

  BinaryImage snapshot() const { return BinaryImage(width_, height_, cells_); }

  void reset() {
    std::fill(cells_.begin(), cells_.end(), 0);
    last_update_t_ = 0;
  }

 private:
  void check(const Event& e, std::size_t index = 0) const {
    if (e.x >= width_ || e.y >= height_) {
      fail(ErrorKind::bounds, "event pixel outside state map", index);
    }
    if (e.t < last_update_t_) fail(ErrorKind::ordering, "event time precedes last update", index);
  }

  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> cells_;
  std::uint64_t last_update_t_ = 0;

  // apply_batch scratch
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 0;
  std::vector<std::pair<std::size_t, std::uint8_t>> touched_;
};

}  // namespace spiketrack
