// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "spiketrack/vec2.hpp"

namespace spiketrack {

/// Static 2-d tree over a point set. Queries return indices into the
/// original point span.
class KdTree2 {
 public:
  KdTree2() = default;
  explicit KdTree2(std::span<const Vec2> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(points_.size());
    root_ = build(0, order_.size(), 0);
  }

  std::size_t size() const noexcept { return points_.size(); }

  struct Hit {
    std::size_t index;
    double distance;
  };

  std::optional<Hit> nearest(const Vec2& q) const {
    if (root_ < 0) return std::nullopt;
    Hit best{0, std::numeric_limits<double>::infinity()};
    double best_sq = best.distance;
    nearest_impl(root_, q, best.index, best_sq);
    best.distance = std::sqrt(best_sq);
    return best;
  }

  /// All points within `radius` (inclusive), sorted by (distance, index).
  std::vector<Hit> within(const Vec2& q, double radius) const {
    std::vector<Hit> out;
    if (root_ >= 0) within_impl(root_, q, radius * radius, out);
    std::sort(out.begin(), out.end(), [](const Hit& a, const Hit& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
    });
    return out;
  }

 private:
  struct Node {
    std::size_t point;
    int axis;
    int left = -1;
    int right = -1;
  };

  static double coord(const Vec2& p, int axis) { return axis == 0 ? p.x : p.y; }

  int build(std::size_t lo, std::size_t hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 2;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::size_t a, std::size_t b) {
                       const double ca = coord(points_[a], axis), cb = coord(points_[b], axis);
                       return ca != cb ? ca < cb : a < b;
                     });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{order_[mid], axis});
    const int l = build(lo, mid, depth + 1);
    const int r = build(mid + 1, hi, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void nearest_impl(int n, const Vec2& q, std::size_t& best, double& best_sq) const {
    const Node& node = nodes_[n];
    const Vec2& p = points_[node.point];
    const double d_sq = (p - q).squared_norm();
    if (d_sq < best_sq || (d_sq == best_sq && node.point < best)) {
      best_sq = d_sq;
      best = node.point;
    }
    const double diff = coord(q, node.axis) - coord(p, node.axis);
    const int near = diff < 0 ? node.left : node.right;
    const int far = diff < 0 ? node.right : node.left;
    if (near >= 0) nearest_impl(near, q, best, best_sq);
    if (far >= 0 && diff * diff <= best_sq) nearest_impl(far, q, best, best_sq);
  }

  void within_impl(int n, const Vec2& q, double r_sq, std::vector<Hit>& out) const {
    const Node& node = nodes_[n];
    const Vec2& p = points_[node.point];
    const double d_sq = (p - q).squared_norm();
    if (d_sq <= r_sq) out.push_back(Hit{node.point, std::sqrt(d_sq)});
    const double diff = coord(q, node.axis) - coord(p, node.axis);
    const int near = diff < 0 ? node.left : node.right;
    const int far = diff < 0 ? node.right : node.left;
    if (near >= 0) within_impl(near, q, r_sq, out);
    if (far >= 0 && diff * diff <= r_sq) within_impl(far, q, r_sq, out);
  }

  std::vector<Vec2> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace spiketrack
