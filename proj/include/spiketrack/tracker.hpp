// SPDX-License-Identifier: Apache-2.0
//
// Marker tracking: blob centroids, nearest-neighbour association with
// zero-order hold, bounding-box calibration of reference positions, and the
// hysteresis-aware incremental update.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "spiketrack/components.hpp"
#include "spiketrack/error.hpp"
#include "spiketrack/image.hpp"
#include "spiketrack/kdtree.hpp"
#include "spiketrack/vec2.hpp"

namespace spiketrack {

struct Centroid {
  Vec2 pos;
  std::size_t area = 0;
};

struct BoundingBox {
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;

  static BoundingBox around(const Vec2& p) { return {p.x, p.y, p.x, p.y}; }

  void expand(const Vec2& p) {
    x_min = std::min(x_min, p.x);
    y_min = std::min(y_min, p.y);
    x_max = std::max(x_max, p.x);
    y_max = std::max(y_max, p.y);
  }

  bool contains(const Vec2& p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }

  Vec2 center() const { return {(x_min + x_max) / 2.0, (y_min + y_max) / 2.0}; }

  /// Euclidean distance from p to the box (0 inside).
  double distance_to(const Vec2& p) const {
    const double dx = std::max({x_min - p.x, 0.0, p.x - x_max});
    const double dy = std::max({y_min - p.y, 0.0, p.y - y_max});
    return std::hypot(dx, dy);
  }
};

struct MarkerTrack {
  std::size_t id = 0;
  Vec2 p_init;
  Vec2 p_det;
  Vec2 p_det_prev;
  Vec2 p_real;
  BoundingBox bbox;
  std::uint64_t last_seen_t = 0;
  bool held = false;
};

struct TrackerConfig {
  double delta = 4.0;
  double gamma = 0.7;
  double assoc_radius = 8.0;
  std::size_t expected_markers = 64;
  std::size_t min_blob_area = 40;
  double success_radius = 5.0;
  std::uint64_t window_us = 1000;
};

inline void validate(const TrackerConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) fail(ErrorKind::parameter, "gamma must lie in (0, 1]");
  if (!(cfg.delta > 0.0)) fail(ErrorKind::parameter, "delta must be > 0");
  if (!(cfg.assoc_radius > 0.0)) fail(ErrorKind::parameter, "assoc_radius must be > 0");
  if (!(cfg.success_radius > 0.0)) fail(ErrorKind::parameter, "success_radius must be > 0");
  if (cfg.expected_markers == 0) fail(ErrorKind::parameter, "expected_markers must be >= 1");
  if (cfg.window_us == 0) fail(ErrorKind::parameter, "window_us must be >= 1");
}

struct TrackingReport {
  bool success = false;
  std::vector<double> per_marker_error;
  double mean_error = 0.0;
  double std_error = 0.0;
};

// ---------------------------------------------------------------------------
// Detection

/// One centroid per 8-connected white component with area >= min_area,
/// ordered by (y, x).
inline std::vector<Centroid> detect_centroids(const BinaryImage& img, std::size_t min_area) {
  const Labeling lab = label_components(img);
  std::vector<Centroid> out;
  out.reserve(lab.components.size());
  for (const Component& c : lab.components) {
    if (c.area >= min_area) out.push_back({{c.centroid_x(), c.centroid_y()}, c.area});
  }
  std::sort(out.begin(), out.end(), [](const Centroid& a, const Centroid& b) {
    return std::tie(a.pos.y, a.pos.x) < std::tie(b.pos.y, b.pos.x);
  });
  return out;
}

inline std::vector<Centroid> detect_centroids(const BinaryImage& img, const TrackerConfig& cfg) {
  return detect_centroids(img, std::max<std::size_t>(cfg.min_blob_area, 1));
}

// ---------------------------------------------------------------------------
// Association

enum class NeighborSearch { kd_tree, exhaustive };

struct AssociationStats {
  std::size_t matched = 0;
  std::size_t held = 0;
  std::size_t discarded = 0;
};

namespace detail {

struct Candidate {
  double distance;
  std::size_t track;
  std::size_t detection;
};

// Matches are made on (distance, track id, detection y, detection x) so the
// result does not depend on the order detections arrive in.
inline std::vector<std::size_t> greedy_match(std::vector<Candidate>& cands,
                                             std::span<const Vec2> detections,
                                             std::size_t n_tracks) {
  std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.track != b.track) return a.track < b.track;
    const Vec2& da = detections[a.detection];
    const Vec2& db = detections[b.detection];
    return std::tie(da.y, da.x, a.detection) < std::tie(db.y, db.x, b.detection);
  });
  constexpr auto none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> track_to_det(n_tracks, none);
  std::vector<bool> det_used(detections.size(), false);
  for (const Candidate& c : cands) {
    if (track_to_det[c.track] != none || det_used[c.detection]) continue;
    track_to_det[c.track] = c.detection;
    det_used[c.detection] = true;
  }
  return track_to_det;
}

}  // namespace detail

/// For each track, the index of the detection it is matched to (or SIZE_MAX).
inline std::vector<std::size_t> match_detections(std::span<const Vec2> detections,
                                                 std::span<const Vec2> track_positions,
                                                 double radius, NeighborSearch search) {
  std::vector<detail::Candidate> cands;
  if (search == NeighborSearch::kd_tree) {
    const KdTree2 tree(track_positions);
    for (std::size_t j = 0; j < detections.size(); ++j) {
      for (const auto& hit : tree.within(detections[j], radius)) {
        cands.push_back({hit.distance, hit.index, j});
      }
    }
  } else {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      for (std::size_t i = 0; i < track_positions.size(); ++i) {
        const double d_sq = (track_positions[i] - detections[j]).squared_norm();
        if (d_sq <= radius * radius) cands.push_back({std::sqrt(d_sq), i, j});
      }
    }
  }
  return detail::greedy_match(cands, detections, track_positions.size());
}

/// Matches detections to tracks one-to-one. Matched tracks take the new
/// detection; unmatched tracks hold their last confirmed p_det. A track that
/// resumes after a hold gets a zero increment on the resume step.
inline AssociationStats associate(std::span<const Centroid> detections,
                                  std::vector<MarkerTrack>& tracks, const TrackerConfig& cfg,
                                  std::uint64_t t,
                                  NeighborSearch search = NeighborSearch::kd_tree) {
  std::vector<Vec2> det_pos(detections.size());
  for (std::size_t j = 0; j < detections.size(); ++j) det_pos[j] = detections[j].pos;
  std::vector<Vec2> track_pos(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) track_pos[i] = tracks[i].p_det;

  const auto match = match_detections(det_pos, track_pos, cfg.assoc_radius, search);
  AssociationStats stats;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    MarkerTrack& tr = tracks[i];
    if (match[i] == std::numeric_limits<std::size_t>::max()) {
      tr.p_det_prev = tr.p_det;
      tr.held = true;
      ++stats.held;
      continue;
    }
    const Vec2 det = det_pos[match[i]];
    tr.p_det_prev = tr.held ? det : tr.p_det;
    tr.p_det = det;
    tr.held = false;
    tr.last_seen_t = t;
    ++stats.matched;
  }
  stats.discarded = detections.size() - stats.matched;
  return stats;
}

// ---------------------------------------------------------------------------
// Hysteresis-aware update

/// Full gain outside the uncertainty window around the reference, damped
/// gain inside it.
constexpr double damping_gain(double distance, double delta, double gamma) {
  return distance >= delta ? 1.0 : gamma;
}

inline Vec2 hysteresis_step(const Vec2& p_init, const Vec2& p_real, const Vec2& p_det_prev,
                            const Vec2& p_det, double delta, double gamma) {
  const Vec2 displacement = p_det - p_init;
  const Vec2 increment = p_det - p_det_prev;
  return p_real + damping_gain(displacement.norm(), delta, gamma) * increment;
}

inline void hysteresis_update(MarkerTrack& tr, const TrackerConfig& cfg) {
  if (tr.held) return;
  tr.p_real = hysteresis_step(tr.p_init, tr.p_real, tr.p_det_prev, tr.p_det, cfg.delta, cfg.gamma);
}

/// associate() followed by hysteresis_update() on every track.
inline AssociationStats track_step(std::span<const Centroid> detections,
                                   std::vector<MarkerTrack>& tracks, const TrackerConfig& cfg,
                                   std::uint64_t t) {
  const auto stats = associate(detections, tracks, cfg, t);
  for (auto& tr : tracks) hysteresis_update(tr, cfg);
  return stats;
}

// ---------------------------------------------------------------------------
// Calibration

/// Bounding-box aggregation over equilibrium epochs. The reference position
/// of each marker is the centre of the box spanning all its observations.
inline std::vector<MarkerTrack> calibrate(std::span<const std::vector<Centroid>> epochs,
                                          const TrackerConfig& cfg) {
  validate(cfg);
  if (epochs.empty()) fail(ErrorKind::calibration, "calibration needs at least one epoch");
  std::vector<Centroid> first(epochs.front().begin(), epochs.front().end());
  if (first.size() != cfg.expected_markers) {
    fail(ErrorKind::calibration,
         "first calibration epoch has " + std::to_string(first.size()) + " markers, expected " +
             std::to_string(cfg.expected_markers),
         0);
  }
  std::sort(first.begin(), first.end(), [](const Centroid& a, const Centroid& b) {
    return std::tie(a.pos.y, a.pos.x) < std::tie(b.pos.y, b.pos.x);
  });
  std::vector<MarkerTrack> tracks(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    tracks[i].id = i;
    tracks[i].bbox = BoundingBox::around(first[i].pos);
  }

  for (std::size_t e = 1; e < epochs.size(); ++e) {
    const auto& dets = epochs[e];
    std::vector<detail::Candidate> cands;
    for (std::size_t j = 0; j < dets.size(); ++j) {
      for (std::size_t i = 0; i < tracks.size(); ++i) {
        const double d = tracks[i].bbox.distance_to(dets[j].pos);
        if (d <= cfg.assoc_radius) cands.push_back({d, i, j});
      }
    }
    std::vector<Vec2> det_pos(dets.size());
    for (std::size_t j = 0; j < dets.size(); ++j) det_pos[j] = dets[j].pos;
    const auto match = detail::greedy_match(cands, det_pos, tracks.size());
    std::vector<bool> used(dets.size(), false);
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      if (match[i] == std::numeric_limits<std::size_t>::max()) continue;
      used[match[i]] = true;
      tracks[i].bbox.expand(det_pos[match[i]]);
    }
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (!used[j]) {
        fail(ErrorKind::association,
             "calibration epoch " + std::to_string(e) + ": detection beyond association radius " +
                 "of every marker",
             e);
      }
    }
  }

  for (auto& tr : tracks) {
    tr.p_init = tr.bbox.center();
    tr.p_det = tr.p_det_prev = tr.p_real = tr.p_init;
  }
  return tracks;
}

// ---------------------------------------------------------------------------
// Evaluation

inline TrackingReport evaluate_tracking(std::span<const MarkerTrack> tracks,
                                        const TrackerConfig& cfg) {
  TrackingReport rep;
  rep.per_marker_error.reserve(tracks.size());
  for (const auto& tr : tracks) rep.per_marker_error.push_back(distance(tr.p_real, tr.p_init));
  const double n = static_cast<double>(rep.per_marker_error.size());
  if (n > 0) {
    rep.mean_error = std::accumulate(rep.per_marker_error.begin(), rep.per_marker_error.end(), 0.0) / n;
    double ss = 0.0;
    for (double e : rep.per_marker_error) ss += (e - rep.mean_error) * (e - rep.mean_error);
    rep.std_error = std::sqrt(ss / n);
  }
  rep.success = tracks.size() == cfg.expected_markers &&
                std::all_of(rep.per_marker_error.begin(), rep.per_marker_error.end(),
                            [&](double e) { return e < cfg.success_radius; });
  return rep;
}

}  // namespace spiketrack
