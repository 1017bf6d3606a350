// SPDX-License-Identifier: Apache-2.0
//
// Planar hole world probed by a cylindrical tool. A wall contact produces a
// spike in the tactile event count once the probe axis has pushed
// `trigger_depth_mm` past the point of first contact.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "spiketrack/error.hpp"
#include "spiketrack/vec2.hpp"

namespace spiketrack::sim {

struct Hole {
  Vec2 center;  // mm
  double radius_mm = 1.0;
};

struct HoleWorld {
  std::vector<Hole> holes;
  double trigger_depth_mm = 0.4;
  double contact_noise_mm = 0.0;     // sigma on the recorded contact point
  double quiescent_count = 0.0;      // mean background events per sensing window
  double contact_count = 5000.0;     // events per window once the trigger depth is reached
};

inline void validate(const HoleWorld& w) {
  for (std::size_t i = 0; i < w.holes.size(); ++i) {
    const auto& h = w.holes[i];
    if (!(h.radius_mm >= 0.7 && h.radius_mm <= 5.0)) {
      fail(ErrorKind::parameter, "hole radius outside [0.7, 5.0] mm", i);
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (distance(h.center, w.holes[j].center) <= h.radius_mm + w.holes[j].radius_mm) {
        fail(ErrorKind::parameter, "holes overlap", i);
      }
    }
  }
  if (w.trigger_depth_mm < 0.0) fail(ErrorKind::parameter, "trigger depth must be >= 0");
}

/// Index of the hole whose interior contains `p`.
inline std::optional<std::size_t> hole_containing(const HoleWorld& w, const Vec2& p) {
  for (std::size_t i = 0; i < w.holes.size(); ++i) {
    if (distance(p, w.holes[i].center) < w.holes[i].radius_mm) return i;
  }
  return std::nullopt;
}

/// Radial penetration of a probe of `probe_diameter_mm` located at `p` into
/// the wall of `hole` (negative while the probe is clear of the wall).
inline double wall_penetration_mm(const Hole& hole, const Vec2& p, double probe_diameter_mm) {
  return distance(p, hole.center) - (hole.radius_mm - probe_diameter_mm / 2.0);
}

/// Simulated event count of one sensing window with the probe at `p`.
inline double sense_window(const HoleWorld& w, const Hole& hole, const Vec2& p,
                           double probe_diameter_mm, std::mt19937_64& rng) {
  double count = 0.0;
  if (w.quiescent_count > 0.0) {
    count += double(std::poisson_distribution<std::uint64_t>(w.quiescent_count)(rng));
  }
  if (wall_penetration_mm(hole, p, probe_diameter_mm) >= w.trigger_depth_mm) count += w.contact_count;
  return count;
}

}  // namespace spiketrack::sim
