// SPDX-License-Identifier: Apache-2.0
//
// The ten-trajectory return-to-origin suite.
#pragma once

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "spiketrack/sim/scene.hpp"

namespace spiketrack::sim {

struct SuiteTrajectory {
  std::string name;
  InteractionKind kind;
  InteractionParams params;
  std::uint64_t seed;
};

inline std::vector<SuiteTrajectory> return_to_origin_suite() {
  auto make = [](std::string name, InteractionKind kind, double amp, double period_ms,
                 double dir_deg, std::uint64_t seed) {
    InteractionParams p;
    p.amplitude_px = amp;
    p.period_ms = period_ms;
    p.direction_rad = dir_deg * std::numbers::pi / 180.0;
    return SuiteTrajectory{std::move(name), kind, p, seed};
  };
  using K = InteractionKind;
  return {
      make("press", K::press, 10.0, 400.0, 0.0, 101),
      make("slide_x", K::slide, 12.0, 120.0, 0.0, 102),
      make("slide_diag", K::slide, 12.0, 160.0, 135.0, 103),
      make("torsion_ccw", K::torsion, 14.0, 400.0, 0.0, 104),
      make("torsion_cw", K::torsion, 14.0, 400.0, 180.0, 105),
      make("circular_fast", K::circular, 10.0, 200.0, 30.0, 106),
      make("circular_slow", K::circular, 12.0, 500.0, 250.0, 107),
      make("drag_release_x", K::drag_release, 12.0, 300.0, 0.0, 108),
      make("drag_release_y", K::drag_release, 14.0, 250.0, 90.0, 109),
      make("drag_release_diag", K::drag_release, 16.0, 200.0, 225.0, 110),
  };
}

}  // namespace spiketrack::sim
