// SPDX-License-Identifier: Apache-2.0
//
// Collision detection from millisecond event counts, the frame-based
// displacement-sum baseline, and the stop-pose deviation metrics.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spiketrack/error.hpp"
#include "spiketrack/events.hpp"
#include "spiketrack/rng.hpp"
#include "spiketrack/sim/approach.hpp"
#include "spiketrack/vec2.hpp"

namespace spiketrack {

struct CollisionConfig {
  std::uint64_t window_us = kDefaultWindowUs;
  double count_threshold = 10.0;
  std::size_t quiescent_calibration_windows = 200;
};

inline void validate(const CollisionConfig& cfg) {
  if (cfg.window_us == 0) fail(ErrorKind::parameter, "window_us must be >= 1");
  if (!(cfg.count_threshold > 0.0)) fail(ErrorKind::parameter, "count_threshold must be > 0");
}

inline constexpr double kThresholdMultiplier = 3.0;
inline constexpr double kThresholdFloor = 10.0;

/// Three times the busiest quiescent window, never below the floor.
inline double calibrate_threshold(std::span<const std::size_t> quiescent_counts,
                                  const CollisionConfig& cfg) {
  if (quiescent_counts.size() < cfg.quiescent_calibration_windows || quiescent_counts.empty()) {
    fail(ErrorKind::calibration, "need " + std::to_string(cfg.quiescent_calibration_windows) +
                                     " quiescent windows, got " +
                                     std::to_string(quiescent_counts.size()));
  }
  const auto peak = *std::max_element(quiescent_counts.begin(), quiescent_counts.end());
  return std::max(kThresholdFloor, kThresholdMultiplier * double(peak));
}

inline double calibrate_threshold(std::span<const EventWindow> quiescent,
                                  const CollisionConfig& cfg) {
  const auto counts = window_counts(quiescent);
  return calibrate_threshold(std::span<const std::size_t>(counts), cfg);
}

/// Streaming spike detector: fires on the first window whose count exceeds
/// the threshold. Constant state.
class SpikeDetector {
 public:
  explicit SpikeDetector(double threshold) : threshold_(threshold) {}

  bool feed(std::size_t count) {
    if (!fired_ && double(count) > threshold_) fired_ = index_;
    ++index_;
    return fired_.has_value();
  }

  std::optional<std::uint64_t> fired_at() const noexcept { return fired_; }

 private:
  double threshold_;
  std::uint64_t index_ = 0;
  std::optional<std::uint64_t> fired_;
};

inline std::optional<std::size_t> detect_collision(std::span<const std::size_t> counts,
                                                   const CollisionConfig& cfg) {
  validate(cfg);
  SpikeDetector det(cfg.count_threshold);
  for (std::size_t c : counts) {
    if (det.feed(c)) return std::size_t(*det.fired_at());
  }
  return std::nullopt;
}

inline std::optional<std::size_t> detect_collision(std::span<const EventWindow> windows,
                                                   const CollisionConfig& cfg) {
  const auto counts = window_counts(windows);
  return detect_collision(std::span<const std::size_t>(counts), cfg);
}

// ---------------------------------------------------------------------------
// Frame baseline

struct BaselineConfig {
  double frame_rate = 30.0;
  double epsilon_threshold = 16.0;  // px, summed over all markers
};

inline void validate(const BaselineConfig& cfg) {
  if (!(cfg.frame_rate > 0.0)) fail(ErrorKind::parameter, "frame_rate must be > 0");
  if (!(cfg.epsilon_threshold > 0.0)) fail(ErrorKind::parameter, "epsilon_threshold must be > 0");
}

/// Sum over markers of the L2 distance from the reference configuration.
inline double displacement_sum(std::span<const Vec2> current, std::span<const Vec2> init) {
  if (current.size() != init.size()) {
    fail(ErrorKind::input, "marker count mismatch: " + std::to_string(current.size()) + " vs " +
                               std::to_string(init.size()));
  }
  double d = 0.0;
  for (std::size_t i = 0; i < current.size(); ++i) d += distance(current[i], init[i]);
  return d;
}

inline std::optional<std::size_t> detect_collision_baseline(
    std::span<const std::vector<Vec2>> marker_frames, std::span<const Vec2> init,
    const BaselineConfig& cfg) {
  validate(cfg);
  for (std::size_t f = 0; f < marker_frames.size(); ++f) {
    if (marker_frames[f].size() != init.size()) {
      fail(ErrorKind::input, "frame " + std::to_string(f) + " has " +
                                 std::to_string(marker_frames[f].size()) + " markers, expected " +
                                 std::to_string(init.size()),
           f);
    }
  }
  for (std::size_t f = 0; f < marker_frames.size(); ++f) {
    if (displacement_sum(marker_frames[f], init) > cfg.epsilon_threshold) return f;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Trials

enum class DetectorKind { event, baseline };

inline std::string_view to_string(DetectorKind k) {
  return k == DetectorKind::event ? "event" : "baseline";
}

struct CollisionReport {
  bool triggered = false;
  std::uint64_t t_trigger = 0;  // us
  double x_real = 0.0;          // mm
  double x_collision = 0.0;
  double x_stop = 0.0;
  double delta_x_p = 0.0;
  double delta_x_e = 0.0;
  double velocity = 0.0;  // m/s
  double count_threshold = 0.0;
  std::optional<double> t_contact;
};

struct CollisionTrialOptions {
  CollisionConfig events{};
  BaselineConfig baseline{};
  NoiseModel noise{1.0, 0};
  sim::FrameSensorModel camera{};
  double start_jitter_mm = 0.0;  // sigma of the probe's true start offset
};

namespace detail {

inline void fill_poses(CollisionReport& rep, const sim::ApproachScenario& scn,
                       const sim::RobotReaction& reaction) {
  rep.x_real = scn.x_real_mm;
  rep.x_collision = sim::probe_position_mm(scn, double(rep.t_trigger));
  rep.x_stop = rep.x_collision + reaction.stopping_distance_mm(scn.v_mps);
  rep.delta_x_p = rep.x_collision - rep.x_real;
  rep.delta_x_e = rep.x_stop - rep.x_real;
}

}  // namespace detail

/// Runs one approach at velocity `v_mps`. Event thresholds are calibrated on
/// the leading quiescent windows of the same stream.
inline CollisionReport run_collision_trial(sim::ApproachScenario scn, double v_mps,
                                           DetectorKind detector,
                                           const sim::RobotReaction& reaction,
                                           const CollisionTrialOptions& opt = {}) {
  sim::validate(reaction);
  scn.v_mps = v_mps;
  sim::validate(scn);

  // Reset micro-slips: the true contact plane differs from the nominal one.
  double shift = 0.0;
  if (opt.start_jitter_mm > 0.0) {
    std::mt19937_64 rng(derive_seed(scn.seed, 0x6a));
    shift = std::normal_distribution<double>(0.0, opt.start_jitter_mm)(rng);
  }
  sim::ApproachScenario physical = scn;
  physical.x_real_mm = scn.x_real_mm + shift;

  CollisionReport rep;
  rep.velocity = v_mps;
  rep.x_real = scn.x_real_mm;
  rep.t_contact = sim::contact_time_us(physical);

  if (detector == DetectorKind::event) {
    validate(opt.events);
    NoiseModel noise = opt.noise;
    noise.seed = derive_seed(scn.seed, 0x4e, opt.noise.seed);
    const auto stream = sim::make_approach_stream(physical, noise);
    std::vector<std::size_t> counts;
    for_each_window(stream.events, opt.events.window_us, stream.header.t_start,
                    stream.header.t_end,
                    [&](std::uint64_t, std::uint64_t, std::span<const Event> evs) {
                      counts.push_back(evs.size());
                    });
    const std::size_t n_quiet = opt.events.quiescent_calibration_windows;
    if (counts.size() <= n_quiet) fail(ErrorKind::calibration, "stream too short to calibrate");
    CollisionConfig cfg = opt.events;
    cfg.count_threshold = calibrate_threshold(std::span(counts).first(n_quiet), cfg);
    rep.count_threshold = cfg.count_threshold;
    const auto hit = detect_collision(std::span<const std::size_t>(counts).subspan(n_quiet), cfg);
    if (!hit) return rep;
    const std::uint64_t w = n_quiet + *hit;
    rep.triggered = true;
    rep.t_trigger = stream.header.t_start + (w + 1) * cfg.window_us - 1;  // window close
  } else {
    validate(opt.baseline);
    sim::FrameSensorModel cam = opt.camera;
    cam.frame_rate_hz = opt.baseline.frame_rate;
    const auto layout = sim::make_grid_layout(8, 8, 36.0, 6.0, scn.width, scn.height);
    const auto frames = sim::make_approach_frames(physical, cam, layout);
    if (frames.frames.empty()) return rep;
    const auto hit = detect_collision_baseline(frames.frames, frames.frames.front(), opt.baseline);
    if (!hit) return rep;
    rep.triggered = true;
    rep.t_trigger = std::uint64_t(std::llround(frames.t_us[*hit]));
  }
  // Deviations are measured against the nominal obstacle pose.
  detail::fill_poses(rep, scn, reaction);
  return rep;
}

struct SweepRow {
  double v_mps;
  DetectorKind detector;
  double delta_x_p_mm;
  double delta_x_e_mm;
  double t_trigger_us;
  std::size_t triggered;  // trials (out of seeds) that triggered
};

/// Inclusive velocity grid lo:hi:step with rounding-safe end point.
inline std::vector<double> velocity_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) fail(ErrorKind::parameter, "invalid sweep range");
  std::vector<double> v;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < n; ++i) v.push_back(std::round((lo + step * double(i)) * 1e9) / 1e9);
  return v;
}

}  // namespace spiketrack
