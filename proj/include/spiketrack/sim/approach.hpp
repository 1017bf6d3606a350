// SPDX-License-Identifier: Apache-2.0
//
// Probe approach-and-impact scenario. The probe starts moving at t_start
// toward an obstacle x_real millimetres away; after contact the gel deforms
// in proportion to penetration depth, which shows up as an event burst for the
// event sensor and as marker displacement for a frame camera.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <numbers>
#include <random>
#include <vector>

#include "spiketrack/error.hpp"
#include "spiketrack/events.hpp"
#include "spiketrack/generator.hpp"
#include "spiketrack/sim/scene.hpp"
#include "spiketrack/vec2.hpp"

namespace spiketrack::sim {

struct ApproachScenario {
  double v_mps = 0.1;
  double x_real_mm = 5.0;              // travel from start pose to first contact
  std::uint64_t t_start_us = 250000;   // probe is parked (quiescent) until here
  double burst_events_per_mm = 1e5;    // events per mm of post-contact penetration
  std::uint64_t post_contact_us = 20000;
  std::uint64_t idle_span_us = 500000;  // stream length when the probe never moves
  double patch_radius_px = 40.0;
  std::uint16_t width = 320;
  std::uint16_t height = 320;
  std::uint64_t seed = 0;
};

inline void validate(const ApproachScenario& s) {
  if (s.v_mps < 0.0) fail(ErrorKind::parameter, "approach velocity must be >= 0");
  if (!(s.burst_events_per_mm > 0.0)) fail(ErrorKind::parameter, "burst rate must be > 0");
  if (!(s.x_real_mm >= 0.0)) fail(ErrorKind::parameter, "x_real must be >= 0");
}

/// Braking model after a stop command: fixed command latency, then constant
/// deceleration.
struct RobotReaction {
  double command_latency_ms = 8.0;
  double deceleration_m_s2 = 2.0;

  /// Distance (mm) travelled between the stop command and standstill.
  double stopping_distance_mm(double v_mps) const {
    const double latency_m = v_mps * command_latency_ms * 1e-3;
    const double braking_m = v_mps * v_mps / (2.0 * deceleration_m_s2);
    return (latency_m + braking_m) * 1000.0;
  }
};

inline void validate(const RobotReaction& r) {
  if (!(r.command_latency_ms > 0.0) || !(r.deceleration_m_s2 > 0.0)) {
    fail(ErrorKind::parameter, "robot reaction parameters must be > 0");
  }
}

/// Time of first contact, or none when the probe never moves.
inline std::optional<double> contact_time_us(const ApproachScenario& s) {
  if (s.v_mps <= 0.0) return std::nullopt;
  // v [m/s] == v [mm/ms] == v * 1e-3 [mm/us]
  return double(s.t_start_us) + s.x_real_mm / (s.v_mps * 1e-3);
}

/// Probe position (mm along the approach axis) at time t, ignoring any stop.
inline double probe_position_mm(const ApproachScenario& s, double t_us) {
  if (t_us <= double(s.t_start_us)) return 0.0;
  return s.v_mps * 1e-3 * (t_us - double(s.t_start_us));
}

inline double penetration_mm(const ApproachScenario& s, double t_us) {
  return std::max(0.0, probe_position_mm(s, t_us) - s.x_real_mm);
}

struct ApproachStream {
  EventStreamHeader header;
  std::vector<Event> events;
  std::optional<double> t_contact_us;
};

inline ApproachStream make_approach_stream(const ApproachScenario& s, const NoiseModel& noise) {
  validate(s);
  ApproachStream out;
  out.t_contact_us = contact_time_us(s);
  const std::uint64_t t_end = out.t_contact_us
                                  ? std::uint64_t(std::ceil(*out.t_contact_us)) + s.post_contact_us
                                  : s.t_start_us + s.idle_span_us;

  std::vector<Event> burst;
  if (out.t_contact_us) {
    // Homogeneous Poisson burst: rate = events/mm * mm/us.
    std::mt19937_64 rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
    const double rate_per_us = s.burst_events_per_mm * s.v_mps * 1e-3;
    std::exponential_distribution<double> gap(rate_per_us);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution pol(0.5);
    const double cx = s.width / 2.0, cy = s.height / 2.0;
    for (double t = *out.t_contact_us + gap(rng); t < double(t_end); t += gap(rng)) {
      const double r = s.patch_radius_px * std::sqrt(unit(rng));
      const double a = 2.0 * std::numbers::pi * unit(rng);
      const long x = std::clamp(long(std::lround(cx + r * std::cos(a))), 0L, long(s.width) - 1);
      const long y = std::clamp(long(std::lround(cy + r * std::sin(a))), 0L, long(s.height) - 1);
      burst.push_back(Event{std::uint64_t(t), std::uint16_t(x), std::uint16_t(y),
                            std::int8_t(pol(rng) ? 1 : -1)});
    }
  }
  const auto bg = generate_noise(s.width, s.height, noise, 0, t_end + 1);
  out.events.reserve(burst.size() + bg.size());
  std::merge(bg.begin(), bg.end(), burst.begin(), burst.end(), std::back_inserter(out.events),
             [](const Event& a, const Event& b) { return a.t < b.t; });
  out.header = make_header(out.events, s.width, s.height, 0, t_end);
  return out;
}

/// Marker observations of a frame-based tactile sensor during the same
/// approach: markers spread radially with penetration depth, plus jitter.
struct FrameSensorModel {
  double frame_rate_hz = 30.0;
  double gain_px_per_mm = 10.0;  // mean marker displacement per mm of penetration
  double jitter_px = 0.05;
};

struct ApproachFrames {
  std::vector<double> t_us;
  std::vector<std::vector<Vec2>> frames;
  std::vector<Vec2> init;  // quiescent reference
};

inline ApproachFrames make_approach_frames(const ApproachScenario& s, const FrameSensorModel& cam,
                                           const MarkerLayout& layout) {
  validate(s);
  if (!(cam.frame_rate_hz > 0.0)) fail(ErrorKind::parameter, "frame rate must be > 0");
  ApproachFrames out;
  out.init = layout.rest;
  std::mt19937_64 rng(s.seed ^ 0xda942042e4dd58b5ULL);
  std::uniform_real_distribution<double> phase(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, cam.jitter_px);
  const double period_us = 1e6 / cam.frame_rate_hz;
  const auto tc = contact_time_us(s);
  const double t_end = tc ? *tc + double(s.post_contact_us) + 2.0 * period_us
                          : double(s.t_start_us + s.idle_span_us);
  double r_mean = 0.0;
  for (const Vec2& r : layout.rest) r_mean += (r - layout.center).norm();
  r_mean /= double(layout.rest.size());
  for (double t = phase(rng) * period_us; t < t_end; t += period_us) {
    const double depth = penetration_mm(s, t);
    std::vector<Vec2> f(layout.rest.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Vec2 rel = layout.rest[i] - layout.center;
      const Vec2 shift = rel * (cam.gain_px_per_mm * depth / r_mean);
      f[i] = layout.rest[i] + shift + Vec2{jitter(rng), jitter(rng)};
    }
    out.t_us.push_back(t);
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace spiketrack::sim
