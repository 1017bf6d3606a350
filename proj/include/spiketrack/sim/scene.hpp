// SPDX-License-Identifier: Apache-2.0
//
// Marker-grid world model. A scene is driven by a low-dimensional load
// (translation, rotation, dilation) that is piecewise linear in time. The
// elastomer follows the load through a first-order lag, and every unload
// leaves a residual offset that decays slowly until the next contact wipes it.
// Because the load is piecewise linear, the lag has an exact closed form per
// segment and ground truth can be queried at any instant without integration.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "spiketrack/error.hpp"
#include "spiketrack/image.hpp"
#include "spiketrack/vec2.hpp"

namespace spiketrack::sim {

/// Rigid-ish load acting on the gel about the grid centre: translation (px),
/// small-angle rotation (rad) and isotropic dilation (dimensionless).
struct LoadState {
  double tx = 0.0;
  double ty = 0.0;
  double rot = 0.0;
  double dil = 0.0;

  LoadState& operator+=(const LoadState& o) { tx += o.tx; ty += o.ty; rot += o.rot; dil += o.dil; return *this; }
  friend LoadState operator+(LoadState a, const LoadState& b) { return a += b; }
  friend LoadState operator-(const LoadState& a, const LoadState& b) {
    return {a.tx - b.tx, a.ty - b.ty, a.rot - b.rot, a.dil - b.dil};
  }
  friend LoadState operator*(double s, const LoadState& a) {
    return {s * a.tx, s * a.ty, s * a.rot, s * a.dil};
  }
  bool is_zero() const { return tx == 0.0 && ty == 0.0 && rot == 0.0 && dil == 0.0; }
  friend bool operator==(const LoadState&, const LoadState&) = default;
};

/// Displacement of a marker whose rest offset from the load centre is `r`.
inline Vec2 displacement(const LoadState& q, const Vec2& r) {
  return {q.tx - q.rot * r.y + q.dil * r.x, q.ty + q.rot * r.x + q.dil * r.y};
}

struct HysteresisModel {
  double tau_ms = 15.0;
  double residual_fraction = 0.2;
  double residual_decay_ms = 500.0;
};

inline void validate(const HysteresisModel& h) {
  if (!(h.tau_ms > 0.0)) fail(ErrorKind::parameter, "tau_ms must be > 0");
  if (!(h.residual_fraction >= 0.0 && h.residual_fraction < 1.0)) {
    fail(ErrorKind::parameter, "residual_fraction must lie in [0, 1)");
  }
  if (!(h.residual_decay_ms > 0.0)) fail(ErrorKind::parameter, "residual_decay_ms must be > 0");
}

struct LoadKeyframe {
  double t_us;
  LoadState q;
};

/// A contact episode: load leaves zero at `start_us`, starts unloading from
/// `released` at `release_us` and is back at zero at `unloaded_us`.
struct Episode {
  double start_us;
  double release_us;
  double unloaded_us;
  LoadState released;
};

/// Piecewise-linear commanded load, built by appending segments.
class LoadProgram {
 public:
  explicit LoadProgram(double t0_us = 0.0) { keys_.push_back({t0_us, {}}); }

  LoadProgram& hold(double ms) { return ramp_to(keys_.back().q, ms); }

  LoadProgram& ramp_to(const LoadState& q, double ms) {
    if (!(ms > 0.0)) fail(ErrorKind::parameter, "segment duration must be > 0");
    keys_.push_back({keys_.back().t_us + ms * 1000.0, q});
    return *this;
  }

  const std::vector<LoadKeyframe>& keyframes() const noexcept { return keys_; }
  double start_us() const { return keys_.front().t_us; }
  double end_us() const { return keys_.back().t_us; }

  LoadState commanded(double t_us) const {
    if (t_us <= keys_.front().t_us) return keys_.front().q;
    if (t_us >= keys_.back().t_us) return keys_.back().q;
    const std::size_t k = segment(t_us);
    const auto& a = keys_[k];
    const auto& b = keys_[k + 1];
    const double f = (t_us - a.t_us) / (b.t_us - a.t_us);
    return a.q + f * (b.q - a.q);
  }

  std::vector<Episode> episodes() const {
    std::vector<Episode> out;
    double start = keys_.front().t_us;
    for (std::size_t k = 0; k + 1 < keys_.size(); ++k) {
      const bool z0 = keys_[k].q.is_zero(), z1 = keys_[k + 1].q.is_zero();
      if (z0 && !z1) start = keys_[k].t_us;
      if (!z0 && z1) {
        out.push_back({start, keys_[k].t_us, keys_[k + 1].t_us, keys_[k].q});
        start = keys_[k + 1].t_us;
      }
    }
    return out;
  }

  /// Index k of the segment [keys_[k], keys_[k+1]) containing t.
  std::size_t segment(double t_us) const {
    auto it = std::upper_bound(keys_.begin(), keys_.end(), t_us,
                               [](double t, const LoadKeyframe& kf) { return t < kf.t_us; });
    const auto k = static_cast<std::size_t>(std::distance(keys_.begin(), it));
    return k == 0 ? 0 : std::min(k - 1, keys_.size() - 2);
  }

 private:
  std::vector<LoadKeyframe> keys_;
};

/// Elastomer response to a LoadProgram: lagged load plus residual offsets.
class HysteresisResponse {
 public:
  HysteresisResponse() = default;
  HysteresisResponse(LoadProgram program, HysteresisModel model)
      : program_(std::move(program)), model_(model), episodes_(program_.episodes()) {
    validate(model_);
    const auto& keys = program_.keyframes();
    lag_at_key_.resize(keys.size());
    lag_at_key_[0] = keys[0].q;
    for (std::size_t k = 0; k + 1 < keys.size(); ++k) {
      lag_at_key_[k + 1] = lag_in_segment(k, keys[k + 1].t_us);
    }
  }

  const LoadProgram& program() const noexcept { return program_; }
  const HysteresisModel& model() const noexcept { return model_; }
  const std::vector<Episode>& episodes() const noexcept { return episodes_; }

  LoadState commanded(double t_us) const { return program_.commanded(t_us); }

  /// First-order lag of the commanded load, exact for piecewise-linear input.
  LoadState lagged(double t_us) const {
    const auto& keys = program_.keyframes();
    if (t_us <= keys.front().t_us) return keys.front().q;
    if (t_us >= keys.back().t_us) {
      const double tau = model_.tau_ms * 1000.0;
      const double e = std::exp(-(t_us - keys.back().t_us) / tau);
      return keys.back().q + e * (lag_at_key_.back() - keys.back().q);
    }
    return lag_in_segment(program_.segment(t_us), t_us);
  }

  /// Sum of residual offsets left behind by completed unloads.
  LoadState residual(double t_us) const {
    LoadState r{};
    const double tau = model_.tau_ms * 1000.0;
    const double decay = model_.residual_decay_ms * 1000.0;
    for (std::size_t i = 0; i < episodes_.size(); ++i) {
      const Episode& ep = episodes_[i];
      if (t_us <= ep.unloaded_us) continue;
      const double s = t_us - ep.unloaded_us;
      double w = model_.residual_fraction * std::exp(-s / decay) * (1.0 - std::exp(-s / tau));
      if (i + 1 < episodes_.size() && t_us > episodes_[i + 1].start_us) {
        w *= std::exp(-(t_us - episodes_[i + 1].start_us) / tau);  // new contact wipes memory
      }
      r += w * ep.released;
    }
    return r;
  }

  LoadState effective(double t_us) const { return lagged(t_us) + residual(t_us); }

 private:
  LoadState lag_in_segment(std::size_t k, double t_us) const {
    const auto& keys = program_.keyframes();
    const auto& a = keys[k];
    const auto& b = keys[k + 1];
    const double tau = model_.tau_ms * 1000.0;
    const LoadState slope = (1.0 / (b.t_us - a.t_us)) * (b.q - a.q);
    const double dt = t_us - a.t_us;
    const LoadState cmd = a.q + dt * slope;
    const LoadState offset = lag_at_key_[k] - a.q + tau * slope;
    return cmd - tau * slope + std::exp(-dt / tau) * offset;
  }

  LoadProgram program_;
  HysteresisModel model_;
  std::vector<Episode> episodes_;
  std::vector<LoadState> lag_at_key_;
};

struct MarkerLayout {
  std::vector<Vec2> rest;  // pixel coordinates
  Vec2 center;             // load centre
  double radius_px = 6.0;
};

/// rows x cols grid of disks with `pitch_px` spacing centred on the sensor.
inline MarkerLayout make_grid_layout(std::size_t cols, std::size_t rows, double pitch_px,
                                     double radius_px, std::uint16_t width, std::uint16_t height) {
  MarkerLayout layout;
  layout.radius_px = radius_px;
  layout.center = {width / 2.0, height / 2.0};
  const double x0 = layout.center.x - pitch_px * double(cols - 1) / 2.0;
  const double y0 = layout.center.y - pitch_px * double(rows - 1) / 2.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      layout.rest.push_back({x0 + pitch_px * double(c), y0 + pitch_px * double(r)});
    }
  }
  return layout;
}

/// Rendered world: white disks on black background (or the inverse).
struct SimScene {
  std::uint16_t width = 320;
  std::uint16_t height = 320;
  MarkerLayout layout;
  HysteresisResponse response;
  bool inverted = false;
  std::uint64_t t_end_us = 0;
  std::uint64_t bootstrap_end_us = 0;  // 0 when the scene has no calibration prefix
  double pitch_px = 36.0;

  std::size_t marker_count() const { return layout.rest.size(); }

  Vec2 marker_position(std::size_t i, double t_us) const {
    return layout.rest[i] +
           displacement(response.effective(t_us), layout.rest[i] - layout.center);
  }

  std::vector<Vec2> marker_positions(double t_us) const {
    const LoadState q = response.effective(t_us);
    std::vector<Vec2> out(layout.rest.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = layout.rest[i] + displacement(q, layout.rest[i] - layout.center);
    }
    return out;
  }

  std::vector<Vec2> commanded_positions(double t_us) const {
    const LoadState q = response.commanded(t_us);
    std::vector<Vec2> out(layout.rest.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = layout.rest[i] + displacement(q, layout.rest[i] - layout.center);
    }
    return out;
  }

  BinaryImage render(double t_us) const { return render_disks(marker_positions(t_us)); }

  BinaryImage render_disks(const std::vector<Vec2>& centers) const {
    BinaryImage img(width, height);
    const double r = layout.radius_px;
    for (const Vec2& c : centers) {
      const long x0 = std::max(0L, long(std::floor(c.x - r)));
      const long x1 = std::min(long(width) - 1, long(std::ceil(c.x + r)));
      const long y0 = std::max(0L, long(std::floor(c.y - r)));
      const long y1 = std::min(long(height) - 1, long(std::ceil(c.y + r)));
      for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
          const double dx = double(x) - c.x, dy = double(y) - c.y;
          if (dx * dx + dy * dy <= r * r) img.set(std::size_t(x), std::size_t(y), true);
        }
      }
    }
    if (inverted) {
      for (auto& p : img.pixels()) p ^= 1;
    }
    return img;
  }
};

/// Exact marker centres (including lag and residual) at time t.
inline std::vector<Vec2> ground_truth_positions(const SimScene& scene, double t_us) {
  if (t_us < 0.0 || t_us > double(scene.t_end_us)) {
    fail(ErrorKind::range, "time " + std::to_string(t_us) + " us outside scene span");
  }
  return scene.marker_positions(t_us);
}

// ---------------------------------------------------------------------------
// Interaction library

enum class InteractionKind { press, slide, torsion, circular, drag_release };

inline std::string_view to_string(InteractionKind k) {
  switch (k) {
    case InteractionKind::press: return "press";
    case InteractionKind::slide: return "slide";
    case InteractionKind::torsion: return "torsion";
    case InteractionKind::circular: return "circular";
    case InteractionKind::drag_release: return "drag_release";
  }
  return "unknown";
}

inline InteractionKind parse_interaction_kind(std::string_view s) {
  for (auto k : {InteractionKind::press, InteractionKind::slide, InteractionKind::torsion,
                 InteractionKind::circular, InteractionKind::drag_release}) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorKind::parameter, "unknown interaction kind '" + std::string(s) + "'");
}

struct InteractionParams {
  double amplitude_px = 10.0;  // peak displacement of the most displaced marker
  double period_ms = 400.0;
  int cycles = 2;
  std::optional<double> direction_rad;  // drawn from the seed when unset
  HysteresisModel hysteresis{};
  bool bootstrap = true;                // prepend the multi-directional calibration slides
  double bootstrap_amplitude_px = 15.0;
  double lead_ms = 20.0;
  double settle_ms = 300.0;
  std::uint16_t width = 320;
  std::uint16_t height = 320;
  std::size_t grid = 8;
  double pitch_px = 36.0;
  double radius_px = 6.0;
};

namespace detail {

inline LoadState translation(double amp, double angle) {
  return {amp * std::cos(angle), amp * std::sin(angle), 0.0, 0.0};
}

// Four slides (+x, -x, +y, -y), each released and followed by a rest dwell.
inline void append_bootstrap(LoadProgram& prog, double amplitude) {
  for (double angle : {0.0, std::numbers::pi, std::numbers::pi / 2, -std::numbers::pi / 2}) {
    prog.ramp_to(translation(amplitude, angle), 80.0).hold(60.0).ramp_to({}, 20.0).hold(250.0);
  }
}

inline double max_marker_displacement(const LoadProgram& prog, const MarkerLayout& layout) {
  double m = 0.0;
  for (const auto& kf : prog.keyframes()) {
    for (const Vec2& r : layout.rest) m = std::max(m, displacement(kf.q, r - layout.center).norm());
  }
  return m;
}

}  // namespace detail

/// Builds one of the contact interactions on an 8x8 marker grid. Every
/// interaction starts and ends at rest; the returned scene spans the
/// optional calibration prefix, the interaction and a settling tail.
inline SimScene make_interaction(InteractionKind kind, const InteractionParams& p,
                                 std::uint64_t seed) {
  validate(p.hysteresis);
  if (!(p.amplitude_px >= 0.0)) fail(ErrorKind::parameter, "amplitude must be >= 0");
  if (!(p.period_ms > 0.0)) fail(ErrorKind::parameter, "period must be > 0");
  if (p.cycles < 1) fail(ErrorKind::parameter, "cycles must be >= 1");

  SimScene scene;
  scene.width = p.width;
  scene.height = p.height;
  scene.pitch_px = p.pitch_px;
  scene.layout = make_grid_layout(p.grid, p.grid, p.pitch_px, p.radius_px, p.width, p.height);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle_dist(-std::numbers::pi, std::numbers::pi);
  const double dir = p.direction_rad ? *p.direction_rad : angle_dist(rng);

  double r_max = 0.0;
  for (const Vec2& r : scene.layout.rest) r_max = std::max(r_max, (r - scene.layout.center).norm());

  LoadProgram prog(0.0);
  prog.hold(p.lead_ms);
  if (p.bootstrap) {
    detail::append_bootstrap(prog, p.bootstrap_amplitude_px);
    scene.bootstrap_end_us = static_cast<std::uint64_t>(prog.end_us());
  }

  const double A = p.amplitude_px;
  const double P = p.period_ms;
  if (A > 0.0) {
    switch (kind) {
      case InteractionKind::press: {
        const LoadState q{0.0, 0.0, 0.0, A / r_max};
        prog.ramp_to(q, 0.4 * P).hold(0.3 * P).ramp_to({}, 0.3 * P);
        break;
      }
      case InteractionKind::slide: {
        const LoadState fwd = detail::translation(A, dir);
        const LoadState back = detail::translation(-A, dir);
        prog.ramp_to(fwd, P / 4);
        for (int c = 0; c < p.cycles; ++c) prog.ramp_to(back, P / 2).ramp_to(fwd, P / 2);
        prog.ramp_to({}, 20.0);
        break;
      }
      case InteractionKind::torsion: {
        const double sign = std::cos(dir) >= 0.0 ? 1.0 : -1.0;
        const LoadState q{0.0, 0.0, sign * A / r_max, 0.0};
        prog.ramp_to(q, P / 2).hold(P / 4).ramp_to({}, P / 8);
        break;
      }
      case InteractionKind::circular: {
        constexpr int kSegments = 32;
        prog.ramp_to(detail::translation(A, dir), P / 4);
        for (int c = 0; c < p.cycles; ++c) {
          for (int s = 1; s <= kSegments; ++s) {
            prog.ramp_to(detail::translation(A, dir + 2.0 * std::numbers::pi * s / kSegments),
                         P / kSegments);
          }
        }
        prog.ramp_to({}, 30.0);
        break;
      }
      case InteractionKind::drag_release: {
        prog.ramp_to(detail::translation(A, dir), P).hold(50.0).ramp_to({}, 10.0);
        break;
      }
    }
  }
  prog.hold(p.settle_ms);

  const double peak = detail::max_marker_displacement(prog, scene.layout);
  if (peak >= p.pitch_px / 2.0) {
    fail(ErrorKind::parameter, "peak marker displacement " + std::to_string(peak) +
                                   " px exceeds half the grid pitch");
  }
  scene.response = HysteresisResponse(std::move(prog), p.hysteresis);
  scene.t_end_us = static_cast<std::uint64_t>(scene.response.program().end_us());
  return scene;
}

/// A single disk of `radius_px` translating along a straight line.
inline SimScene make_translating_disk(Vec2 start, Vec2 travel, double duration_ms,
                                      double radius_px, std::uint16_t width = 320,
                                      std::uint16_t height = 320, double settle_ms = 1.0) {
  SimScene scene;
  scene.width = width;
  scene.height = height;
  scene.layout.rest = {start};
  scene.layout.center = start;
  scene.layout.radius_px = radius_px;
  LoadProgram prog(0.0);
  prog.ramp_to({travel.x, travel.y, 0.0, 0.0}, duration_ms).hold(settle_ms);
  // No lag or residual: a rigid target.
  scene.response = HysteresisResponse(std::move(prog), HysteresisModel{1e-6, 0.0, 1.0});
  scene.t_end_us = static_cast<std::uint64_t>(scene.response.program().end_us());
  return scene;
}

}  // namespace spiketrack::sim
