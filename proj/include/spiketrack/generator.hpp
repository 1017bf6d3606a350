// SPDX-License-Identifier: Apache-2.0
//
// Synthetic event sensor. The scene is rendered every `step_us`; each pixel
// integrates its log-intensity change and fires one event per threshold
// crossing, at most once per refractory period, carrying the remainder over.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "spiketrack/error.hpp"
#include "spiketrack/events.hpp"
#include "spiketrack/sim/scene.hpp"

namespace spiketrack {

inline constexpr double kDefaultContrastThreshold = 0.5;

struct GeneratorOptions {
  std::uint64_t step_us = 100;
  std::uint64_t refractory_us = 200;
  double white_level = 1.0;
  double black_level = 0.1;
};

/// Spatio-temporally isolated background activity over [t0, t1).
inline std::vector<Event> generate_noise(std::uint16_t width, std::uint16_t height,
                                         const NoiseModel& noise, std::uint64_t t0,
                                         std::uint64_t t1) {
  if (noise.rate < 0.0) fail(ErrorKind::parameter, "noise rate must be >= 0");
  std::vector<Event> out;
  if (noise.rate == 0.0 || t1 <= t0) return out;
  std::mt19937_64 rng(noise.seed);
  const double mean = noise.rate * double(width) * double(height) * double(t1 - t0) * 1e-6;
  std::poisson_distribution<std::uint64_t> count_dist(mean);
  const std::uint64_t n = count_dist(rng);
  std::uniform_int_distribution<std::uint64_t> t_dist(t0, t1 - 1);
  std::uniform_int_distribution<std::uint32_t> x_dist(0, width - 1u), y_dist(0, height - 1u);
  std::bernoulli_distribution pol_dist(0.5);
  out.resize(n);
  for (auto& e : out) {
    e.t = t_dist(rng);
    e.x = static_cast<std::uint16_t>(x_dist(rng));
    e.y = static_cast<std::uint16_t>(y_dist(rng));
    e.polarity = pol_dist(rng) ? 1 : -1;
  }
  sort_by_time(out);
  return out;
}

namespace detail {

class DiskRasterizer {
 public:
  DiskRasterizer(const sim::SimScene& scene)
      : w_(scene.width), h_(scene.height), r_(scene.layout.radius_px),
        cover_(std::size_t(w_) * h_, 0) {}

  void stamp(const Vec2& c, int delta, std::vector<std::size_t>* touched) {
    for_disk(c, [&](std::size_t idx) {
      cover_[idx] = static_cast<std::uint16_t>(int(cover_[idx]) + delta);
      if (touched) touched->push_back(idx);
    });
  }

  bool covered(std::size_t idx) const { return cover_[idx] > 0; }

  /// Largest motion of `c` that cannot change its raster.
  double slack(const Vec2& c) const {
    double s = 2.0;
    const long x0 = long(std::floor(c.x - r_ - 2)), x1 = long(std::ceil(c.x + r_ + 2));
    const long y0 = long(std::floor(c.y - r_ - 2)), y1 = long(std::ceil(c.y + r_ + 2));
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        const double d = std::hypot(double(x) - c.x, double(y) - c.y);
        s = std::min(s, std::abs(d - r_));
      }
    }
    return s;
  }

 private:
  template <class Fn>
  void for_disk(const Vec2& c, Fn&& fn) const {
    const long x0 = std::max(0L, long(std::floor(c.x - r_)));
    const long x1 = std::min(long(w_) - 1, long(std::ceil(c.x + r_)));
    const long y0 = std::max(0L, long(std::floor(c.y - r_)));
    const long y1 = std::min(long(h_) - 1, long(std::ceil(c.y + r_)));
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        const double dx = double(x) - c.x, dy = double(y) - c.y;
        if (dx * dx + dy * dy <= r_ * r_) fn(std::size_t(y) * w_ + std::size_t(x));
      }
    }
  }

  std::uint16_t w_, h_;
  double r_;
  std::vector<std::uint16_t> cover_;
};

}  // namespace detail

/// Signal events for `scene` over [t0, t1) merged with Poisson background
/// noise. Deterministic for a given (scene, threshold, noise seed).
inline std::vector<Event> generate_events(const sim::SimScene& scene, double contrast_threshold,
                                          const NoiseModel& noise, std::uint64_t t0,
                                          std::uint64_t t1, const GeneratorOptions& opt = {}) {
  if (!(contrast_threshold > 0.0)) fail(ErrorKind::parameter, "contrast threshold must be > 0");
  if (t0 >= t1) fail(ErrorKind::parameter, "generate_events needs t0 < t1");
  if (opt.step_us == 0) fail(ErrorKind::parameter, "render step must be >= 1 us");
  if (!(opt.white_level > opt.black_level && opt.black_level > 0.0)) {
    fail(ErrorKind::parameter, "intensity levels must satisfy white > black > 0");
  }

  const std::size_t w = scene.width, h = scene.height;
  const double log_step = std::log(opt.white_level) - std::log(opt.black_level);
  detail::DiskRasterizer raster(scene);

  std::vector<Vec2> drawn = scene.marker_positions(double(t0));
  std::vector<double> slack(drawn.size());
  for (std::size_t m = 0; m < drawn.size(); ++m) {
    raster.stamp(drawn[m], +1, nullptr);
    slack[m] = raster.slack(drawn[m]);
  }
  std::vector<std::uint8_t> latent(w * h);
  for (std::size_t i = 0; i < latent.size(); ++i) latent[i] = raster.covered(i) != scene.inverted;

  std::vector<double> acc(w * h, 0.0);
  std::vector<std::uint64_t> ready_at(w * h, 0);
  std::vector<std::uint8_t> listed(w * h, 0);
  std::vector<std::size_t> pending, touched, still_pending;

  std::vector<Event> signal;
  for (std::uint64_t ts = t0 + opt.step_us; ts < t1; ts += opt.step_us) {
    const std::vector<Vec2> pos = scene.marker_positions(double(ts));
    touched.clear();
    for (std::size_t m = 0; m < pos.size(); ++m) {
      if (distance(pos[m], drawn[m]) < slack[m]) continue;
      raster.stamp(drawn[m], -1, &touched);
      raster.stamp(pos[m], +1, &touched);
      drawn[m] = pos[m];
      slack[m] = raster.slack(pos[m]);
    }
    for (std::size_t idx : touched) {
      const std::uint8_t now = raster.covered(idx) != scene.inverted;
      if (now == latent[idx]) continue;
      latent[idx] = now;
      acc[idx] += now ? log_step : -log_step;
      if (!listed[idx]) {
        listed[idx] = 1;
        pending.push_back(idx);
      }
    }
    still_pending.clear();
    for (std::size_t idx : pending) {
      if (std::abs(acc[idx]) >= contrast_threshold && ts >= ready_at[idx]) {
        const std::int8_t pol = acc[idx] > 0 ? 1 : -1;
        signal.push_back(Event{ts, std::uint16_t(idx % w), std::uint16_t(idx / w), pol});
        acc[idx] -= pol * contrast_threshold;
        ready_at[idx] = ts + opt.refractory_us;
      }
      if (std::abs(acc[idx]) >= contrast_threshold) {
        still_pending.push_back(idx);
      } else {
        listed[idx] = 0;
      }
    }
    pending.swap(still_pending);
  }

  NoiseModel nm = noise;
  std::vector<Event> bg = generate_noise(scene.width, scene.height, nm, t0, t1);
  std::vector<Event> out;
  out.reserve(signal.size() + bg.size());
  std::merge(signal.begin(), signal.end(), bg.begin(), bg.end(), std::back_inserter(out),
             [](const Event& a, const Event& b) { return a.t < b.t; });
  return out;
}

}  // namespace spiketrack
