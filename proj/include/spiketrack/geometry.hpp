// SPDX-License-Identifier: Apache-2.0
//
// Cross-search hole estimation with probe-radius compensation, 2D Kabsch
// alignment and the hole error metrics.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spiketrack/collision.hpp"
#include "spiketrack/error.hpp"
#include "spiketrack/sim/holes.hpp"
#include "spiketrack/vec2.hpp"

namespace spiketrack {

struct ProbeSpec {
  double diameter_mm = 0.75;
  double delta_crit_mm = 0.4;
  double speed_mm_s = 0.8;
  double step_mm = 0.05;
  double travel_budget_mm = 12.0;  // per leg
};

inline void validate(const ProbeSpec& p) {
  if (!(p.diameter_mm > 0.0)) fail(ErrorKind::parameter, "probe diameter must be > 0");
  if (!(p.delta_crit_mm >= 0.0)) fail(ErrorKind::parameter, "delta_crit must be >= 0");
  if (!(p.speed_mm_s > 0.0)) fail(ErrorKind::parameter, "probe speed must be > 0");
  if (!(p.step_mm > 0.0)) fail(ErrorKind::parameter, "probe step must be > 0");
  if (!(p.travel_budget_mm > 0.0)) fail(ErrorKind::parameter, "travel budget must be > 0");
}

/// Half the probe diameter: the probe axis stops this far inside the wall.
inline double radius_offset_mm(const ProbeSpec& p) { return p.diameter_mm / 2.0; }

/// Compensated hole radius from the raw contact radius.
inline double compensated_radius(double r_measured, const ProbeSpec& p) {
  return r_measured + radius_offset_mm(p) - p.delta_crit_mm;
}

struct HoleEstimate {
  std::size_t hole_index = 0;
  std::array<Vec2, 4> contact_points{};  // +X, -X, +Y, -Y
  double x_c = 0.0;
  double y_c = 0.0;
  double r_measured = 0.0;
  double r_real = 0.0;
  double travel_mm = 0.0;  // total probe travel

  Vec2 center() const noexcept { return {x_c, y_c}; }
};

inline constexpr const char* kLegNames[4] = {"+X", "-X", "+Y", "-Y"};

namespace detail {

struct LegResult {
  Vec2 contact;
  double travel;
};

inline LegResult probe_leg(const sim::HoleWorld& world, const sim::Hole& hole, Vec2 from, Vec2 dir,
                           const ProbeSpec& probe, double threshold, std::mt19937_64& rng,
                           std::size_t leg) {
  const auto max_steps = static_cast<std::size_t>(std::ceil(probe.travel_budget_mm / probe.step_mm));
  for (std::size_t k = 1; k <= max_steps; ++k) {
    const Vec2 p = from + dir * (probe.step_mm * double(k));
    if (sim::sense_window(world, hole, p, probe.diameter_mm, rng) > threshold) {
      return {p, probe.step_mm * double(k)};
    }
  }
  fail(ErrorKind::search_failure, std::string("no contact on leg ") + kLegNames[leg], leg);
}

}  // namespace detail

/// Axis-aligned cross search from `start` inside one of the world's holes.
inline HoleEstimate cross_search(const sim::HoleWorld& world, const Vec2& start,
                                 const ProbeSpec& probe, const CollisionConfig& detector,
                                 std::uint64_t seed = 0) {
  validate(probe);
  validate(detector);
  const auto idx = sim::hole_containing(world, start);
  if (!idx) fail(ErrorKind::precondition, "start point is not inside any hole");
  const sim::Hole& hole = world.holes[*idx];
  if (sim::wall_penetration_mm(hole, start, probe.diameter_mm) >= 0.0) {
    fail(ErrorKind::precondition, "probe at start point touches the hole wall");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sigma = world.contact_noise_mm;
  auto record = [&](Vec2 p) {
    if (sigma > 0.0) p += Vec2{sigma * noise(rng), sigma * noise(rng)};
    return p;
  };

  HoleEstimate est;
  est.hole_index = *idx;
  const double thr = detector.count_threshold;
  const Vec2 dirs[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

  Vec2 origin = start;
  for (std::size_t leg = 0; leg < 4; ++leg) {
    if (leg == 2) origin = Vec2{(est.contact_points[0].x + est.contact_points[1].x) / 2.0, start.y};
    const auto r = detail::probe_leg(world, hole, origin, dirs[leg], probe, thr, rng, leg);
    est.contact_points[leg] = record(r.contact);
    est.travel_mm += 2.0 * r.travel;  // out and back
  }
  est.x_c = (est.contact_points[0].x + est.contact_points[1].x) / 2.0;
  est.y_c = (est.contact_points[2].y + est.contact_points[3].y) / 2.0;
  double sum = 0.0;
  for (const Vec2& p : est.contact_points) sum += distance(p, est.center());
  est.r_measured = sum / 4.0;
  est.r_real = compensated_radius(est.r_measured, probe);
  return est;
}

// ---------------------------------------------------------------------------
// Kabsch

struct Rotation2 {
  double angle = 0.0;

  double c() const { return std::cos(angle); }
  double s() const { return std::sin(angle); }
  /// Row-major {r00, r01, r10, r11}.
  std::array<double, 4> matrix() const { return {c(), -s(), s(), c()}; }
  Vec2 apply(const Vec2& p) const { return {c() * p.x - s() * p.y, s() * p.x + c() * p.y}; }
};

struct AlignmentResult {
  Rotation2 rotation;
  Vec2 translation;
  double rmse = 0.0;
  std::vector<double> per_point_error;

  Vec2 apply(const Vec2& p) const { return rotation.apply(p) + translation; }
};

namespace detail {

inline Vec2 mean_of(std::span<const Vec2> pts) {
  Vec2 m{};
  for (const Vec2& p : pts) m += p;
  return m * (1.0 / double(pts.size()));
}

inline void fill_errors(AlignmentResult& res, std::span<const Vec2> est,
                        std::span<const Vec2> ref) {
  res.per_point_error.resize(est.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    res.per_point_error[i] = distance(res.apply(est[i]), ref[i]);
    ss += res.per_point_error[i] * res.per_point_error[i];
  }
  res.rmse = est.empty() ? 0.0 : std::sqrt(ss / double(est.size()));
}

}  // namespace detail

/// Errors of `est` against `ref` under an arbitrary rigid transform.
inline AlignmentResult rigid_errors(std::span<const Vec2> est, std::span<const Vec2> ref,
                                    double angle, const Vec2& translation) {
  AlignmentResult r;
  r.rotation.angle = angle;
  r.translation = translation;
  detail::fill_errors(r, est, ref);
  return r;
}

/// Least-squares rigid transform mapping `estimated` onto `reference`.
inline AlignmentResult kabsch_align(std::span<const Vec2> estimated,
                                    std::span<const Vec2> reference) {
  if (estimated.size() != reference.size()) {
    fail(ErrorKind::input, "point lists differ in length");
  }
  if (estimated.size() < 2) fail(ErrorKind::degenerate, "kabsch needs at least 2 points");
  const Vec2 ce = detail::mean_of(estimated);
  const Vec2 cr = detail::mean_of(reference);
  double sdot = 0.0, scross = 0.0, spread_e = 0.0, spread_r = 0.0;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    const Vec2 e = estimated[i] - ce;
    const Vec2 r = reference[i] - cr;
    sdot += dot(e, r);
    scross += cross(e, r);
    spread_e += e.squared_norm();
    spread_r += r.squared_norm();
  }
  const double scale = std::sqrt(spread_e * spread_r);
  if (!(scale > 0.0) || std::hypot(sdot, scross) <= 1e-14 * scale) {
    fail(ErrorKind::degenerate, "cross-covariance is rank deficient");
  }
  AlignmentResult res;
  res.rotation.angle = std::atan2(scross, sdot);
  res.translation = cr - res.rotation.apply(ce);
  detail::fill_errors(res, estimated, reference);
  return res;
}

// ---------------------------------------------------------------------------
// Metrics

struct HoleErrorSummary {
  double pos_rmse = 0.0;
  double radius_mean_abs = 0.0;
  double radius_mean_signed = 0.0;
};

inline HoleErrorSummary summarize_hole_errors(std::span<const double> pos_errors,
                                              std::span<const double> radius_errors) {
  if (pos_errors.size() != radius_errors.size()) fail(ErrorKind::input, "error lists differ");
  HoleErrorSummary s;
  if (pos_errors.empty()) return s;
  const double n = double(pos_errors.size());
  double ss = 0.0, sa = 0.0, sr = 0.0;
  for (std::size_t i = 0; i < pos_errors.size(); ++i) {
    ss += pos_errors[i] * pos_errors[i];
    sa += std::abs(radius_errors[i]);
    sr += radius_errors[i];
  }
  s.pos_rmse = std::sqrt(ss / n);
  s.radius_mean_abs = sa / n;
  s.radius_mean_signed = sr / n;
  return s;
}

struct HoleRow {
  Vec2 estimated;  // after alignment
  Vec2 truth;
  double r_estimated = 0.0;
  double r_true = 0.0;
  double pos_error = 0.0;
  double radius_error = 0.0;  // signed
};

struct HoleEvaluation {
  AlignmentResult alignment;
  std::vector<HoleRow> rows;
  HoleErrorSummary summary;
};

/// Aligns estimated centers onto the model and reports the error table. A
/// single hole cannot be aligned and is compared in place.
inline HoleEvaluation evaluate_holes(std::span<const HoleEstimate> estimates,
                                     std::span<const sim::Hole> model) {
  if (estimates.size() != model.size()) {
    fail(ErrorKind::input, "got " + std::to_string(estimates.size()) + " estimates for " +
                               std::to_string(model.size()) + " holes");
  }
  std::vector<Vec2> est, ref;
  for (std::size_t i = 0; i < model.size(); ++i) {
    est.push_back(estimates[i].center());
    ref.push_back(model[i].center);
  }
  HoleEvaluation ev;
  ev.alignment = est.size() >= 2 ? kabsch_align(est, ref) : rigid_errors(est, ref, 0.0, {});
  std::vector<double> pe, re;
  for (std::size_t i = 0; i < model.size(); ++i) {
    HoleRow row;
    row.estimated = ev.alignment.apply(est[i]);
    row.truth = ref[i];
    row.r_estimated = estimates[i].r_real;
    row.r_true = model[i].radius_mm;
    row.pos_error = ev.alignment.per_point_error[i];
    row.radius_error = row.r_estimated - row.r_true;
    pe.push_back(row.pos_error);
    re.push_back(row.radius_error);
    ev.rows.push_back(row);
  }
  ev.summary = summarize_hole_errors(pe, re);
  return ev;
}

// ---------------------------------------------------------------------------
// Trials

/// Ten holes with radii spread evenly over [0.7, 5.0] mm, laid out on two rows.
inline std::vector<sim::Hole> default_hole_model() {
  std::vector<sim::Hole> holes;
  for (int i = 0; i < 10; ++i) {
    const double r = 0.7 + (5.0 - 0.7) * double(i) / 9.0;
    holes.push_back({Vec2{15.0 * double(i % 5), 15.0 * double(i / 5)}, r});
  }
  return holes;
}

/// Uniform start point whose probe clears the wall by at least 10% of the
/// free radius.
inline Vec2 random_start(const sim::Hole& hole, const ProbeSpec& probe, std::mt19937_64& rng) {
  const double free_r = 0.9 * (hole.radius_mm - radius_offset_mm(probe));
  if (!(free_r > 0.0)) fail(ErrorKind::precondition, "probe does not fit in the hole");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = free_r * std::sqrt(u(rng));
  const double a = 2.0 * std::numbers::pi * u(rng);
  return hole.center + Vec2{r * std::cos(a), r * std::sin(a)};
}

/// Event-count threshold from quiescent sensing windows with the probe
/// parked at the centre of the first hole.
inline double calibrate_contact_threshold(const sim::HoleWorld& world, const ProbeSpec& probe,
                                          const CollisionConfig& cfg, std::uint64_t seed) {
  if (world.holes.empty()) fail(ErrorKind::input, "hole world is empty");
  const sim::Hole& h = world.holes.front();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> counts(cfg.quiescent_calibration_windows);
  for (auto& c : counts) {
    c = static_cast<std::size_t>(sim::sense_window(world, h, h.center, probe.diameter_mm, rng));
  }
  return calibrate_threshold(std::span<const std::size_t>(counts), cfg);
}

/// One full measurement of every hole in the world from random starts.
inline HoleEvaluation run_hole_trial(const sim::HoleWorld& world, const ProbeSpec& probe,
                                     const CollisionConfig& detector, std::uint64_t seed) {
  sim::validate(world);
  std::vector<HoleEstimate> est;
  for (std::size_t i = 0; i < world.holes.size(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, 0x48, i));
    const Vec2 start = random_start(world.holes[i], probe, rng);
    est.push_back(cross_search(world, start, probe, detector, derive_seed(seed, 0x43, i)));
  }
  return evaluate_holes(est, world.holes);
}

}  // namespace spiketrack
