// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "spiketrack/event_file.hpp"
#include "spiketrack/generator.hpp"
#include "spiketrack/sim/approach.hpp"
#include "spiketrack/sim/holes.hpp"
#include "spiketrack/sim/scene.hpp"
#include "test_support.hpp"

namespace st = spiketrack;
namespace sim = spiketrack::sim;

namespace {

sim::InteractionParams bare(double amplitude, double direction_rad = 0.0) {
  sim::InteractionParams p;
  p.amplitude_px = amplitude;
  p.direction_rad = direction_rad;
  p.bootstrap = false;
  return p;
}

// RK4 integration of dy/dt = (u(t) - y) / tau for the x component of the
// commanded load, from the start of the program up to each requested time.
std::vector<double> integrate_lag_x(const sim::HysteresisResponse& resp, std::vector<double> times) {
  const double tau = resp.model().tau_ms * 1000.0;
  const double h = 2.0;
  auto u = [&](double t) { return resp.commanded(t).tx; };
  auto f = [&](double t, double y) { return (u(t) - y) / tau; };
  std::vector<double> out;
  double t = resp.program().start_us(), y = u(t);
  for (double target : times) {
    while (t < target) {
      const double dt = std::min(h, target - t);
      const double k1 = f(t, y), k2 = f(t + dt / 2, y + dt / 2 * k1);
      const double k3 = f(t + dt / 2, y + dt / 2 * k2), k4 = f(t + dt, y + dt * k3);
      y += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      t += dt;
    }
    out.push_back(y);
  }
  return out;
}

double max_deviation(const sim::SimScene& s, double t) {
  double m = 0.0;
  const auto pos = s.marker_positions(t);
  for (std::size_t i = 0; i < pos.size(); ++i) m = std::max(m, st::distance(pos[i], s.layout.rest[i]));
  return m;
}

}  // namespace

TEST(Interaction, ZeroAmplitudePressIsIdentity) {
  const auto s = sim::make_interaction(sim::InteractionKind::press, bare(0.0), 1);
  for (double t = 0; t <= double(s.t_end_us); t += 997.0) {
    const auto pos = s.marker_positions(t);
    for (std::size_t i = 0; i < pos.size(); ++i) EXPECT_EQ(pos[i], s.layout.rest[i]);
  }
}

TEST(Interaction, LayoutIsUniformNonOverlappingGrid) {
  const auto s = sim::make_interaction(sim::InteractionKind::slide, bare(5.0), 1);
  ASSERT_EQ(s.marker_count(), 64u);
  for (std::size_t i = 0; i < 64; ++i) {
    if (i % 8 != 7) {
      EXPECT_DOUBLE_EQ(s.layout.rest[i + 1].x - s.layout.rest[i].x, 36.0);
    }
    if (i < 56) {
      EXPECT_DOUBLE_EQ(s.layout.rest[i + 8].y - s.layout.rest[i].y, 36.0);
    }
  }
  EXPECT_GT(36.0, 2.0 * s.layout.radius_px);
  for (const auto& r : s.layout.rest) {
    EXPECT_GE(r.x - s.layout.radius_px, 0.0);
    EXPECT_LE(r.x + s.layout.radius_px, 319.0);
  }
}

TEST(Interaction, TorsionDisplacesByRadiusTimesAngle) {
  const auto s = sim::make_interaction(sim::InteractionKind::torsion, bare(14.0), 1);
  const auto& keys = s.response.program().keyframes();
  const double theta = std::max_element(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
                         return std::abs(a.q.rot) < std::abs(b.q.rot);
                       })->q.rot;
  ASSERT_GT(theta, 0.0);
  const sim::LoadState q{0, 0, theta, 0};
  for (const auto& r : s.layout.rest) {
    const st::Vec2 rel = r - s.layout.center;
    EXPECT_NEAR(sim::displacement(q, rel).norm(), rel.norm() * theta, 1e-12);
  }
  EXPECT_EQ(sim::displacement(q, {0.0, 0.0}), (st::Vec2{0.0, 0.0}));
  const st::Vec2 corner = s.layout.rest.front() - s.layout.center;
  EXPECT_NEAR(sim::displacement(q, corner).norm(), 14.0, 1e-9);
}

TEST(Interaction, DragReleaseResidualMatchesOde) {
  auto p = bare(12.0);
  const auto s = sim::make_interaction(sim::InteractionKind::drag_release, p, 1);
  ASSERT_EQ(s.response.episodes().size(), 1u);
  const auto ep = s.response.episodes().front();
  const double tau = p.hysteresis.tau_ms * 1000.0, decay = p.hysteresis.residual_decay_ms * 1000.0;
  std::vector<double> times;
  for (double dt = 5 * tau; ep.unloaded_us + dt < double(s.t_end_us); dt += 5000.0) {
    times.push_back(ep.unloaded_us + dt);
  }
  const auto lag = integrate_lag_x(s.response, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double since = times[k] - ep.unloaded_us;
    const double residual = p.hysteresis.residual_fraction * 12.0 * std::exp(-since / decay) *
                            (1.0 - std::exp(-since / tau));
    const double expected = lag[k] + residual;
    const double got = s.marker_positions(times[k])[0].x - s.layout.rest[0].x;
    EXPECT_NEAR(got, expected, 1e-3) << "t=" << times[k];
    EXPECT_GT(got, 0.5);
    EXPECT_LT(got, 4.0);
  }
}

TEST(Interaction, RestStateClosureAfterUnload) {
  for (auto kind : {sim::InteractionKind::press, sim::InteractionKind::slide, sim::InteractionKind::torsion,
                    sim::InteractionKind::circular, sim::InteractionKind::drag_release}) {
    auto p = bare(12.0, 0.3);
    p.settle_ms = 800.0;
    const auto s = sim::make_interaction(kind, p, 3);
    const auto ep = s.response.episodes().back();
    const double tau = p.hysteresis.tau_ms * 1000.0;
    const double bound = p.hysteresis.residual_fraction * 12.0 + 1e-9;
    double prev = std::numeric_limits<double>::infinity();
    for (double t = ep.unloaded_us + 5 * tau; t <= double(s.t_end_us); t += 1000.0) {
      const double d = max_deviation(s, t);
      EXPECT_LE(d, bound) << sim::to_string(kind);
      EXPECT_LE(d, prev + 1e-12) << sim::to_string(kind);
      prev = d;
    }
  }
}

TEST(Interaction, ExcessiveAmplitudeIsRejected) {
  EXPECT_ERROR_KIND(sim::make_interaction(sim::InteractionKind::slide, bare(18.0), 1), parameter);
  EXPECT_ERROR_KIND(sim::make_interaction(sim::InteractionKind::slide, bare(-1.0), 1), parameter);
  auto p = bare(5.0);
  p.hysteresis.tau_ms = 0.0;
  EXPECT_ERROR_KIND(sim::make_interaction(sim::InteractionKind::slide, p, 1), parameter);
  p = bare(5.0);
  p.hysteresis.residual_fraction = 1.0;
  EXPECT_ERROR_KIND(sim::make_interaction(sim::InteractionKind::slide, p, 1), parameter);
  EXPECT_ERROR_KIND(sim::parse_interaction_kind("wiggle"), parameter);
}

TEST(Interaction, EveryKindStartsAndEndsAtRestCommand) {
  for (auto kind : {sim::InteractionKind::press, sim::InteractionKind::slide, sim::InteractionKind::torsion,
                    sim::InteractionKind::circular, sim::InteractionKind::drag_release}) {
    const auto s = sim::make_interaction(kind, sim::InteractionParams{}, 9);
    EXPECT_TRUE(s.response.commanded(0.0).is_zero());
    EXPECT_TRUE(s.response.commanded(double(s.t_end_us)).is_zero());
    EXPECT_EQ(sim::parse_interaction_kind(sim::to_string(kind)), kind);
  }
}

TEST(Interaction, FieldIsContinuousInTime) {
  const auto s = sim::make_interaction(sim::InteractionKind::circular, sim::InteractionParams{}, 4);
  auto prev = s.marker_positions(0.0);
  for (double t = 10.0; t <= double(s.t_end_us); t += 10.0) {
    const auto cur = s.marker_positions(t);
    for (std::size_t i = 0; i < cur.size(); ++i) ASSERT_LT(st::distance(cur[i], prev[i]), 0.05);
    prev = cur;
  }
}

TEST(GroundTruth, StartsAtRest) {
  const auto s = sim::make_interaction(sim::InteractionKind::slide, sim::InteractionParams{}, 2);
  EXPECT_EQ(sim::ground_truth_positions(s, 0.0), s.layout.rest);
}

TEST(GroundTruth, ResidualDecaysToRest) {
  auto p = bare(12.0);
  p.settle_ms = 10 * p.hysteresis.residual_decay_ms + 200.0;
  const auto s = sim::make_interaction(sim::InteractionKind::drag_release, p, 1);
  const double t = s.response.episodes().back().unloaded_us + 10 * p.hysteresis.residual_decay_ms * 1000.0;
  ASSERT_LE(t, double(s.t_end_us));
  EXPECT_LE(max_deviation(s, t), 0.05);
}

TEST(GroundTruth, MidSlideMatchesFirstOrderLag) {
  const auto s = sim::make_interaction(sim::InteractionKind::slide, bare(10.0), 1);
  std::vector<double> times;
  for (double t = 20000.0; t < 400000.0; t += 7919.0) times.push_back(t);
  const auto lag = integrate_lag_x(s.response, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    EXPECT_NEAR(s.response.lagged(times[k]).tx, lag[k], 1e-4);
    EXPECT_NEAR(sim::ground_truth_positions(s, times[k])[10].x - s.layout.rest[10].x, lag[k], 1e-4);
  }
}

TEST(GroundTruth, OutOfSpanIsRangeError) {
  const auto s = sim::make_interaction(sim::InteractionKind::slide, sim::InteractionParams{}, 2);
  EXPECT_ERROR_KIND(sim::ground_truth_positions(s, -1.0), range);
  EXPECT_ERROR_KIND(sim::ground_truth_positions(s, double(s.t_end_us) + 1.0), range);
  EXPECT_NO_THROW(sim::ground_truth_positions(s, double(s.t_end_us)));
}

TEST(GroundTruth, LagNeverLeadsCommand) {
  const auto s = sim::make_interaction(sim::InteractionKind::drag_release, bare(12.0, 0.0), 1);
  const auto ep = s.response.episodes().front();
  for (double t = ep.start_us; t <= ep.release_us; t += 500.0) {
    EXPECT_LE(s.response.lagged(t).tx, s.response.commanded(t).tx + 1e-12);
    EXPECT_GE(s.response.lagged(t).tx, 0.0);
  }
  for (double t = ep.release_us + 1000.0; t <= ep.unloaded_us; t += 100.0) {
    EXPECT_GE(s.response.lagged(t).tx, s.response.commanded(t).tx - 1e-12);
  }
}

TEST(GroundTruth, DeterministicPerSeed) {
  const auto a = sim::make_interaction(sim::InteractionKind::slide, sim::InteractionParams{}, 77);
  const auto b = sim::make_interaction(sim::InteractionKind::slide, sim::InteractionParams{}, 77);
  const auto c = sim::make_interaction(sim::InteractionKind::slide, sim::InteractionParams{}, 78);
  const double t = double(a.bootstrap_end_us) + 50000.0;
  EXPECT_EQ(a.marker_positions(t), b.marker_positions(t));
  EXPECT_NE(a.marker_positions(t), c.marker_positions(t));
}

TEST(GroundTruth, RenderIsPureFunctionOfPositions) {
  const auto s = sim::make_interaction(sim::InteractionKind::circular, sim::InteractionParams{}, 5);
  for (double t = 0.0; t < double(s.t_end_us); t += 123457.0) {
    EXPECT_EQ(s.render(t), s.render_disks(sim::ground_truth_positions(s, t)));
  }
}

TEST(GroundTruth, StreamsAreByteIdentical) {
  auto p = bare(8.0);
  p.settle_ms = 50.0;
  const auto s = sim::make_interaction(sim::InteractionKind::slide, p, 6);
  const st::NoiseModel noise{0.5, 13};
  const auto a = st::generate_events(s, st::kDefaultContrastThreshold, noise, 0, s.t_end_us);
  const auto b = st::generate_events(s, st::kDefaultContrastThreshold, noise, 0, s.t_end_us);
  const auto ha = st::make_header(a, s.width, s.height, 0, s.t_end_us);
  EXPECT_EQ(st::encode_event_stream(ha, a), st::encode_event_stream(ha, b));
  EXPECT_FALSE(a.empty());
}

// ---------------------------------------------------------------------------

TEST(Approach, StationaryProbeIsNoiseOnly) {
  sim::ApproachScenario s;
  s.v_mps = 0.0;
  const st::NoiseModel noise{1.0, 3};
  const auto out = sim::make_approach_stream(s, noise);
  EXPECT_FALSE(out.t_contact_us.has_value());
  const auto bg = st::generate_noise(s.width, s.height, noise, 0, out.header.t_end + 1);
  EXPECT_EQ(out.events, bg);
}

TEST(Approach, BurstDominatesWithinTwoWindows) {
  sim::ApproachScenario s;
  s.v_mps = 0.1;
  const auto out = sim::make_approach_stream(s, {1.0, 4});
  ASSERT_TRUE(out.t_contact_us.has_value());
  EXPECT_DOUBLE_EQ(*out.t_contact_us, 250000.0 + 5.0 / 1e-4);
  const auto windows = st::window_stream(out.events, 1000, 0, out.header.t_end);
  const auto counts = st::window_counts(windows);
  const std::size_t contact_w = std::size_t(*out.t_contact_us) / 1000;
  const std::size_t pre_max = *std::max_element(counts.begin(), counts.begin() + long(contact_w));
  bool fired = false;
  for (std::size_t w = contact_w; w < contact_w + 2; ++w) fired = fired || counts[w] > 3 * pre_max;
  EXPECT_TRUE(fired);
}

TEST(Approach, BurstSlopeScalesWithVelocity) {
  auto slope = [](double v) {
    sim::ApproachScenario s;
    s.v_mps = v;
    s.seed = 8;
    const auto out = sim::make_approach_stream(s, {0.0, 0});
    return double(out.events.size()) / double(s.post_contact_us);
  };
  for (double v : {0.02, 0.05, 0.09}) EXPECT_NEAR(slope(2 * v) / slope(v), 2.0, 0.05) << v;
}

TEST(Approach, KinematicsAndValidation) {
  sim::ApproachScenario s;
  s.v_mps = 0.05;
  EXPECT_DOUBLE_EQ(sim::probe_position_mm(s, 100.0), 0.0);
  EXPECT_NEAR(sim::probe_position_mm(s, 250000.0 + 20000.0), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(sim::penetration_mm(s, *sim::contact_time_us(s)), 0.0);
  s.v_mps = -0.1;
  EXPECT_ERROR_KIND(sim::make_approach_stream(s, {}), parameter);
  s.v_mps = 0.1;
  s.burst_events_per_mm = 0.0;
  EXPECT_ERROR_KIND(sim::validate(s), parameter);
  EXPECT_ERROR_KIND(sim::validate(sim::RobotReaction{0.0, 2.0}), parameter);
  EXPECT_ERROR_KIND(sim::validate(sim::RobotReaction{8.0, -1.0}), parameter);
  EXPECT_NEAR(sim::RobotReaction{}.stopping_distance_mm(0.1), 0.8 + 2.5, 1e-12);
}

TEST(Approach, FramesSpreadWithPenetration) {
  sim::ApproachScenario s;
  s.v_mps = 0.1;
  const auto layout = sim::make_grid_layout(8, 8, 36.0, 6.0, 320, 320);
  sim::FrameSensorModel cam;
  cam.jitter_px = 0.0;
  const auto f = sim::make_approach_frames(s, cam, layout);
  ASSERT_FALSE(f.frames.empty());
  const double tc = *sim::contact_time_us(s);
  for (std::size_t k = 0; k < f.frames.size(); ++k) {
    if (f.t_us[k] <= tc) {
      EXPECT_EQ(f.frames[k], f.init);
    } else {
      EXPECT_NE(f.frames[k], f.init);
    }
  }
  EXPECT_NEAR(f.t_us[1] - f.t_us[0], 1e6 / 30.0, 1e-6);
}

// ---------------------------------------------------------------------------

TEST(HoleWorld, Validation) {
  sim::HoleWorld w;
  w.holes = {{{0, 0}, 0.6}};
  EXPECT_ERROR_KIND(sim::validate(w), parameter);
  w.holes = {{{0, 0}, 5.1}};
  EXPECT_ERROR_KIND(sim::validate(w), parameter);
  w.holes = {{{0, 0}, 2.0}, {{3, 0}, 1.5}};
  EXPECT_ERROR_KIND(sim::validate(w), parameter);
  w.holes = {{{0, 0}, 2.0}, {{5, 0}, 1.5}};
  EXPECT_NO_THROW(sim::validate(w));
  w.trigger_depth_mm = -0.1;
  EXPECT_ERROR_KIND(sim::validate(w), parameter);
}

TEST(HoleWorld, ContactSemantics) {
  sim::HoleWorld w;
  w.holes = {{{10, 20}, 3.0}};
  EXPECT_EQ(sim::hole_containing(w, {10, 20}), std::optional<std::size_t>(0));
  EXPECT_FALSE(sim::hole_containing(w, {14, 20}).has_value());
  const auto& h = w.holes[0];
  EXPECT_NEAR(sim::wall_penetration_mm(h, {10.0 + 2.625, 20}, 0.75), 0.0, 1e-12);
  std::mt19937_64 rng(1);
  EXPECT_EQ(sim::sense_window(w, h, {10.0 + 2.625 + 0.39, 20}, 0.75, rng), 0.0);
  EXPECT_EQ(sim::sense_window(w, h, {10.0 + 2.625 + 0.4, 20}, 0.75, rng), w.contact_count);
}
