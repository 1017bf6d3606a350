// SPDX-License-Identifier: Apache-2.0
#include "spiketrack/pipeline.hpp"

#include <gtest/gtest.h>

#include "spiketrack/generator.hpp"
#include "spiketrack/sim/scene.hpp"
#include "test_support.hpp"

namespace st = spiketrack;
namespace sim = spiketrack::sim;

namespace {

struct Recorded {
  sim::SimScene scene;
  std::vector<st::MarkerTrack> calibrated;
  std::size_t epochs = 0;
  std::vector<std::vector<st::Centroid>> detections;  // per tracking window
};

const Recorded& drag_release_run() {
  static const Recorded rec = [] {
    Recorded r;
    sim::InteractionParams p;
    p.amplitude_px = 12.0;
    p.period_ms = 300.0;
    p.direction_rad = 0.0;
    r.scene = sim::make_interaction(sim::InteractionKind::drag_release, p, 7);
    const auto events = st::generate_events(r.scene, st::kDefaultContrastThreshold, {0.01, 7}, 0,
                                            r.scene.t_end_us + 1);
    const std::uint64_t boot = r.scene.bootstrap_end_us;
    const auto split = std::lower_bound(events.begin(), events.end(), boot,
                                        [](const st::Event& e, std::uint64_t t) { return e.t < t; });
    const std::span<const st::Event> calib(events.begin(), split), stream(split, events.end());
    st::TrackingSession session(r.scene.width, r.scene.height);
    r.epochs = session.calibrate_from(calib, 0, boot - 1);
    r.calibrated = session.tracks();
    st::MarkerPipeline pipe(r.scene.width, r.scene.height);
    pipe.process_window(calib);
    st::for_each_window(stream, 1000, boot, r.scene.t_end_us,
                        [&](std::uint64_t, std::uint64_t, std::span<const st::Event> evs) {
                          r.detections.push_back(pipe.process_window(evs));
                        });
    return r;
  }();
  return rec;
}

st::TrackingReport replay(const Recorded& r, double gamma) {
  st::TrackerConfig cfg;
  cfg.gamma = gamma;
  auto tracks = r.calibrated;
  std::uint64_t t = r.scene.bootstrap_end_us;
  for (const auto& d : r.detections) st::track_step(d, tracks, cfg, t += 1000);
  return st::evaluate_tracking(tracks, cfg);
}

}  // namespace

TEST(TrackingSession, TrackBeforeCalibrationIsPrecondition) {
  st::TrackingSession s(64, 64);
  EXPECT_ERROR_KIND(s.track(std::vector<st::Event>{}, 0, 999), precondition);
}

TEST(TrackingSession, EmptyCalibrationStreamFails) {
  st::TrackingSession s(64, 64);
  EXPECT_ERROR_KIND(s.calibrate_from(std::vector<st::Event>{}, 0, 99999), calibration);
}

TEST(EquilibriumDetector, CapturesOneEpochPerStillStretch) {
  st::TrackerConfig tc;
  tc.expected_markers = 2;
  st::EquilibriumDetector eq(tc, {0.5, 3, 5});
  const std::vector<st::Centroid> a{{{10, 10}, 50}, {{40, 10}, 50}};
  std::vector<st::Centroid> moved = a;
  for (int i = 0; i < 20; ++i) eq.feed(a);
  EXPECT_EQ(eq.epochs().size(), 1u);
  for (int i = 0; i < 3; ++i) {
    for (auto& c : moved) c.pos += st::Vec2{1.0, 0.0};
    eq.feed(moved);
  }
  for (int i = 0; i < 20; ++i) eq.feed(moved);
  EXPECT_EQ(eq.epochs().size(), 2u);
  eq.feed({a.front()});
  EXPECT_EQ(eq.epochs().size(), 2u);
}

TEST(TrackingSession, BootstrapCalibrationFindsNeutralPoint) {
  const auto& r = drag_release_run();
  EXPECT_GE(r.epochs, 4u);
  ASSERT_EQ(r.calibrated.size(), 64u);
  for (const auto& tr : r.calibrated) {
    double best = 1e9;
    for (const auto& p : r.scene.layout.rest) best = std::min(best, st::distance(p, tr.p_init));
    EXPECT_LE(best, 0.5);
  }
}

TEST(TrackingSession, DampingReducesReturnError) {
  const auto& r = drag_release_run();
  const auto damped = replay(r, 0.7);
  const auto plain = replay(r, 1.0);
  EXPECT_TRUE(damped.success);
  EXPECT_LT(damped.mean_error, 1.5);
  EXPECT_LT(damped.mean_error, plain.mean_error);
}

TEST(TrackingSession, SessionMatchesManualReplay) {
  const auto& r = drag_release_run();
  st::TrackingSession s(r.scene.width, r.scene.height);
  s.calibrate_from_epochs(std::vector<std::vector<st::Centroid>>{
      st::detect_centroids(r.scene.render(0.0), st::TrackerConfig{})});
  EXPECT_EQ(s.tracks().size(), 64u);
  std::size_t calls = 0;
  const auto frames = s.track(std::vector<st::Event>{}, 0, 9999,
                              [&](std::uint64_t t, std::span<const st::MarkerTrack> tr) {
                                EXPECT_EQ(t % 1000, 0u);
                                EXPECT_EQ(tr.size(), 64u);
                                ++calls;
                              });
  EXPECT_EQ(frames, 10u);
  EXPECT_EQ(calls, 10u);
  for (const auto& tr : s.tracks()) EXPECT_TRUE(tr.held);
  EXPECT_TRUE(s.report().success);
}
