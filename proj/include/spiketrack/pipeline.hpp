// SPDX-License-Identifier: Apache-2.0
//
// Window-by-window marker pipeline: state map, denoiser, blob detection,
// association and the damped update, plus equilibrium-epoch capture for the
// bootstrap calibration.
#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "spiketrack/denoise.hpp"
#include "spiketrack/error.hpp"
#include "spiketrack/events.hpp"
#include "spiketrack/statemap.hpp"
#include "spiketrack/tracker.hpp"

namespace spiketrack {

struct PipelineConfig {
  TrackerConfig tracker{};
  DenoiserConfig denoiser{};
};

/// state map -> snapshot -> denoise -> centroids, one window at a time.
class MarkerPipeline {
 public:
  MarkerPipeline(std::uint16_t width, std::uint16_t height, PipelineConfig cfg = {},
                 DenoiserRegistry& registry = default_denoiser_registry())
      : cfg_(cfg), map_(width, height), registry_(&registry) {
    validate(cfg_.tracker);
    validate(cfg_.denoiser);
  }

  const std::vector<Centroid>& process_window(std::span<const Event> events) {
    map_.apply_batch(events);
    clean_ = denoise(map_.snapshot(), cfg_.denoiser, *registry_);
    detections_ = detect_centroids(clean_, cfg_.tracker);
    return detections_;
  }

  const StateMap& map() const noexcept { return map_; }
  const BinaryImage& denoised() const noexcept { return clean_; }
  const std::vector<Centroid>& detections() const noexcept { return detections_; }
  const PipelineConfig& config() const noexcept { return cfg_; }

 private:
  PipelineConfig cfg_;
  StateMap map_;
  DenoiserRegistry* registry_;
  BinaryImage clean_;
  std::vector<Centroid> detections_;
};

/// Equilibrium test for calibration: a frame counts as still when every
/// expected marker is detected and none moved more than `still_px` against
/// the frame `lookback_windows` earlier. One epoch is captured per stretch,
/// once it has been still for `min_still_windows`.
struct EquilibriumConfig {
  double still_px = 0.5;
  std::size_t lookback_windows = 10;
  std::size_t min_still_windows = 50;
};

class EquilibriumDetector {
 public:
  EquilibriumDetector(const TrackerConfig& tracker, EquilibriumConfig cfg = {})
      : tracker_(tracker), cfg_(cfg) {}

  /// Returns true when `dets` was captured as a new epoch.
  bool feed(const std::vector<Centroid>& dets) {
    const bool still = is_still(dets);
    history_.push_back(dets);
    if (history_.size() > cfg_.lookback_windows) history_.pop_front();
    run_ = still ? run_ + 1 : 0;
    if (run_ == cfg_.min_still_windows) {
      epochs_.push_back(dets);
      return true;
    }
    return false;
  }

  const std::vector<std::vector<Centroid>>& epochs() const noexcept { return epochs_; }

 private:
  bool is_still(const std::vector<Centroid>& dets) const {
    if (dets.size() != tracker_.expected_markers) return false;
    if (history_.size() < cfg_.lookback_windows) return false;
    const auto& past = history_.front();
    if (past.size() != dets.size()) return false;
    std::vector<Vec2> a(dets.size()), b(past.size());
    for (std::size_t i = 0; i < dets.size(); ++i) a[i] = dets[i].pos;
    for (std::size_t i = 0; i < past.size(); ++i) b[i] = past[i].pos;
    const auto match = match_detections(a, b, tracker_.assoc_radius, NeighborSearch::kd_tree);
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (match[i] == std::numeric_limits<std::size_t>::max()) return false;
      if (distance(a[match[i]], b[i]) > cfg_.still_px) return false;
    }
    return true;
  }

  TrackerConfig tracker_;
  EquilibriumConfig cfg_;
  std::deque<std::vector<Centroid>> history_;
  std::vector<std::vector<Centroid>> epochs_;
  std::size_t run_ = 0;
};

/// Calibration followed by tracking on the same persistent state map.
class TrackingSession {
 public:
  using FrameCallback = std::function<void(std::uint64_t t_us, std::span<const MarkerTrack>)>;

  TrackingSession(std::uint16_t width, std::uint16_t height, PipelineConfig cfg = {},
                  EquilibriumConfig eq = {},
                  DenoiserRegistry& registry = default_denoiser_registry())
      : pipeline_(width, height, cfg, registry), eq_(eq) {}

  /// Runs the calibration stream and initialises the tracks from the
  /// captured equilibrium epochs. Returns the number of epochs used.
  std::size_t calibrate_from(std::span<const Event> events, std::uint64_t t_start,
                             std::uint64_t t_end) {
    const auto& tc = pipeline_.config().tracker;
    EquilibriumDetector eq(tc, eq_);
    for_each_window(events, tc.window_us, t_start, t_end,
                    [&](std::uint64_t, std::uint64_t, std::span<const Event> evs) {
                      eq.feed(pipeline_.process_window(evs));
                    });
    if (eq.epochs().empty()) {
      fail(ErrorKind::calibration, "no equilibrium epoch found in calibration stream");
    }
    tracks_ = calibrate(eq.epochs(), tc);
    calibrated_ = true;
    return eq.epochs().size();
  }

  /// Calibrates directly from supplied epochs (state map left untouched).
  void calibrate_from_epochs(std::span<const std::vector<Centroid>> epochs) {
    tracks_ = calibrate(epochs, pipeline_.config().tracker);
    calibrated_ = true;
  }

  /// Tracks every window of the stream; `on_frame` sees the updated tracks.
  std::size_t track(std::span<const Event> events, std::uint64_t t_start, std::uint64_t t_end,
                    const FrameCallback& on_frame = {}) {
    if (!calibrated_) fail(ErrorKind::precondition, "tracking before calibration");
    const auto& tc = pipeline_.config().tracker;
    std::size_t frames = 0;
    for_each_window(events, tc.window_us, t_start, t_end,
                    [&](std::uint64_t, std::uint64_t t0, std::span<const Event> evs) {
                      const std::uint64_t t = t0 + tc.window_us;
                      track_step(pipeline_.process_window(evs), tracks_, tc, t);
                      if (on_frame) on_frame(t, tracks_);
                      ++frames;
                    });
    return frames;
  }

  const std::vector<MarkerTrack>& tracks() const noexcept { return tracks_; }
  std::vector<MarkerTrack>& tracks() noexcept { return tracks_; }
  const MarkerPipeline& pipeline() const noexcept { return pipeline_; }
  TrackingReport report() const { return evaluate_tracking(tracks_, pipeline_.config().tracker); }

 private:
  MarkerPipeline pipeline_;
  EquilibriumConfig eq_;
  std::vector<MarkerTrack> tracks_;
  bool calibrated_ = false;
};

}  // namespace spiketrack
