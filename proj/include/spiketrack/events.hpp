// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "spiketrack/error.hpp"

namespace spiketrack {

inline constexpr std::uint16_t kDefaultWidth = 320;
inline constexpr std::uint16_t kDefaultHeight = 320;
inline constexpr std::uint64_t kDefaultWindowUs = 1000;

/// One contrast event. Polarity is +1 (brightening) or -1 (darkening).
struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 1;

  friend constexpr bool operator==(const Event&, const Event&) = default;
};

struct EventStreamHeader {
  std::uint16_t width = kDefaultWidth;
  std::uint16_t height = kDefaultHeight;
  std::uint64_t t_start = 0;
  std::uint64_t t_end = 0;  // inclusive upper bound on event timestamps
  std::uint64_t event_count = 0;

  friend constexpr bool operator==(const EventStreamHeader&, const EventStreamHeader&) = default;
};

struct EventStream {
  EventStreamHeader header;
  std::vector<Event> events;
};

/// Background activity: homogeneous Poisson process, `rate` events per pixel per second.
struct NoiseModel {
  double rate = 1.0;
  std::uint64_t seed = 0;
};

struct EventWindow {
  std::uint64_t index = 0;
  std::uint64_t t0 = 0;
  std::uint64_t duration = kDefaultWindowUs;
  std::vector<Event> events;

  std::size_t count() const noexcept { return events.size(); }
};

inline bool is_time_sorted(std::span<const Event> events) {
  return std::is_sorted(events.begin(), events.end(),
                        [](const Event& a, const Event& b) { return a.t < b.t; });
}

inline void sort_by_time(std::vector<Event>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
}

/// Header describing `events` over [t_start, t_end].
inline EventStreamHeader make_header(std::span<const Event> events, std::uint16_t width,
                                     std::uint16_t height, std::uint64_t t_start,
                                     std::uint64_t t_end) {
  return EventStreamHeader{width, height, t_start, t_end, events.size()};
}

/// Number of windows of `duration_us` needed to tile [t_start, t_end] inclusive.
inline std::uint64_t window_count(std::uint64_t t_start, std::uint64_t t_end,
                                  std::uint64_t duration_us) {
  return t_end < t_start ? 0 : (t_end - t_start) / duration_us + 1;
}

/// Streaming form of window_stream: calls `fn(index, t0, span)` for every window
/// tiling [t_start, t_end], including empty ones. No copies are made.
template <class Fn>
void for_each_window(std::span<const Event> events, std::uint64_t duration_us,
                     std::uint64_t t_start, std::uint64_t t_end, Fn&& fn) {
  if (duration_us == 0) fail(ErrorKind::parameter, "window duration must be >= 1 us");
  if (!is_time_sorted(events)) fail(ErrorKind::ordering, "events are not sorted by time");
  if (!events.empty() && (events.front().t < t_start || events.back().t > t_end)) {
    fail(ErrorKind::range, "events fall outside the windowed span");
  }
  const std::uint64_t n = window_count(t_start, t_end, duration_us);
  std::size_t begin = 0;
  for (std::uint64_t w = 0; w < n; ++w) {
    const std::uint64_t t0 = t_start + w * duration_us;
    const std::uint64_t t1 = t0 + duration_us;
    std::size_t end = begin;
    while (end < events.size() && events[end].t < t1) ++end;
    fn(w, t0, events.subspan(begin, end - begin));
    begin = end;
  }
}

inline std::vector<EventWindow> window_stream(std::span<const Event> events,
                                              std::uint64_t duration_us,
                                              std::uint64_t t_start, std::uint64_t t_end) {
  std::vector<EventWindow> out;
  for_each_window(events, duration_us, t_start, t_end,
                  [&](std::uint64_t idx, std::uint64_t t0, std::span<const Event> evs) {
                    out.push_back(EventWindow{idx, t0, duration_us, {evs.begin(), evs.end()}});
                  });
  return out;
}

/// Windows spanning the first to the last event.
inline std::vector<EventWindow> window_stream(std::span<const Event> events,
                                              std::uint64_t duration_us) {
  if (duration_us == 0) fail(ErrorKind::parameter, "window duration must be >= 1 us");
  if (events.empty()) return {};
  return window_stream(events, duration_us, events.front().t, events.back().t);
}

inline std::vector<std::size_t> window_counts(std::span<const EventWindow> windows) {
  std::vector<std::size_t> counts;
  counts.reserve(windows.size());
  for (const auto& w : windows) counts.push_back(w.count());
  return counts;
}

}  // namespace spiketrack
