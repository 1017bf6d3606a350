// SPDX-License-Identifier: Apache-2.0
//
// Binary ".evt" container. Little-endian throughout.
//
//   offset size field
//   0      4    magic "SPTK"
//   4      2    version (1)
//   6      2    width
//   8      2    height
//   10     2    reserved (0)
//   12     8    event_count
//   20     8    t_start (us)
//   28     8    t_end (us)
//   36     16*n records {t u64, x u16, y u16, polarity i8, pad[3]}
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "spiketrack/error.hpp"
#include "spiketrack/events.hpp"

namespace spiketrack {

inline constexpr std::array<char, 4> kEvtMagic{'S', 'P', 'T', 'K'};
inline constexpr std::uint16_t kEvtVersion = 1;
inline constexpr std::size_t kEvtHeaderSize = 36;
inline constexpr std::size_t kEvtRecordSize = 16;

namespace detail {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

template <class T>
T get_le(const std::uint8_t* p) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return static_cast<T>(u);
}

}  // namespace detail

inline void validate_stream(const EventStreamHeader& header, std::span<const Event> events) {
  if (header.width == 0 || header.height == 0) fail(ErrorKind::consistency, "zero sensor dimension");
  if (header.t_start > header.t_end) fail(ErrorKind::consistency, "t_start > t_end");
  if (header.event_count != events.size()) {
    fail(ErrorKind::consistency, "header event_count " + std::to_string(header.event_count) +
                                     " != payload size " + std::to_string(events.size()));
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (i > 0 && e.t < events[i - 1].t) {
      fail(ErrorKind::ordering, "event " + std::to_string(i) + " precedes its predecessor", i);
    }
    if (e.x >= header.width || e.y >= header.height) {
      fail(ErrorKind::validation, "event " + std::to_string(i) + " outside sensor bounds", i);
    }
    if (e.polarity != 1 && e.polarity != -1) {
      fail(ErrorKind::validation, "event " + std::to_string(i) + " has invalid polarity", i);
    }
    if (e.t < header.t_start || e.t > header.t_end) {
      fail(ErrorKind::validation, "event " + std::to_string(i) + " outside [t_start, t_end]", i);
    }
  }
}

inline std::vector<std::uint8_t> encode_event_stream(const EventStreamHeader& header,
                                                     std::span<const Event> events) {
  validate_stream(header, events);
  std::vector<std::uint8_t> out;
  out.reserve(kEvtHeaderSize + kEvtRecordSize * events.size());
  out.insert(out.end(), kEvtMagic.begin(), kEvtMagic.end());
  detail::put_le<std::uint16_t>(out, kEvtVersion);
  detail::put_le<std::uint16_t>(out, header.width);
  detail::put_le<std::uint16_t>(out, header.height);
  detail::put_le<std::uint16_t>(out, 0);
  detail::put_le<std::uint64_t>(out, header.event_count);
  detail::put_le<std::uint64_t>(out, header.t_start);
  detail::put_le<std::uint64_t>(out, header.t_end);
  for (const Event& e : events) {
    detail::put_le<std::uint64_t>(out, e.t);
    detail::put_le<std::uint16_t>(out, e.x);
    detail::put_le<std::uint16_t>(out, e.y);
    detail::put_le<std::int8_t>(out, e.polarity);
    out.insert(out.end(), 3, 0);
  }
  return out;
}

inline EventStream decode_event_stream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kEvtMagic.size() ||
      std::memcmp(bytes.data(), kEvtMagic.data(), kEvtMagic.size()) != 0) {
    fail(ErrorKind::format, "bad magic: not an SPTK event file", 0);
  }
  if (bytes.size() < kEvtHeaderSize) {
    fail(ErrorKind::truncation, "header truncated at byte " + std::to_string(bytes.size()),
         bytes.size());
  }
  const std::uint8_t* p = bytes.data();
  const auto version = detail::get_le<std::uint16_t>(p + 4);
  if (version != kEvtVersion) {
    fail(ErrorKind::format, "unsupported format version " + std::to_string(version), 4);
  }
  EventStream s;
  s.header.width = detail::get_le<std::uint16_t>(p + 6);
  s.header.height = detail::get_le<std::uint16_t>(p + 8);
  s.header.event_count = detail::get_le<std::uint64_t>(p + 12);
  s.header.t_start = detail::get_le<std::uint64_t>(p + 20);
  s.header.t_end = detail::get_le<std::uint64_t>(p + 28);
  if (s.header.t_start > s.header.t_end) fail(ErrorKind::format, "header t_start > t_end", 20);

  const std::size_t payload = bytes.size() - kEvtHeaderSize;
  const std::size_t complete = payload / kEvtRecordSize;
  if (complete < s.header.event_count) {
    const std::uint64_t offset = kEvtHeaderSize + complete * kEvtRecordSize;
    fail(ErrorKind::truncation,
         "payload truncated at byte " + std::to_string(offset) + " (record " +
             std::to_string(complete) + " of " + std::to_string(s.header.event_count) + ")",
         offset);
  }
  if (payload != s.header.event_count * kEvtRecordSize) {
    fail(ErrorKind::consistency, "trailing bytes after declared payload",
         kEvtHeaderSize + s.header.event_count * kEvtRecordSize);
  }

  s.events.resize(s.header.event_count);
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const std::uint8_t* r = p + kEvtHeaderSize + i * kEvtRecordSize;
    Event& e = s.events[i];
    e.t = detail::get_le<std::uint64_t>(r);
    e.x = detail::get_le<std::uint16_t>(r + 8);
    e.y = detail::get_le<std::uint16_t>(r + 10);
    e.polarity = detail::get_le<std::int8_t>(r + 12);
    if (e.x >= s.header.width || e.y >= s.header.height) {
      fail(ErrorKind::validation, "record " + std::to_string(i) + " outside sensor bounds", i);
    }
    if (e.polarity != 1 && e.polarity != -1) {
      fail(ErrorKind::validation, "record " + std::to_string(i) + " has invalid polarity", i);
    }
    if (e.t < s.header.t_start || e.t > s.header.t_end) {
      fail(ErrorKind::validation, "record " + std::to_string(i) + " outside [t_start, t_end]", i);
    }
  }
  sort_by_time(s.events);
  return s;
}

/// Returns the number of bytes written.
inline std::size_t write_event_file(const EventStreamHeader& header, std::span<const Event> events,
                                    const std::string& path) {
  const auto bytes = encode_event_stream(header, events);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorKind::io, "cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) fail(ErrorKind::io, "write failed: " + path);
  return bytes.size();
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) fail(ErrorKind::io, "cannot open " + path);
  const auto size = static_cast<std::size_t>(is.tellg());
  std::vector<std::uint8_t> bytes(size);
  is.seekg(0);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!is) fail(ErrorKind::io, "read failed: " + path);
  return bytes;
}

inline EventStream read_event_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return decode_event_stream(bytes);
}

}  // namespace spiketrack
