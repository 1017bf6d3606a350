// SPDX-License-Identifier: Apache-2.0
#include "spiketrack/event_file.hpp"

#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace st = spiketrack;
using st::testing::random_events;

namespace {

// Independent little-endian writer used as the byte-layout oracle.
void put(std::vector<std::uint8_t>& b, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) b.push_back(std::uint8_t(v >> (8 * i)));
}

std::vector<std::uint8_t> oracle_encode(std::uint16_t w, std::uint16_t h, std::uint64_t t0,
                                        std::uint64_t t1, const std::vector<st::Event>& ev) {
  std::vector<std::uint8_t> b{'S', 'P', 'T', 'K'};
  put(b, 1, 2);
  put(b, w, 2);
  put(b, h, 2);
  put(b, 0, 2);
  put(b, ev.size(), 8);
  put(b, t0, 8);
  put(b, t1, 8);
  for (const auto& e : ev) {
    put(b, e.t, 8);
    put(b, e.x, 2);
    put(b, e.y, 2);
    put(b, std::uint8_t(e.polarity), 1);
    put(b, 0, 3);
  }
  return b;
}

st::EventStreamHeader header(std::uint16_t w, std::uint16_t h, const std::vector<st::Event>& ev,
                             std::uint64_t t0 = 0, std::uint64_t t1 = 1000000) {
  return st::EventStreamHeader{w, h, t0, t1, ev.size()};
}

}  // namespace

TEST(EventFile, EmptyStreamIsHeaderOnly) {
  st::testing::TempDir dir;
  const std::vector<st::Event> none;
  EXPECT_EQ(st::write_event_file(header(320, 320, none), none, dir.file("e.evt")), 36u);
  const auto s = st::read_event_file(dir.file("e.evt"));
  EXPECT_TRUE(s.events.empty());
  EXPECT_EQ(s.header.event_count, 0u);
  EXPECT_EQ(s.header.width, 320);
}

TEST(EventFile, OneEventAddsOneRecord) {
  st::testing::TempDir dir;
  const std::vector<st::Event> one{{42, 3, 4, -1}};
  EXPECT_EQ(st::write_event_file(header(320, 320, one), one, dir.file("o.evt")), 36u + 16u);
  EXPECT_EQ(st::read_event_file(dir.file("o.evt")).events, one);
}

TEST(EventFile, LayoutMatchesIndependentEncoder) {
  std::mt19937_64 rng(5);
  const auto ev = random_events(rng, 50, 320, 240, 999);
  const auto bytes = st::encode_event_stream(header(320, 240, ev, 0, 999), ev);
  EXPECT_EQ(bytes, oracle_encode(320, 240, 0, 999, ev));
}

TEST(EventFileProperty, RoundTripOnRandomStreams) {
  std::mt19937_64 rng(2024);
  st::testing::TempDir dir;
  for (int i = 0; i < 100; ++i) {
    const std::uint16_t w = std::uint16_t(1 + rng() % 640), h = std::uint16_t(1 + rng() % 480);
    const std::uint64_t span = 1 + rng() % 5000000;
    const auto ev = random_events(rng, rng() % 2000, w, h, span);
    const auto hdr = header(w, h, ev, 0, span);
    const std::string path = dir.file("r" + std::to_string(i) + ".evt");
    st::write_event_file(hdr, ev, path);
    const auto back = st::read_event_file(path);
    EXPECT_EQ(back.header, hdr);
    EXPECT_EQ(back.events, ev);
    EXPECT_EQ(st::encode_event_stream(back.header, back.events), st::read_file_bytes(path));
  }
}

TEST(EventFile, RejectsBadMagicAndVersion) {
  const std::vector<st::Event> none;
  auto bytes = oracle_encode(8, 8, 0, 0, none);
  bytes[0] = 'X';
  EXPECT_ERROR_KIND(st::decode_event_stream(bytes), format);
  bytes = oracle_encode(8, 8, 0, 0, none);
  bytes[4] = 2;
  EXPECT_ERROR_KIND(st::decode_event_stream(bytes), format);
}

TEST(EventFile, TruncationReportsByteOffset) {
  const std::vector<st::Event> ev{{1, 0, 0, 1}, {2, 1, 1, 1}, {3, 2, 2, -1}};
  const auto full = oracle_encode(8, 8, 0, 10, ev);
  for (std::size_t cut : {std::size_t(20), std::size_t(36 + 16 + 5), full.size() - 1}) {
    const std::vector<std::uint8_t> part(full.begin(), full.begin() + std::ptrdiff_t(cut));
    try {
      st::decode_event_stream(part);
      ADD_FAILURE() << "no error for cut " << cut;
    } catch (const st::Error& e) {
      EXPECT_EQ(e.kind(), st::ErrorKind::truncation);
      ASSERT_TRUE(e.position());
      const std::uint64_t expect = cut < 36 ? cut : 36 + 16 * ((cut - 36) / 16);
      EXPECT_EQ(*e.position(), expect);
    }
  }
}

TEST(EventFile, OutOfBoundsPixelNamesRecord) {
  const std::vector<st::Event> ev{{0, 320, 0, 1}};
  try {
    st::decode_event_stream(oracle_encode(320, 320, 0, 10, ev));
    ADD_FAILURE();
  } catch (const st::Error& e) {
    EXPECT_EQ(e.kind(), st::ErrorKind::validation);
    EXPECT_EQ(e.position(), std::optional<std::uint64_t>(0));
  }
  const std::vector<st::Event> later{{0, 1, 1, 1}, {1, 1, 1, 1}, {2, 1, 999, 1}};
  try {
    st::decode_event_stream(oracle_encode(320, 320, 0, 10, later));
    ADD_FAILURE();
  } catch (const st::Error& e) {
    EXPECT_EQ(e.position(), std::optional<std::uint64_t>(2));
  }
}

TEST(EventFile, RejectsZeroPolarityAndTrailingBytes) {
  auto bytes = oracle_encode(8, 8, 0, 10, {{1, 0, 0, 1}});
  bytes[36 + 12] = 0;
  EXPECT_ERROR_KIND(st::decode_event_stream(bytes), validation);
  bytes = oracle_encode(8, 8, 0, 10, {{1, 0, 0, 1}});
  bytes.push_back(0);
  EXPECT_ERROR_KIND(st::decode_event_stream(bytes), consistency);
}

TEST(EventFile, DecodedRecordsAreStableSortedByTime) {
  const std::vector<st::Event> ev{{5, 1, 0, 1}, {2, 2, 0, 1}, {5, 3, 0, -1}, {2, 4, 0, -1}};
  const auto s = st::decode_event_stream(oracle_encode(8, 8, 0, 10, ev));
  const std::vector<st::Event> expect{{2, 2, 0, 1}, {2, 4, 0, -1}, {5, 1, 0, 1}, {5, 3, 0, -1}};
  EXPECT_EQ(s.events, expect);
}

TEST(EventFile, WriterRejectsUnsortedAndInconsistentInput) {
  st::testing::TempDir dir;
  const std::vector<st::Event> unsorted{{5, 0, 0, 1}, {4, 0, 0, 1}};
  EXPECT_ERROR_KIND(st::write_event_file(header(8, 8, unsorted), unsorted, dir.file("u.evt")),
                    ordering);
  const std::vector<st::Event> two{{1, 0, 0, 1}, {2, 0, 0, 1}};
  auto bad = header(8, 8, two);
  bad.event_count = 3;
  EXPECT_ERROR_KIND(st::write_event_file(bad, two, dir.file("c.evt")), consistency);
  EXPECT_FALSE(std::filesystem::exists(dir.file("u.evt")));
}

TEST(EventFile, MissingFileIsAnIoError) {
  EXPECT_ERROR_KIND(st::read_event_file("/nonexistent/dir/stream.evt"), io);
}
