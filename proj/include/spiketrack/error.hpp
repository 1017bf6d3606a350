// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace spiketrack {

enum class ErrorKind {
  parameter,
  format,
  truncation,
  validation,
  ordering,
  consistency,
  bounds,
  configuration,
  contract,
  calibration,
  association,
  input,
  precondition,
  search_failure,
  degenerate,
  range,
  io,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::format: return "format";
    case ErrorKind::truncation: return "truncation";
    case ErrorKind::validation: return "validation";
    case ErrorKind::ordering: return "ordering";
    case ErrorKind::consistency: return "consistency";
    case ErrorKind::bounds: return "bounds";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::contract: return "contract";
    case ErrorKind::calibration: return "calibration";
    case ErrorKind::association: return "association";
    case ErrorKind::input: return "input";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::search_failure: return "search_failure";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::range: return "range";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Library-wide exception. `position()` carries the byte offset, record
/// index, epoch or leg number the failure refers to, when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what,
        std::optional<std::uint64_t> position = std::nullopt)
      : std::runtime_error(what), kind_(kind), position_(position) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::uint64_t> position() const noexcept { return position_; }

 private:
  ErrorKind kind_;
  std::optional<std::uint64_t> position_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what,
                              std::optional<std::uint64_t> position = std::nullopt) {
  throw Error(kind, what, position);
}

}  // namespace spiketrack
