// SPDX-License-Identifier: Apache-2.0
//
// Staged output files and the run manifest. Outputs are written under a
// temporary name and renamed into place only when the command succeeds.
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiketrack/error.hpp"

namespace spiketrack::cli {

namespace fs = std::filesystem;

class ArtifactSet {
 public:
  explicit ArtifactSet(fs::path out_dir) : out_dir_(std::move(out_dir)) {}
  ArtifactSet(const ArtifactSet&) = delete;
  ArtifactSet& operator=(const ArtifactSet&) = delete;
  ~ArtifactSet() { discard(); }

  /// Final location of an output given on the command line.
  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : out_dir_ / p; }

  /// Opens a staged stream for `path`; the file appears at `path` on commit().
  std::ofstream& open(const fs::path& path, bool binary = false) {
    const fs::path target = resolve(path);
    if (target.has_parent_path()) {
      std::error_code ec;
      fs::create_directories(target.parent_path(), ec);
      if (ec) fail(ErrorKind::io, "cannot create directory " + target.parent_path().string());
    }
    fs::path tmp = target;
    tmp += ".partial";
    auto& e = entries_.emplace_back();
    e.target = target;
    e.tmp = tmp;
    e.stream = std::make_unique<std::ofstream>(
        tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!*e.stream) fail(ErrorKind::io, "cannot open " + tmp.string() + " for writing");
    return *e.stream;
  }

  void write_text(const fs::path& path, const std::string& text) { open(path) << text; }

  void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
    open(path, true).write(reinterpret_cast<const char*>(bytes.data()),
                           static_cast<std::streamsize>(bytes.size()));
  }

  void commit() {
    for (auto& e : entries_) {
      e.stream->close();
      if (!*e.stream) fail(ErrorKind::io, "write failed for " + e.target.string());
    }
    for (auto& e : entries_) {
      std::error_code ec;
      fs::rename(e.tmp, e.target, ec);
      if (ec) fail(ErrorKind::io, "cannot move " + e.tmp.string() + " into place");
      committed_.push_back(e.target.string());
    }
    entries_.clear();
  }

  void discard() noexcept {
    for (auto& e : entries_) {
      e.stream->close();
      std::error_code ec;
      fs::remove(e.tmp, ec);
    }
    entries_.clear();
  }

  std::vector<std::string> pending() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.target.string());
    return out;
  }
  const std::vector<std::string>& committed() const noexcept { return committed_; }
  const fs::path& out_dir() const noexcept { return out_dir_; }

 private:
  struct Entry {
    fs::path target;
    fs::path tmp;
    std::unique_ptr<std::ofstream> stream;
  };
  fs::path out_dir_;
  std::vector<Entry> entries_;
  std::vector<std::string> committed_;
};

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, double>> stages;  // name, wall seconds
  std::string status = "ok";
  std::string error;

  nlohmann::ordered_json to_json(const std::string& version) const {
    nlohmann::ordered_json j;
    j["tool"] = "spiketrack";
    j["version"] = version;
    j["command"] = command;
    j["status"] = status;
    if (!error.empty()) j["error"] = error;
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    auto& st = j["stages"] = nlohmann::ordered_json::array();
    for (const auto& [name, sec] : stages) st.push_back({{"name", name}, {"wall_s", sec}});
    return j;
  }
};

/// Records the wall time of a scope into the manifest.
class StageTimer {
 public:
  StageTimer(RunManifest& m, std::string name)
      : m_(m), name_(std::move(name)), t0_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    m_.stages.emplace_back(name_, dt);
  }

 private:
  RunManifest& m_;
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace spiketrack::cli
