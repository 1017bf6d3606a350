// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "spiketrack/components.hpp"
#include "spiketrack/error.hpp"
#include "spiketrack/image.hpp"

namespace spiketrack {

enum class DenoiserBackend { classical, external_model };

struct DenoiserConfig {
  std::size_t min_component_area = 12;
  std::size_t closing_radius = 1;
  DenoiserBackend backend = DenoiserBackend::classical;
};

inline void validate(const DenoiserConfig& cfg) {
  if (cfg.min_component_area < 1) fail(ErrorKind::parameter, "min_component_area must be >= 1");
}

namespace detail {

// Separable square (Chebyshev) max/min filter. Outside pixels read as `pad`.
inline void square_filter(const std::vector<std::uint8_t>& in, std::vector<std::uint8_t>& out,
                          std::vector<std::uint8_t>& tmp, std::size_t w, std::size_t h,
                          std::size_t r, bool dilate) {
  const std::uint8_t pad = dilate ? 0 : 1;
  tmp.resize(w * h);
  out.resize(w * h);
  auto combine = [dilate](std::uint8_t a, std::uint8_t b) -> std::uint8_t {
    return dilate ? (a | b) : (a & b);
  };
  for (std::size_t y = 0; y < h; ++y) {
    const std::uint8_t* row = &in[y * w];
    for (std::size_t x = 0; x < w; ++x) {
      std::uint8_t v = row[x];
      for (std::size_t k = 1; k <= r; ++k) {
        v = combine(v, x >= k ? row[x - k] : pad);
        v = combine(v, x + k < w ? row[x + k] : pad);
      }
      tmp[y * w + x] = v;
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::uint8_t v = tmp[y * w + x];
      for (std::size_t k = 1; k <= r; ++k) {
        v = combine(v, y >= k ? tmp[(y - k) * w + x] : pad);
        v = combine(v, y + k < h ? tmp[(y + k) * w + x] : pad);
      }
      out[y * w + x] = v;
    }
  }
}

}  // namespace detail

/// Morphological closing with a (2r+1)x(2r+1) square. Erosion treats the
/// outside as white so closing never eats into the border.
inline BinaryImage morphological_close(const BinaryImage& img, std::size_t radius) {
  if (radius == 0) return img;
  std::vector<std::uint8_t> dilated, closed, tmp;
  detail::square_filter(img.pixels(), dilated, tmp, img.width(), img.height(), radius, true);
  detail::square_filter(dilated, closed, tmp, img.width(), img.height(), radius, false);
  return BinaryImage(img.width(), img.height(), std::move(closed));
}

inline BinaryImage remove_small_components(const BinaryImage& img, std::size_t min_area) {
  const Labeling lab = label_components(img);
  std::vector<std::uint8_t> keep(lab.components.size() + 1, 0);
  for (std::size_t i = 0; i < lab.components.size(); ++i) {
    keep[i + 1] = lab.components[i].area >= min_area;
  }
  std::vector<std::uint8_t> px(img.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = keep[lab.labels[i]];
  return BinaryImage(img.width(), img.height(), std::move(px));
}

inline BinaryImage denoise_classical(const BinaryImage& img, const DenoiserConfig& cfg) {
  validate(cfg);
  return remove_small_components(morphological_close(img, cfg.closing_radius),
                                 cfg.min_component_area);
}

using ExternalDenoiser = std::function<BinaryImage(const BinaryImage&)>;

struct DenoiserHandle {
  std::uint64_t id = 0;
  friend bool operator==(const DenoiserHandle&, const DenoiserHandle&) = default;
};

/// Holds externally supplied denoising backends (e.g. a learned model). The
/// most recently registered backend is used unless a handle is given.
class DenoiserRegistry {
 public:
  DenoiserHandle register_denoiser(ExternalDenoiser backend) {
    if (!backend) fail(ErrorKind::configuration, "cannot register an empty denoiser");
    std::lock_guard lock(mutex_);
    const DenoiserHandle h{++next_id_};
    backends_.emplace(h.id, std::move(backend));
    active_ = h;
    return h;
  }

  void unregister(DenoiserHandle h) {
    std::lock_guard lock(mutex_);
    backends_.erase(h.id);
    if (active_ && *active_ == h) {
      active_.reset();
      if (!backends_.empty()) active_ = DenoiserHandle{backends_.rbegin()->first};
    }
  }

  std::optional<ExternalDenoiser> lookup(std::optional<DenoiserHandle> h = std::nullopt) const {
    std::lock_guard lock(mutex_);
    const auto which = h ? h : active_;
    if (!which) return std::nullopt;
    auto it = backends_.find(which->id);
    if (it == backends_.end()) return std::nullopt;
    return it->second;
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::uint64_t, ExternalDenoiser> backends_;
  std::optional<DenoiserHandle> active_;
  std::uint64_t next_id_ = 0;
};

inline DenoiserRegistry& default_denoiser_registry() {
  static DenoiserRegistry registry;
  return registry;
}

inline DenoiserHandle register_denoiser(ExternalDenoiser backend) {
  return default_denoiser_registry().register_denoiser(std::move(backend));
}

inline BinaryImage denoise(const BinaryImage& img, const DenoiserConfig& cfg,
                           const DenoiserRegistry& registry = default_denoiser_registry()) {
  if (cfg.backend == DenoiserBackend::classical) return denoise_classical(img, cfg);
  const auto backend = registry.lookup();
  if (!backend) fail(ErrorKind::configuration, "external-model backend selected but none registered");
  BinaryImage out = (*backend)(img);
  if (!out.same_shape(img)) fail(ErrorKind::contract, "external denoiser changed the image shape");
  // Enforce a strictly binary result.
  return BinaryImage(out.width(), out.height(), std::move(out.pixels()));
}

}  // namespace spiketrack
