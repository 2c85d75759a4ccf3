#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "medground/core/result.hpp"
#include "medground/mask/png_io.hpp"

namespace medground {

enum class MaskMode { kBinary, kLabeled };

inline std::string_view to_string(MaskMode m) {
  return m == MaskMode::kBinary ? "binary" : "labeled";
}

inline std::optional<MaskMode> parse_mask_mode(std::string_view s) {
  if (s == "binary") return MaskMode::kBinary;
  if (s == "labeled") return MaskMode::kLabeled;
  return std::nullopt;
}

/// Row-major label grid: 0 is background, k >= 1 is instance k.
struct InstanceMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> labels;

  [[nodiscard]] std::uint32_t at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  [[nodiscard]] std::size_t foreground_count() const {
    std::size_t n = 0;
    for (auto v : labels) n += v != 0 ? 1 : 0;
    return n;
  }
};

/// Decodes a single-channel PNG. Binary mode folds every nonzero sample to 1;
/// labeled mode keeps sample values as instance labels.
inline Result<InstanceMask> decode_mask(std::span<const std::uint8_t> bytes, MaskMode mode) {
  auto gray = decode_gray_png(bytes);
  if (!gray) return gray.error();
  const GrayImage& g = gray.value();
  InstanceMask mask{g.width, g.height, {}};
  mask.labels.reserve(g.samples.size());
  for (std::uint16_t s : g.samples) {
    mask.labels.push_back(mode == MaskMode::kBinary ? (s != 0 ? 1U : 0U) : s);
  }
  return mask;
}

}  // namespace medground
