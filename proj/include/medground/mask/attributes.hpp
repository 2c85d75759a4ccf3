#pragma once

#include <algorithm>
#include <optional>
#include <string_view>

#include "medground/mask/components.hpp"

namespace medground {

enum class SizeBucket { kTiny, kSmall, kMedium, kLarge };
enum class HorizBin { kLeft, kCenter, kRight };
enum class VertBin { kUpper, kMiddle, kLower };

inline std::string_view to_string(SizeBucket b) {
  switch (b) {
    case SizeBucket::kTiny: return "tiny";
    case SizeBucket::kSmall: return "small";
    case SizeBucket::kMedium: return "medium";
    case SizeBucket::kLarge: return "large";
  }
  return "?";
}
inline std::string_view to_string(HorizBin b) {
  switch (b) {
    case HorizBin::kLeft: return "left";
    case HorizBin::kCenter: return "center";
    case HorizBin::kRight: return "right";
  }
  return "?";
}
inline std::string_view to_string(VertBin b) {
  switch (b) {
    case VertBin::kUpper: return "upper";
    case VertBin::kMiddle: return "middle";
    case VertBin::kLower: return "lower";
  }
  return "?";
}

inline std::optional<SizeBucket> parse_size_bucket(std::string_view s) {
  for (auto b : {SizeBucket::kTiny, SizeBucket::kSmall, SizeBucket::kMedium, SizeBucket::kLarge})
    if (to_string(b) == s) return b;
  return std::nullopt;
}
inline std::optional<HorizBin> parse_horiz_bin(std::string_view s) {
  for (auto b : {HorizBin::kLeft, HorizBin::kCenter, HorizBin::kRight})
    if (to_string(b) == s) return b;
  return std::nullopt;
}
inline std::optional<VertBin> parse_vert_bin(std::string_view s) {
  for (auto b : {VertBin::kUpper, VertBin::kMiddle, VertBin::kLower})
    if (to_string(b) == s) return b;
  return std::nullopt;
}

// Area buckets as fractions of image area.
inline constexpr double kTinyBelow = 0.005;
inline constexpr double kSmallBelow = 0.02;
inline constexpr double kMediumBelow = 0.10;

// Centroid bins: [0, 0.4) low, [0.4, 0.6] center dead-band, (0.6, 1] high.
inline constexpr double kBinLow = 0.4;
inline constexpr double kBinHigh = 0.6;

inline SizeBucket size_bucket_for(double area_ratio) {
  if (area_ratio < kTinyBelow) return SizeBucket::kTiny;
  if (area_ratio < kSmallBelow) return SizeBucket::kSmall;
  if (area_ratio < kMediumBelow) return SizeBucket::kMedium;
  return SizeBucket::kLarge;
}

inline HorizBin horiz_bin_for(double cx) {
  if (cx < kBinLow) return HorizBin::kLeft;
  if (cx > kBinHigh) return HorizBin::kRight;
  return HorizBin::kCenter;
}

inline VertBin vert_bin_for(double cy) {
  if (cy < kBinLow) return VertBin::kUpper;
  if (cy > kBinHigh) return VertBin::kLower;
  return VertBin::kMiddle;
}

struct RegionAttributes {
  double area_ratio = 0.0;
  int width_px = 1;
  int height_px = 1;
  double aspect_ratio = 1.0;  // width / height
  double elongation = 1.0;    // long side / short side of the box
  double compactness = 1.0;   // mask pixels / box pixels
  double centroid_x = 0.5;
  double centroid_y = 0.5;
  HorizBin horiz_bin = HorizBin::kCenter;
  VertBin vert_bin = VertBin::kMiddle;
  SizeBucket size_bucket = SizeBucket::kTiny;

  friend bool operator==(const RegionAttributes&, const RegionAttributes&) = default;
};

/// Geometry and spatial descriptors of one component. The centroid is taken
/// over pixel centres, so a full-image region sits exactly at (0.5, 0.5).
inline RegionAttributes compute_attributes(const Component& comp, int image_width,
                                           int image_height) {
  RegionAttributes a;
  const double n = static_cast<double>(comp.size());
  a.area_ratio = n / (static_cast<double>(image_width) * image_height);
  a.width_px = comp.bounds.width();
  a.height_px = comp.bounds.height();
  a.aspect_ratio = static_cast<double>(a.width_px) / a.height_px;
  a.elongation = static_cast<double>(std::max(a.width_px, a.height_px)) /
                 std::min(a.width_px, a.height_px);
  a.compactness = n / static_cast<double>(comp.bounds.area());
  double sx = 0.0;
  double sy = 0.0;
  for (const Pixel& p : comp.pixels) {
    sx += p.x + 0.5;
    sy += p.y + 0.5;
  }
  a.centroid_x = sx / n / image_width;
  a.centroid_y = sy / n / image_height;
  a.horiz_bin = horiz_bin_for(a.centroid_x);
  a.vert_bin = vert_bin_for(a.centroid_y);
  a.size_bucket = size_bucket_for(a.area_ratio);
  return a;
}

}  // namespace medground
