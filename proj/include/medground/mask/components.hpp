#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "medground/core/box.hpp"
#include "medground/core/result.hpp"
#include "medground/mask/mask.hpp"

namespace medground {

enum class Connectivity { kFour = 4, kEight = 8 };

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// A maximal connected set of same-label foreground pixels.
struct Component {
  std::uint32_t label = 0;
  std::vector<Pixel> pixels;  // row-major order
  PixelBox bounds;            // tight, half-open

  [[nodiscard]] std::size_t size() const { return pixels.size(); }
};

/// Labels connected foreground regions with an explicit-stack flood fill.
/// Regions never merge across distinct labels. Output is ordered by the
/// bounding box's (min y, min x), ties by first pixel in scan order.
inline Result<std::vector<Component>> connected_components(const InstanceMask& mask,
                                                           Connectivity connectivity) {
  if (mask.foreground_count() == 0) return make_error("empty_mask", "empty mask");
  const int w = mask.width;
  const int h = mask.height;
  std::vector<std::uint8_t> seen(mask.labels.size(), 0);
  std::vector<Component> out;
  std::vector<Pixel> stack;

  static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int neighbours = connectivity == Connectivity::kFour ? 4 : 8;

  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t idx0 = static_cast<std::size_t>(y0) * w + x0;
      const std::uint32_t label = mask.labels[idx0];
      if (label == 0 || seen[idx0]) continue;

      Component comp;
      comp.label = label;
      comp.bounds = {x0, y0, x0 + 1, y0 + 1};
      seen[idx0] = 1;
      stack.push_back({x0, y0});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        comp.pixels.push_back(p);
        comp.bounds.x_min = std::min(comp.bounds.x_min, p.x);
        comp.bounds.y_min = std::min(comp.bounds.y_min, p.y);
        comp.bounds.x_max = std::max(comp.bounds.x_max, p.x + 1);
        comp.bounds.y_max = std::max(comp.bounds.y_max, p.y + 1);
        for (int k = 0; k < neighbours; ++k) {
          const int nx = p.x + kDx[k];
          const int ny = p.y + kDy[k];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
          if (seen[ni] || mask.labels[ni] != label) continue;
          seen[ni] = 1;
          stack.push_back({nx, ny});
        }
      }
      std::sort(comp.pixels.begin(), comp.pixels.end(),
                [](const Pixel& a, const Pixel& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
      out.push_back(std::move(comp));
    }
  }
  // Discovery order already sorts by min y; stable_sort keeps scan order on ties.
  std::stable_sort(out.begin(), out.end(), [](const Component& a, const Component& b) {
    if (a.bounds.y_min != b.bounds.y_min) return a.bounds.y_min < b.bounds.y_min;
    return a.bounds.x_min < b.bounds.x_min;
  });
  return out;
}

}  // namespace medground
