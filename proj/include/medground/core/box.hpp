#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>

namespace medground {

/// Half-open pixel box: [x_min, x_max) x [y_min, y_max).
struct PixelBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  [[nodiscard]] int width() const { return x_max - x_min; }
  [[nodiscard]] int height() const { return y_max - y_min; }
  [[nodiscard]] std::int64_t area() const {
    return static_cast<std::int64_t>(width()) * height();
  }
  [[nodiscard]] bool valid_in(int image_width, int image_height) const {
    return x_min >= 0 && y_min >= 0 && x_min < x_max && y_min < y_max &&
           x_max <= image_width && y_max <= image_height;
  }

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

/// Box on the shared 1000 x 1000 grid.
struct NormBox {
  static constexpr int kGrid = 1000;

  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  [[nodiscard]] bool valid() const {
    return x_min >= 0 && y_min >= 0 && x_min < x_max && y_min < y_max &&
           x_max <= kGrid && y_max <= kGrid;
  }
  [[nodiscard]] std::int64_t area() const {
    return static_cast<std::int64_t>(x_max - x_min) * (y_max - y_min);
  }

  friend bool operator==(const NormBox&, const NormBox&) = default;
  friend auto operator<=>(const NormBox&, const NormBox&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const NormBox& b) {
  return os << '[' << b.x_min << ',' << b.y_min << ',' << b.x_max << ',' << b.y_max << ']';
}
inline std::ostream& operator<<(std::ostream& os, const PixelBox& b) {
  return os << '(' << b.x_min << ',' << b.y_min << ',' << b.x_max << ',' << b.y_max << ')';
}

namespace detail {

// round_half_up(num / den) for num >= 0, den > 0, in exact integer arithmetic.
constexpr int round_half_up_div(std::int64_t num, std::int64_t den) {
  return static_cast<int>((2 * num + den) / (2 * den));
}

constexpr int scale_coord(int c, int from, int to) {
  return round_half_up_div(static_cast<std::int64_t>(c) * to, from);
}

// Widen a collapsed interval by one unit; shift the low edge down instead when
// the high edge already sits on the bound.
constexpr void repair_interval(int& lo, int& hi, int bound) {
  hi = std::clamp(hi, 0, bound);
  lo = std::clamp(lo, 0, bound);
  if (lo < hi) return;
  if (lo < bound) {
    hi = lo + 1;
  } else {
    lo = bound - 1;
    hi = bound;
  }
}

}  // namespace detail

/// Maps a pixel box onto the 1000-grid with round-half-up per coordinate.
inline NormBox normalize_box(const PixelBox& box, int width, int height) {
  NormBox out{detail::scale_coord(box.x_min, width, NormBox::kGrid),
              detail::scale_coord(box.y_min, height, NormBox::kGrid),
              detail::scale_coord(box.x_max, width, NormBox::kGrid),
              detail::scale_coord(box.y_max, height, NormBox::kGrid)};
  detail::repair_interval(out.x_min, out.x_max, NormBox::kGrid);
  detail::repair_interval(out.y_min, out.y_max, NormBox::kGrid);
  return out;
}

inline PixelBox denormalize_box(const NormBox& box, int width, int height) {
  PixelBox out{detail::scale_coord(box.x_min, NormBox::kGrid, width),
               detail::scale_coord(box.y_min, NormBox::kGrid, height),
               detail::scale_coord(box.x_max, NormBox::kGrid, width),
               detail::scale_coord(box.y_max, NormBox::kGrid, height)};
  detail::repair_interval(out.x_min, out.x_max, width);
  detail::repair_interval(out.y_min, out.y_max, height);
  return out;
}

}  // namespace medground
