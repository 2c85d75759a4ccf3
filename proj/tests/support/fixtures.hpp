#pragma once

#include <initializer_list>
#include <utility>

#include "medground/mask/candidate_pool.hpp"

namespace fixture {

inline medground::InstanceMask grid(int w, int h, std::initializer_list<std::pair<int, int>> xy,
                                    std::uint32_t v = 1) {
  medground::InstanceMask m{w, h, std::vector<std::uint32_t>(static_cast<std::size_t>(w * h), 0)};
  for (auto [x, y] : xy) m.labels[static_cast<std::size_t>(y * w + x)] = v;
  return m;
}

// 5x5: 2x2 block at rows 0-1 / cols 1-2, plus an L at (row,col) (3,3),(3,4),(4,4).
inline medground::InstanceMask two_component_mask() {
  return grid(5, 5, {{1, 0}, {2, 0}, {1, 1}, {2, 1}, {3, 3}, {4, 3}, {4, 4}});
}

// Boxes (200,0,600,400) and (600,600,1000,1000).
inline medground::CandidatePool five_by_five_pool(
    medground::Modality m = medground::Modality::kCT) {
  medground::ImageRef ref{"fixture", "five.png", 5, 5, m};
  return medground::derive_boxes(two_component_mask(), ref, medground::MaskMode::kBinary,
                                 {medground::Connectivity::kFour, 1})
      .value();
}

/// Pool with one hand-set entry per (box, attributes) pair.
inline medground::CandidatePool pool_of(
    std::vector<medground::CandidateEntry> entries,
    medground::Modality m = medground::Modality::kCT, int w = 100, int h = 100) {
  medground::CandidatePool p;
  p.image = {"fixture", "hand.png", w, h, m};
  p.entries = std::move(entries);
  return p;
}

}  // namespace fixture
