#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <vector>

#include "bridgeprompt/dataset.hpp"

namespace bp {

// Maximal run of one gesture inside a clip. Ordinals start at 1.
struct LabelRun {
  GestureId gesture;
  std::size_t ordinal = 0;
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive

  std::size_t length() const { return last - first + 1; }
  bool operator==(const LabelRun&) const = default;
};

// Windows {t, t+s, ..., t+15s} for every stride s and t = 0, hop, 2*hop, ...
// while t+15s stays inside the video. Ordered by stride, then start.
std::vector<FrameClip> extract_clips(const Video& video, const std::set<std::size_t>& strides, std::size_t hop);

// Clips of many videos, ordered by video id, stride, start.
std::vector<FrameClip> extract_all_clips(std::span<const Video> videos, const std::set<std::size_t>& strides,
                                         std::size_t hop);

std::vector<LabelRun> label_runs(std::span<const GestureId> labels);

}  // namespace bp
