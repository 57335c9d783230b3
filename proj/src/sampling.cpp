#include "bridgeprompt/sampling.hpp"

#include <algorithm>

#include "bridgeprompt/error.hpp"

namespace bp {

std::vector<FrameClip> extract_clips(const Video& video, const std::set<std::size_t>& strides, std::size_t hop) {
  if (strides.empty()) throw ParameterError("extract_clips: no sampling strides given");
  if (hop < 1) throw ParameterError("extract_clips: hop must be at least 1");
  if (*strides.begin() < 1) throw ParameterError("extract_clips: strides must be at least 1");
  const std::size_t T = video.frame_count();
  if (video.frames.rank() != 2 || video.frames.dim(0) != T) {
    throw DimensionError("video " + video.id + ": frame tensor does not match label count");
  }
  const std::size_t pixels = video.frames.dim(1);
  constexpr std::size_t L = FrameClip::kClipLength;
  std::vector<FrameClip> clips;
  for (const auto s : strides) {
    const std::size_t span = (L - 1) * s;
    for (std::size_t t = 0; t + span < T; t += hop) {
      FrameClip c;
      c.video_id = video.id;
      c.start = t;
      c.stride = s;
      c.frames = Tensor::zeros({L, pixels});
      c.labels.reserve(L);
      for (std::size_t i = 0; i < L; ++i) {
        const std::size_t f = t + i * s;
        std::copy_n(&video.frames.values[f * pixels], pixels, &c.frames.values[i * pixels]);
        c.labels.push_back(video.labels[f]);
      }
      clips.push_back(std::move(c));
    }
  }
  return clips;
}

std::vector<FrameClip> extract_all_clips(std::span<const Video> videos, const std::set<std::size_t>& strides,
                                         std::size_t hop) {
  std::vector<const Video*> order;
  for (const auto& v : videos) order.push_back(&v);
  std::stable_sort(order.begin(), order.end(), [](const Video* a, const Video* b) { return a->id < b->id; });
  std::vector<FrameClip> out;
  for (const auto* v : order) {
    auto clips = extract_clips(*v, strides, hop);
    std::move(clips.begin(), clips.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<LabelRun> label_runs(std::span<const GestureId> labels) {
  std::vector<LabelRun> runs;
  for (std::size_t i = 0; i < labels.size();) {
    std::size_t j = i;
    while (j + 1 < labels.size() && labels[j + 1] == labels[i]) ++j;
    runs.push_back({labels[i], runs.size() + 1, i, j});
    i = j + 1;
  }
  return runs;
}

}  // namespace bp
