#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bridgeprompt/tensor.hpp"

namespace bp {

// Gesture label as written in transcripts ("G<k>", k >= 1), plus the two
// placeholders that cover unlabelled frames before the first and after the
// last annotated gesture.
class GestureId {
 public:
  constexpr GestureId() = default;
  constexpr explicit GestureId(int index) : value_(index) {}

  static constexpr GestureId pre() { return GestureId(kPre); }
  static constexpr GestureId post() { return GestureId(kPost); }

  constexpr int index() const { return value_; }
  constexpr bool is_placeholder() const { return value_ == kPre || value_ == kPost; }
  constexpr bool valid() const { return value_ >= 1 || is_placeholder(); }

  // "G3", "PRE" or "POST".
  std::string token() const;
  static GestureId parse(std::string_view token);

  constexpr auto operator<=>(const GestureId&) const = default;

 private:
  static constexpr int kPre = -1;
  static constexpr int kPost = -2;
  int value_ = 0;
};

inline constexpr std::string_view kPreDescription = "Waiting and preparing for the surgery";
inline constexpr std::string_view kPostDescription = "Finishing the surgery";

using LabelStream = std::vector<GestureId>;

class GestureVocabulary {
 public:
  GestureVocabulary() = default;

  // The fifteen JIGSAWS gestures.
  static GestureVocabulary jigsaws();
  // JIGSAWS descriptions for G1..Gn; synthetic descriptions beyond G15.
  static GestureVocabulary first(int n);
  // "G<k><TAB>description" per line. Placeholder lines (PRE/POST) are
  // accepted only with their fixed descriptions.
  static GestureVocabulary parse(std::string_view text);

  void add(GestureId id, std::string description);
  bool contains(GestureId id) const;
  // Placeholders always resolve to their fixed descriptions.
  const std::string& describe(GestureId id) const;
  // Gesture ids in ascending index order, placeholders excluded.
  std::vector<GestureId> gestures() const;
  std::size_t size() const { return entries_.size(); }

  std::string serialize() const;

 private:
  std::map<int, std::string> entries_;
};

struct TranscriptRecord {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  GestureId gesture;
  bool operator==(const TranscriptRecord&) const = default;
};

struct Transcript {
  std::string video_id;
  std::string user_id;
  std::size_t frame_count = 0;
  std::vector<TranscriptRecord> records;
};

// Parses "start end G<k>" lines. Records are sorted by start; overlaps,
// inverted ranges, out-of-range frames, unknown gestures and interior gaps
// raise ParseError naming the offending line.
Transcript parse_transcript(std::string_view text, std::size_t frame_count,
                            const GestureVocabulary& vocab);
std::string format_transcript(const Transcript& t);

// Head gap -> PRE, tail gap -> POST, every other frame takes its record's label.
LabelStream to_label_stream(const Transcript& t);
// Run-length encodes a stream back into records; placeholder runs at the
// ends become gaps again.
Transcript from_label_stream(const LabelStream& labels, std::string video_id, std::string user_id);

struct Fold {
  std::string name;
  std::vector<std::size_t> train;  // indices into the input sequence
  std::vector<std::size_t> test;
};

// One fold per distinct user, ordered by user id.
std::vector<Fold> louo_splits(std::span<const Transcript> transcripts);
// Single fold whose test set is the listed videos.
Fold fixed_split(std::span<const Transcript> transcripts, const std::vector<std::string>& test_ids);
// Single fold with `n_test` videos chosen by a seeded shuffle.
Fold seeded_holdout(std::span<const Transcript> transcripts, std::size_t n_test, std::uint64_t seed);

// A video of per-frame feature maps with its label stream.
struct Video {
  std::string id;
  std::string user;
  std::string task;
  std::size_t height = 0;
  std::size_t width = 0;
  Tensor frames;  // [T x height*width]
  LabelStream labels;

  std::size_t frame_count() const { return labels.size(); }
};

// One sub-video: kClipLength frames sampled at a fixed stride.
struct FrameClip {
  static constexpr std::size_t kClipLength = 16;

  std::string video_id;
  std::size_t start = 0;
  std::size_t stride = 0;
  Tensor frames;  // [16 x height*width]
  std::vector<GestureId> labels;
};

// Keeps clips whose every label is in `allowed` or is a placeholder.
std::vector<FrameClip> zero_shot_filter(std::span<const FrameClip> clips, const std::set<GestureId>& allowed);

struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t n_videos = 20;
  int n_gestures = 8;
  std::size_t frames_per_video = 256;
  std::size_t n_users = 5;
  std::size_t height = 16;
  std::size_t width = 16;
  // Per-pixel frame noise, relative to the RMS amplitude of a base pattern.
  double noise = 0.1;
  // RMS amplitude of the per-video background, which lies outside the span
  // of the gesture patterns.
  double background = 2.0;
  // Number of shared visual primitives the gesture patterns are mixed from.
  std::size_t primitives = 5;
  std::size_t min_segment = 20;
  std::size_t max_segment = 60;
  // Unlabelled head/tail lengths; 0 disables placeholder gaps.
  std::size_t max_gap = 16;
  std::string task = "synthetic";
};

struct SyntheticCorpus {
  std::vector<Video> videos;
  // Base pattern per label: row order PRE, G1..Gn, POST.
  Tensor patterns;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);
// Row of `patterns` for a label under the PRE, G1..Gn, POST ordering.
std::size_t pattern_row(GestureId id, int n_gestures);

// ---- on-disk formats -------------------------------------------------------

// Flat 64-bit little-endian reals preceded by a text header line.
void write_frames(const std::string& path, const Video& video);
Tensor read_frames(const std::string& path, std::size_t& height, std::size_t& width);
void write_features(const std::string& path, const Tensor& features);
Tensor read_features(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

// Corpus directory: manifest.tsv, vocabulary.txt, videos/<id>/{frames.bin,labels.txt}.
void write_corpus(const std::string& dir, std::span<const Video> videos, const GestureVocabulary& vocab);
std::vector<Video> read_corpus(const std::string& dir, GestureVocabulary& vocab);
std::vector<Transcript> corpus_transcripts(std::span<const Video> videos);

}  // namespace bp
