#include "bridgeprompt/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bridgeprompt/error.hpp"
#include "bridgeprompt/random.hpp"

namespace bp {

static_assert(std::endian::native == std::endian::little,
              "binary frame and feature files are written in host order");

namespace fs = std::filesystem;

namespace {

constexpr const char* kJigsaws[] = {
    "Reaching for needle with right hand",
    "Positioning needle",
    "Pushing needle through tissue",
    "Transferring needle from left to right",
    "Moving to center with needle in grip",
    "Pulling suture with left hand",
    "Pulling suture with right hand",
    "Orienting needle",
    "Using right hand to help tighten suture",
    "Loosening more suture",
    "Dropping suture at end and moving to end points",
    "Reaching for needle with left hand",
    "Making C loop around right hand",
    "Reaching for needle with right hand",
    "Pulling suture with both hands",
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const auto b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

bool parse_size(std::string_view s, std::size_t& out) {
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

}  // namespace

// ---- GestureId ---------------------------------------------------------------

std::string GestureId::token() const {
  if (value_ == kPre) return "PRE";
  if (value_ == kPost) return "POST";
  return "G" + std::to_string(value_);
}

GestureId GestureId::parse(std::string_view token) {
  if (token == "PRE") return pre();
  if (token == "POST") return post();
  if (token.size() >= 2 && token[0] == 'G') {
    int k = 0;
    const auto* end = token.data() + token.size();
    auto [p, ec] = std::from_chars(token.data() + 1, end, k);
    if (ec == std::errc() && p == end && k >= 1) return GestureId(k);
  }
  throw ParseError("invalid gesture token '" + std::string(token) + "'");
}

// ---- GestureVocabulary -------------------------------------------------------

GestureVocabulary GestureVocabulary::jigsaws() { return first(15); }

GestureVocabulary GestureVocabulary::first(int n) {
  if (n < 1) throw ParameterError("vocabulary needs at least one gesture");
  GestureVocabulary v;
  for (int k = 1; k <= n; ++k) {
    v.add(GestureId(k), k <= 15 ? kJigsaws[k - 1] : "Synthetic gesture number " + std::to_string(k));
  }
  return v;
}

GestureVocabulary GestureVocabulary::parse(std::string_view text) {
  GestureVocabulary v;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ParseError("vocabulary line " + std::to_string(i + 1) + ": expected G<k><TAB>description");
    }
    GestureId id;
    try {
      id = GestureId::parse(trim(line.substr(0, tab)));
    } catch (const ParseError& e) {
      throw ParseError("vocabulary line " + std::to_string(i + 1) + ": " + e.what());
    }
    const auto desc = std::string(trim(line.substr(tab + 1)));
    if (id.is_placeholder()) {
      if (desc != v.describe(id)) {
        throw ParseError("vocabulary line " + std::to_string(i + 1) + ": placeholder " + id.token() +
                         " must be described as '" + v.describe(id) + "'");
      }
      continue;
    }
    if (v.contains(id)) {
      throw ParseError("vocabulary line " + std::to_string(i + 1) + ": duplicate " + id.token());
    }
    try {
      v.add(id, desc);
    } catch (const VocabularyError& e) {
      throw ParseError("vocabulary line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return v;
}

void GestureVocabulary::add(GestureId id, std::string description) {
  if (!id.valid() || id.is_placeholder()) throw VocabularyError("cannot add label " + id.token());
  if (description.empty()) throw VocabularyError("empty description for " + id.token());
  if (entries_.count(id.index())) throw VocabularyError("duplicate gesture " + id.token());
  entries_.emplace(id.index(), std::move(description));
}

bool GestureVocabulary::contains(GestureId id) const {
  return id.is_placeholder() || entries_.count(id.index()) > 0;
}

const std::string& GestureVocabulary::describe(GestureId id) const {
  static const std::string pre(kPreDescription);
  static const std::string post(kPostDescription);
  if (id == GestureId::pre()) return pre;
  if (id == GestureId::post()) return post;
  const auto it = entries_.find(id.index());
  if (it == entries_.end()) throw VocabularyError("gesture " + id.token() + " not in vocabulary");
  return it->second;
}

std::vector<GestureId> GestureVocabulary::gestures() const {
  std::vector<GestureId> out;
  for (const auto& [k, d] : entries_) out.emplace_back(k);
  return out;
}

std::string GestureVocabulary::serialize() const {
  std::string out;
  for (const auto& [k, d] : entries_) out += "G" + std::to_string(k) + "\t" + d + "\n";
  return out;
}

// ---- transcripts -------------------------------------------------------------

Transcript parse_transcript(std::string_view text, std::size_t frame_count, const GestureVocabulary& vocab) {
  struct Numbered {
    TranscriptRecord record;
    std::size_t line;
  };
  std::vector<Numbered> rows;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(i + 1) + ": ";
    const auto fields = split_ws(line);
    if (fields.size() != 3) throw ParseError(where + "expected 'start end G<k>'");
    TranscriptRecord rec;
    if (!parse_size(fields[0], rec.start) || !parse_size(fields[1], rec.end)) {
      throw ParseError(where + "frame numbers must be non-negative integers");
    }
    try {
      rec.gesture = GestureId::parse(fields[2]);
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    if (rec.gesture.is_placeholder() || !vocab.contains(rec.gesture)) {
      throw ParseError(where + "unknown gesture " + std::string(fields[2]));
    }
    if (rec.start > rec.end) throw ParseError(where + "start frame after end frame");
    if (rec.end >= frame_count) {
      throw ParseError(where + "end frame " + std::to_string(rec.end) + " beyond video of " +
                       std::to_string(frame_count) + " frames");
    }
    rows.push_back({rec, i + 1});
  }
  if (rows.empty()) throw ParseError("transcript has no records");
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Numbered& a, const Numbered& b) { return a.record.start < b.record.start; });
  Transcript t;
  t.frame_count = frame_count;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) {
      const auto& prev = rows[i - 1].record;
      const auto& cur = rows[i].record;
      const auto where = "line " + std::to_string(rows[i].line) + ": ";
      if (cur.start <= prev.end) throw ParseError(where + "overlaps the previous record");
      if (cur.start > prev.end + 1) throw ParseError(where + "leaves an interior gap after the previous record");
    }
    t.records.push_back(rows[i].record);
  }
  return t;
}

std::string format_transcript(const Transcript& t) {
  std::string out;
  for (const auto& r : t.records) {
    out += std::to_string(r.start) + " " + std::to_string(r.end) + " " + r.gesture.token() + "\n";
  }
  return out;
}

LabelStream to_label_stream(const Transcript& t) {
  LabelStream out(t.frame_count, GestureId::pre());
  if (t.records.empty()) return out;
  for (const auto& r : t.records)
    for (std::size_t f = r.start; f <= r.end; ++f) out[f] = r.gesture;
  for (std::size_t f = t.records.back().end + 1; f < t.frame_count; ++f) out[f] = GestureId::post();
  return out;
}

Transcript from_label_stream(const LabelStream& labels, std::string video_id, std::string user_id) {
  Transcript t;
  t.video_id = std::move(video_id);
  t.user_id = std::move(user_id);
  t.frame_count = labels.size();
  std::size_t b = 0, e = labels.size();
  while (b < e && labels[b] == GestureId::pre()) ++b;
  while (e > b && labels[e - 1] == GestureId::post()) --e;
  for (std::size_t i = b; i < e;) {
    std::size_t j = i;
    while (j < e && labels[j] == labels[i]) ++j;
    if (labels[i].is_placeholder()) {
      throw DataError("placeholder " + labels[i].token() + " inside the annotated range at frame " +
                      std::to_string(i));
    }
    t.records.push_back({i, j - 1, labels[i]});
    i = j;
  }
  return t;
}

// ---- splits --------------------------------------------------------------------

std::vector<Fold> louo_splits(std::span<const Transcript> transcripts) {
  std::set<std::string> users;
  for (const auto& t : transcripts) {
    if (t.user_id.empty()) throw SplitError("video " + t.video_id + " has no user id");
    users.insert(t.user_id);
  }
  if (users.size() < 2) throw SplitError("leave-one-user-out needs at least two users");
  std::vector<Fold> folds;
  for (const auto& u : users) {
    Fold f;
    f.name = u;
    for (std::size_t i = 0; i < transcripts.size(); ++i) {
      (transcripts[i].user_id == u ? f.test : f.train).push_back(i);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

Fold fixed_split(std::span<const Transcript> transcripts, const std::vector<std::string>& test_ids) {
  Fold f;
  f.name = "fixed";
  std::set<std::string> wanted(test_ids.begin(), test_ids.end());
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    const bool is_test = wanted.erase(transcripts[i].video_id) > 0;
    (is_test ? f.test : f.train).push_back(i);
  }
  if (!wanted.empty()) throw SplitError("test video " + *wanted.begin() + " not in corpus");
  if (f.test.empty()) throw SplitError("fixed split has no test videos");
  if (f.train.empty()) throw SplitError("fixed split has no training videos");
  return f;
}

Fold seeded_holdout(std::span<const Transcript> transcripts, std::size_t n_test, std::uint64_t seed) {
  if (n_test == 0 || n_test >= transcripts.size()) {
    throw SplitError("holdout size must leave both train and test videos");
  }
  std::vector<std::size_t> order(transcripts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n_test; ++i) ids.push_back(transcripts[order[i]].video_id);
  auto f = fixed_split(transcripts, ids);
  f.name = "holdout";
  return f;
}

// ---- zero-shot filtering ---------------------------------------------------------

std::vector<FrameClip> zero_shot_filter(std::span<const FrameClip> clips, const std::set<GestureId>& allowed) {
  std::vector<FrameClip> out;
  for (const auto& c : clips) {
    const bool keep = std::all_of(c.labels.begin(), c.labels.end(), [&](GestureId g) {
      return g.is_placeholder() || allowed.count(g) > 0;
    });
    if (keep) out.push_back(c);
  }
  return out;
}

// ---- synthetic corpus -----------------------------------------------------------

std::size_t pattern_row(GestureId id, int n_gestures) {
  if (id == GestureId::pre()) return 0;
  if (id == GestureId::post()) return static_cast<std::size_t>(n_gestures) + 1;
  if (id.index() < 1 || id.index() > n_gestures) throw DataError("label " + id.token() + " has no pattern");
  return static_cast<std::size_t>(id.index());
}

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Removes the components along the orthonormal rows of `basis` from v.
void project_out(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  for (const auto& b : basis) {
    const double c = dot(v.data(), b.data(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * b[i];
  }
}

void set_rms(std::vector<double>& v, double rms) {
  const double cur = std::sqrt(dot(v.data(), v.data(), v.size()) / static_cast<double>(v.size()));
  for (auto& x : v) x *= rms / cur;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.n_gestures < 2) throw ParameterError("synthetic corpus needs n_gestures >= 2");
  if (spec.frames_per_video < 64) throw ParameterError("synthetic corpus needs frames_per_video >= 64");
  if (spec.n_videos < 1) throw ParameterError("synthetic corpus needs at least one video");
  if (spec.n_users < 1) throw ParameterError("synthetic corpus needs at least one user");
  if (spec.height < 2 || spec.width < 2) throw ParameterError("frame maps must be at least 2x2");
  if (spec.noise < 0.0 || spec.background < 0.0) throw ParameterError("noise amplitudes must be non-negative");
  if (spec.min_segment < 1 || spec.min_segment > spec.max_segment) {
    throw ParameterError("segment length bounds must satisfy 1 <= min <= max");
  }
  const std::size_t pixels = spec.height * spec.width;
  const std::size_t n_labels = static_cast<std::size_t>(spec.n_gestures) + 2;
  const std::size_t n_prims = spec.primitives == 0 ? n_labels : std::min(spec.primitives, n_labels);
  if (n_prims + 1 > pixels) throw ParameterError("frame maps too small for the primitive count");

  Rng rng(spec.seed);

  // Smooth blob primitives, orthonormalised.
  std::vector<std::vector<double>> basis;
  while (basis.size() < n_prims) {
    const double cy = rng.uniform(0.0, static_cast<double>(spec.height));
    const double cx = rng.uniform(0.0, static_cast<double>(spec.width));
    const double sigma = rng.uniform(1.5, 3.5);
    std::vector<double> img(pixels);
    for (std::size_t y = 0; y < spec.height; ++y)
      for (std::size_t x = 0; x < spec.width; ++x) {
        const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
        img[y * spec.width + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)) + 0.1 * rng.normal();
      }
    project_out(img, basis);
    const double norm = std::sqrt(dot(img.data(), img.data(), pixels));
    if (norm < 1e-6) continue;
    for (auto& v : img) v /= norm;
    basis.push_back(std::move(img));
  }

  // Gesture patterns: RMS-1 mixtures of the primitives, kept apart in angle.
  Tensor patterns = Tensor::zeros({n_labels, pixels});
  std::vector<std::vector<double>> accepted;
  for (std::size_t g = 0; g < n_labels; ++g) {
    std::vector<double> p(pixels);
    for (int attempt = 0;; ++attempt) {
      std::fill(p.begin(), p.end(), 0.0);
      for (const auto& b : basis) {
        const double c = rng.normal();
        for (std::size_t i = 0; i < pixels; ++i) p[i] += c * b[i];
      }
      set_rms(p, 1.0);
      bool distinct = true;
      for (const auto& q : accepted) {
        if (dot(p.data(), q.data(), pixels) / static_cast<double>(pixels) > 0.8) distinct = false;
      }
      if (distinct || attempt > 200) break;
    }
    accepted.push_back(p);
    std::copy(p.begin(), p.end(), &patterns.values[g * pixels]);
  }

  SyntheticCorpus corpus;
  corpus.patterns = patterns;
  for (std::size_t v = 0; v < spec.n_videos; ++v) {
    Video video;
    char id[32];
    std::snprintf(id, sizeof id, "vid%03zu", v);
    video.id = id;
    video.user = "U" + std::to_string(v % spec.n_users + 1);
    video.task = spec.task;
    video.height = spec.height;
    video.width = spec.width;

    const std::size_t T = spec.frames_per_video;
    std::size_t head = 0, tail = 0;
    if (spec.max_gap > 0) {
      head = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(spec.max_gap)));
      tail = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(spec.max_gap)));
    }
    video.labels.assign(T, GestureId::pre());
    for (std::size_t f = T - tail; f < T; ++f) video.labels[f] = GestureId::post();
    int prev = 0;
    for (std::size_t f = head; f < T - tail;) {
      int g = 0;
      do {
        g = static_cast<int>(rng.uniform_int(1, spec.n_gestures));
      } while (g == prev);
      prev = g;
      const auto len = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(spec.min_segment),
                                                                static_cast<std::int64_t>(spec.max_segment)));
      // No room for a full segment: the tail gap takes the rest.
      const std::size_t room = T - tail - f;
      if (room < spec.min_segment) {
        for (; f < T - tail; ++f) video.labels[f] = GestureId::post();
        break;
      }
      const std::size_t stop = f + std::min(room, len);
      for (; f < stop; ++f) video.labels[f] = GestureId(g);
    }

    std::vector<double> background(pixels, 0.0);
    if (spec.background > 0.0) {
      for (auto& x : background) x = rng.normal();
      project_out(background, basis);
      set_rms(background, spec.background);
    }
    video.frames = Tensor::zeros({T, pixels});
    for (std::size_t f = 0; f < T; ++f) {
      const double* base = &patterns.values[pattern_row(video.labels[f], spec.n_gestures) * pixels];
      double* out = &video.frames.values[f * pixels];
      for (std::size_t i = 0; i < pixels; ++i) out[i] = base[i] + background[i] + spec.noise * rng.normal();
    }
    corpus.videos.push_back(std::move(video));
  }
  return corpus;
}

// ---- file formats -----------------------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("short write to " + path);
}

namespace {

void write_matrix(const std::string& path, const std::string& header, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << header << "\n";
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw IoError("short write to " + path);
}

std::vector<double> read_matrix(const std::string& path, std::vector<std::size_t>& header, std::size_t fields) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  const auto parts = split_ws(trim(line));
  header.assign(fields, 0);
  if (parts.size() != fields) throw DataError(path + ": malformed header '" + line + "'");
  for (std::size_t i = 0; i < fields; ++i)
    if (!parse_size(parts[i], header[i])) throw DataError(path + ": malformed header '" + line + "'");
  std::size_t n = 1;
  for (auto h : header) n *= h;
  std::vector<double> values(n);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) {
    throw DataError(path + ": payload shorter than header declares");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path + ": trailing bytes after payload");
  return values;
}

}  // namespace

void write_frames(const std::string& path, const Video& video) {
  write_matrix(path,
               std::to_string(video.height) + " " + std::to_string(video.width) + " " +
                   std::to_string(video.frames.dim(0)),
               video.frames.values);
}

Tensor read_frames(const std::string& path, std::size_t& height, std::size_t& width) {
  std::vector<std::size_t> header;
  auto values = read_matrix(path, header, 3);
  height = header[0];
  width = header[1];
  return Tensor({header[2], header[0] * header[1]}, std::move(values));
}

void write_features(const std::string& path, const Tensor& features) {
  if (features.rank() != 2) throw DimensionError("feature matrix must be T x d");
  write_matrix(path, std::to_string(features.dim(0)) + " " + std::to_string(features.dim(1)), features.values);
}

Tensor read_features(const std::string& path) {
  std::vector<std::size_t> header;
  auto values = read_matrix(path, header, 2);
  return Tensor({header[0], header[1]}, std::move(values));
}

void write_corpus(const std::string& dir, std::span<const Video> videos, const GestureVocabulary& vocab) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "videos", ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  std::string manifest = "video_id\tuser\ttask\tframes\n";
  for (const auto& v : videos) {
    const auto vdir = fs::path(dir) / "videos" / v.id;
    fs::create_directories(vdir, ec);
    if (ec) throw IoError("cannot create " + vdir.string() + ": " + ec.message());
    write_frames((vdir / "frames.bin").string(), v);
    write_text_file((vdir / "labels.txt").string(), format_transcript(from_label_stream(v.labels, v.id, v.user)));
    manifest += v.id + "\t" + v.user + "\t" + v.task + "\t" + std::to_string(v.frame_count()) + "\n";
  }
  write_text_file((fs::path(dir) / "manifest.tsv").string(), manifest);
  write_text_file((fs::path(dir) / "vocabulary.txt").string(), vocab.serialize());
}

std::vector<Video> read_corpus(const std::string& dir, GestureVocabulary& vocab) {
  vocab = GestureVocabulary::parse(read_text_file((fs::path(dir) / "vocabulary.txt").string()));
  const auto manifest = read_text_file((fs::path(dir) / "manifest.tsv").string());
  const auto lines = split_lines(manifest);
  std::vector<Video> videos;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto fields = split_ws(line);
    if (fields.size() != 4) throw DataError("manifest line " + std::to_string(i + 1) + " malformed");
    Video v;
    v.id = std::string(fields[0]);
    v.user = std::string(fields[1]);
    v.task = std::string(fields[2]);
    std::size_t frames = 0;
    if (!parse_size(fields[3], frames)) throw DataError("manifest line " + std::to_string(i + 1) + " malformed");
    const auto vdir = fs::path(dir) / "videos" / v.id;
    v.frames = read_frames((vdir / "frames.bin").string(), v.height, v.width);
    if (v.frames.dim(0) != frames) throw DataError(v.id + ": frame count differs from manifest");
    auto t = parse_transcript(read_text_file((vdir / "labels.txt").string()), frames, vocab);
    v.labels = to_label_stream(t);
    videos.push_back(std::move(v));
  }
  return videos;
}

std::vector<Transcript> corpus_transcripts(std::span<const Video> videos) {
  std::vector<Transcript> out;
  for (const auto& v : videos) out.push_back(from_label_stream(v.labels, v.id, v.user));
  return out;
}

}  // namespace bp
