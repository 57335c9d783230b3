#include "bridgeprompt/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "bridgeprompt/error.hpp"
#include "bridgeprompt/sampling.hpp"

namespace bp {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto next = s.find(',', pos);
    if (next == std::string_view::npos) next = s.size();
    auto item = trim(s.substr(pos, next - pos));
    if (!item.empty()) out.emplace_back(item);
    pos = next + 1;
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

std::size_t to_positive(const std::string& key, std::string_view v) {
  auto n = to_size(key, v);
  if (n == 0) throw ConfigError(key + ": must be positive");
  return n;
}

double to_double(const std::string& key, std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a finite number, got '" + std::string(v) + "'");
  }
  return out;
}

double to_nonnegative(const std::string& key, std::string_view v) {
  auto d = to_double(key, v);
  if (d < 0.0) throw ConfigError(key + ": must not be negative");
  return d;
}

double to_positive_real(const std::string& key, std::string_view v) {
  auto d = to_double(key, v);
  if (!(d > 0.0)) throw ConfigError(key + ": must be positive");
  return d;
}

int to_gesture(const std::string& key, const std::string& token) {
  std::string_view t = token;
  if (!t.empty() && (t[0] == 'G' || t[0] == 'g')) t.remove_prefix(1);
  const auto n = to_u64(key, t);
  if (n == 0 || n > 1000) throw ConfigError(key + ": gesture index out of range: " + token);
  return static_cast<int>(n);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(line_no) + ": missing '='");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

ExperimentConfig resolve_config(const ConfigMap& settings) {
  ExperimentConfig c;
  for (const auto& [key, value] : settings) {
    const std::string_view v = value;
    if (key == "corpus") c.corpus = value;
    else if (key == "out") c.out = value;
    else if (key == "checkpoint") c.checkpoint = value;
    else if (key == "features") c.features = value;
    else if (key == "runs") c.runs = split_list(v);
    else if (key == "seed") c.seed = to_u64(key, v);
    // synthetic corpus
    else if (key == "n_videos") c.synth.n_videos = to_positive(key, v);
    else if (key == "n_gestures") c.synth.n_gestures = static_cast<int>(to_size(key, v));
    else if (key == "frames_per_video") c.synth.frames_per_video = to_positive(key, v);
    else if (key == "n_users") c.synth.n_users = to_positive(key, v);
    else if (key == "height") c.synth.height = c.encoder.height = to_positive(key, v);
    else if (key == "width") c.synth.width = c.encoder.width = to_positive(key, v);
    else if (key == "noise") c.synth.noise = to_nonnegative(key, v);
    else if (key == "background") c.synth.background = to_nonnegative(key, v);
    else if (key == "primitives") c.synth.primitives = to_positive(key, v);
    else if (key == "min_segment") c.synth.min_segment = to_positive(key, v);
    else if (key == "max_segment") c.synth.max_segment = to_positive(key, v);
    else if (key == "max_gap") c.synth.max_gap = to_size(key, v);
    else if (key == "task") c.synth.task = value;
    // sampling
    else if (key == "strides") {
      c.strides.clear();
      for (const auto& s : split_list(v)) c.strides.insert(to_positive(key, s));
      require(!c.strides.empty(), "strides: at least one stride required");
    } else if (key == "hop") c.hop = to_positive(key, v);
    // encoders and pre-training
    else if (key == "dim") c.encoder.dim = to_positive(key, v);
    else if (key == "hidden") c.encoder.hidden = to_positive(key, v);
    else if (key == "heads") c.encoder.heads = to_positive(key, v);
    else if (key == "temperature") c.pretrain.temperature = to_positive_real(key, v);
    else if (key == "epochs") c.pretrain.epochs = to_size(key, v);
    else if (key == "lr") c.pretrain.learning_rate = to_nonnegative(key, v);
    else if (key == "batch_size") c.pretrain.batch_size = to_size(key, v);
    else if (key == "prompt_mode") {
      try {
        c.prompt_mode = parse_prompt_mode(v);
      } catch (const Error& e) {
        throw ConfigError(std::string("prompt_mode: ") + e.what());
      }
    } else if (key == "allowed_gestures") {
      c.allowed_gestures.clear();
      if (trim(v) != "all")
        for (const auto& g : split_list(v)) c.allowed_gestures.insert(to_gesture(key, g));
    }
    // recognizer
    else if (key == "tcn_epochs") c.tcn_train.epochs = to_size(key, v);
    else if (key == "tcn_lr") c.tcn_train.learning_rate = to_nonnegative(key, v);
    else if (key == "tcn_lambda") c.tcn_train.lambda = to_nonnegative(key, v);
    else if (key == "tcn_threshold") c.tcn_train.threshold = to_positive_real(key, v);
    else if (key == "tcn_channels") c.tcn.channels = to_positive(key, v);
    else if (key == "tcn_generation_layers") c.tcn.generation_layers = to_positive(key, v);
    else if (key == "tcn_refinement_stages") c.tcn.refinement_stages = to_size(key, v);
    else if (key == "tcn_refinement_layers") c.tcn.refinement_layers = to_positive(key, v);
    else if (key == "score_placeholders") {
      if (v == "true" || v == "1") c.score_placeholders = true;
      else if (v == "false" || v == "0") c.score_placeholders = false;
      else throw ConfigError("score_placeholders: expected true or false, got '" + value + "'");
    }
    // splits
    else if (key == "split") {
      if (v == "louo") c.split = SplitScheme::Louo;
      else if (v == "fixed") c.split = SplitScheme::Fixed;
      else if (v == "holdout") c.split = SplitScheme::Holdout;
      else throw ConfigError("split: expected louo, fixed or holdout, got '" + value + "'");
    } else if (key == "louo_folds") c.louo_folds = split_list(v);
    else if (key == "test_videos") c.test_videos = split_list(v);
    else if (key == "holdout_count") c.holdout_count = to_positive(key, v);
    else throw ConfigError("unknown configuration key '" + key + "'");
  }

  require(c.synth.n_gestures >= 2, "n_gestures: at least 2 gestures required");
  require(c.synth.min_segment <= c.synth.max_segment, "min_segment: must not exceed max_segment");
  require(c.pretrain.batch_size >= 2, "batch_size: contrastive batches need at least 2 clips");
  require(c.encoder.dim % c.encoder.heads == 0, "heads: must divide dim");
  if (c.split == SplitScheme::Fixed) require(!c.test_videos.empty(), "test_videos: required by split = fixed");
  return c;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::vector<std::string> strides, allowed;
  for (auto s : c.strides) strides.push_back(std::to_string(s));
  for (auto g : c.allowed_gestures) allowed.push_back(std::to_string(g));
  const char* split = c.split == SplitScheme::Louo ? "louo" : c.split == SplitScheme::Fixed ? "fixed" : "holdout";
  std::vector<std::pair<std::string, std::string>> kv = {
      {"corpus", c.corpus},
      {"out", c.out},
      {"checkpoint", c.checkpoint},
      {"features", c.features},
      {"runs", join(c.runs)},
      {"seed", c.seed ? std::to_string(*c.seed) : ""},
      {"n_videos", std::to_string(c.synth.n_videos)},
      {"n_gestures", std::to_string(c.synth.n_gestures)},
      {"frames_per_video", std::to_string(c.synth.frames_per_video)},
      {"n_users", std::to_string(c.synth.n_users)},
      {"height", std::to_string(c.synth.height)},
      {"width", std::to_string(c.synth.width)},
      {"noise", fmt_double(c.synth.noise)},
      {"background", fmt_double(c.synth.background)},
      {"primitives", std::to_string(c.synth.primitives)},
      {"min_segment", std::to_string(c.synth.min_segment)},
      {"max_segment", std::to_string(c.synth.max_segment)},
      {"max_gap", std::to_string(c.synth.max_gap)},
      {"task", c.synth.task},
      {"strides", join(strides)},
      {"hop", std::to_string(c.hop)},
      {"dim", std::to_string(c.encoder.dim)},
      {"hidden", std::to_string(c.encoder.hidden)},
      {"heads", std::to_string(c.encoder.heads)},
      {"temperature", fmt_double(c.pretrain.temperature)},
      {"epochs", std::to_string(c.pretrain.epochs)},
      {"lr", fmt_double(c.pretrain.learning_rate)},
      {"batch_size", std::to_string(c.pretrain.batch_size)},
      {"prompt_mode", to_string(c.prompt_mode)},
      {"allowed_gestures", allowed.empty() ? "all" : join(allowed)},
      {"tcn_epochs", std::to_string(c.tcn_train.epochs)},
      {"tcn_lr", fmt_double(c.tcn_train.learning_rate)},
      {"tcn_lambda", fmt_double(c.tcn_train.lambda)},
      {"tcn_threshold", fmt_double(c.tcn_train.threshold)},
      {"tcn_channels", std::to_string(c.tcn.channels)},
      {"tcn_generation_layers", std::to_string(c.tcn.generation_layers)},
      {"tcn_refinement_stages", std::to_string(c.tcn.refinement_stages)},
      {"tcn_refinement_layers", std::to_string(c.tcn.refinement_layers)},
      {"score_placeholders", c.score_placeholders ? "true" : "false"},
      {"split", split},
      {"louo_folds", join(c.louo_folds)},
      {"test_videos", join(c.test_videos)},
      {"holdout_count", std::to_string(c.holdout_count)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

// ---- class space -------------------------------------------------------------

ClassSpace::ClassSpace(const GestureVocabulary& vocab) {
  for (auto g : vocab.gestures()) {
    present_.insert(g.index());
    n_ = std::max(n_, g.index());
  }
  if (n_ == 0) throw VocabularyError("class space needs at least one gesture");
}

int ClassSpace::to_class(GestureId id) const {
  if (id == GestureId::pre()) return 0;
  if (id == GestureId::post()) return n_ + 1;
  if (!present_.count(id.index())) throw VocabularyError("label " + id.token() + " is not in the vocabulary");
  return id.index();
}

GestureId ClassSpace::from_class(int cls) const {
  if (cls == 0) return GestureId::pre();
  if (cls == n_ + 1) return GestureId::post();
  if (cls < 0 || cls > n_) throw DataError("class " + std::to_string(cls) + " outside the class space");
  return GestureId(cls);
}

std::vector<int> ClassSpace::encode(std::span<const GestureId> labels) const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (auto g : labels) out.push_back(to_class(g));
  return out;
}

std::set<int> ClassSpace::gesture_classes() const { return present_; }

// ---- stages --------------------------------------------------------------------

PretrainData prepare_pretrain_data(std::span<const Video> videos, const GestureVocabulary& vocab,
                                   const ExperimentConfig& config) {
  if (videos.empty()) throw DataError("the corpus holds no videos");
  PretrainData data;
  auto clips = extract_all_clips(videos, config.strides, config.hop);
  if (!config.allowed_gestures.empty()) {
    std::set<GestureId> allowed;
    bool any = false;
    for (int g : config.allowed_gestures) {
      allowed.insert(GestureId(g));
      for (const auto& v : videos)
        if (std::find(v.labels.begin(), v.labels.end(), GestureId(g)) != v.labels.end()) any = true;
    }
    if (!any) throw ConfigError("allowed_gestures: no allowed gesture occurs in the corpus");
    clips = zero_shot_filter(clips, allowed);
  }
  if (clips.empty()) throw ConfigError("no clips survive sampling and the gesture filter");
  data.clips = std::move(clips);
  data.items.reserve(data.clips.size());
  for (const auto& clip : data.clips) data.items.push_back(make_item(clip, vocab, config.prompt_mode));
  return data;
}

EncoderSet make_encoder(const GestureVocabulary& vocab, const ExperimentConfig& config) {
  if (!config.seed) throw ConfigError("seed: required");
  EncoderConfig ec = config.encoder;
  ec.seed = *config.seed;
  return EncoderSet(ec, prompt_lexicon(vocab));
}

std::vector<EpochLoss> pretrain_encoder(EncoderSet& model, std::span<const Video> videos,
                                        const GestureVocabulary& vocab, const ExperimentConfig& config,
                                        const EpochCallback& on_epoch) {
  if (!config.seed) throw ConfigError("seed: required");
  for (const auto& v : videos) {
    if (v.frames.dim(1) != model.image.input_size()) {
      throw DimensionError(v.id + ": frames have " + std::to_string(v.frames.dim(1)) + " pixels, encoder expects " +
                           std::to_string(model.image.input_size()));
    }
  }
  auto data = prepare_pretrain_data(videos, vocab, config);
  PretrainConfig pc = config.pretrain;
  pc.seed = derive_seed(*config.seed, 11);
  return pretrain(model, data.items, pc, on_epoch);
}

std::vector<Tensor> embed_videos(const EncoderSet& model, std::span<const Video> videos) {
  std::vector<Tensor> out;
  out.reserve(videos.size());
  for (const auto& v : videos) out.push_back(model.image.embed(v.frames));
  return out;
}

std::vector<Fold> make_folds(std::span<const Video> videos, const ExperimentConfig& config) {
  const auto transcripts = corpus_transcripts(videos);
  switch (config.split) {
    case SplitScheme::Fixed:
      return {fixed_split(transcripts, config.test_videos)};
    case SplitScheme::Holdout:
      return {seeded_holdout(transcripts, config.holdout_count, config.seed.value_or(0))};
    case SplitScheme::Louo:
      break;
  }
  auto folds = louo_splits(transcripts);
  if (config.louo_folds.empty()) return folds;
  std::vector<Fold> kept;
  for (const auto& user : config.louo_folds) {
    auto it = std::find_if(folds.begin(), folds.end(), [&](const Fold& f) { return f.name == user; });
    if (it == folds.end()) throw SplitError("louo_folds: no videos from user '" + user + "'");
    kept.push_back(*it);
  }
  return kept;
}

EvaluationResult train_and_evaluate(std::span<const Video> videos, std::span<const Tensor> features,
                                    const GestureVocabulary& vocab, const ExperimentConfig& config) {
  if (!config.seed) throw ConfigError("seed: required");
  if (videos.size() != features.size()) throw DimensionError("one feature matrix per video required");
  if (videos.empty()) throw DataError("the corpus holds no videos");
  const ClassSpace classes(vocab);
  const std::size_t d = features[0].rank() == 2 ? features[0].dim(1) : 0;
  std::vector<std::vector<int>> labels;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (features[i].rank() != 2 || features[i].dim(0) != videos[i].frame_count() || features[i].dim(1) != d) {
      throw DimensionError(videos[i].id + ": features " + shape_string(features[i].shape) + " do not match " +
                           std::to_string(videos[i].frame_count()) + " frames of width " + std::to_string(d));
    }
    labels.push_back(classes.encode(videos[i].labels));
  }

  EvaluationResult result;
  std::vector<ScoreReport> reports;
  for (const auto& fold : make_folds(videos, config)) {
    if (fold.test.empty()) throw SplitError("fold " + fold.name + " has no test videos");
    if (fold.train.empty()) throw SplitError("fold " + fold.name + " has no training videos");
    std::vector<Tensor> train_x;
    std::vector<std::vector<int>> train_y;
    for (auto i : fold.train) {
      train_x.push_back(features[i]);
      train_y.push_back(labels[i]);
    }
    MsTcnConfig mc = config.tcn;
    mc.input_dim = d;
    mc.classes = classes.size();
    mc.seed = derive_seed(*config.seed, 21);
    RecognizerTrainConfig tc = config.tcn_train;
    tc.seed = derive_seed(*config.seed, 22);
    MsTcn model(mc);
    FoldOutcome outcome;
    outcome.fold = fold;
    outcome.losses = train_recognizer(model, train_x, train_y, tc);
    ScoreAccumulator acc(config.score_placeholders ? std::set<int>{} : classes.ignored(), classes.gesture_classes());
    for (auto i : fold.test) {
      auto pred = predict(model, features[i]);
      acc.add(pred.labels, labels[i]);
      outcome.predictions[i] = std::move(pred.labels);
    }
    outcome.report = acc.report();
    reports.push_back(outcome.report);
    result.folds.push_back(std::move(outcome));
  }
  result.mean = mean_report(reports);
  return result;
}

// ---- subcommands -------------------------------------------------------------

namespace {

void require_out(const ExperimentConfig& c) {
  if (c.out.empty()) throw ConfigError("out: output directory required");
}

std::vector<Video> load_corpus(const ExperimentConfig& c, GestureVocabulary& vocab) {
  if (c.corpus.empty()) throw ConfigError("corpus: corpus directory required");
  if (!fs::is_directory(c.corpus)) throw IoError("corpus directory not found: " + c.corpus);
  return read_corpus(c.corpus, vocab);
}

void write_config(const ExperimentConfig& c) { write_text_file(path_in(c.out, "config.txt"), serialize_config(c)); }

std::string corpus_task(std::span<const Video> videos) {
  std::set<std::string> tasks;
  for (const auto& v : videos) tasks.insert(v.task);
  std::string out;
  for (const auto& t : tasks) out += (out.empty() ? "" : "+") + t;
  return out;
}

std::vector<std::string> csv_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto next = line.find(',', pos);
    out.emplace_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace

void run_synth(const ExperimentConfig& config) {
  require_out(config);
  SyntheticSpec spec = config.synth;
  if (config.seed) spec.seed = *config.seed;
  ensure_dir(config.out);
  write_config(config);
  auto corpus = generate_synthetic_corpus(spec);
  write_corpus(config.out, corpus.videos, GestureVocabulary::first(spec.n_gestures));
}

void run_pretrain(const ExperimentConfig& config) {
  require_out(config);
  if (!config.seed) throw ConfigError("seed: --seed is required for pretrain");
  GestureVocabulary vocab;
  auto videos = load_corpus(config, vocab);
  ExperimentConfig c = config;
  c.encoder.height = videos.front().height;
  c.encoder.width = videos.front().width;
  prepare_pretrain_data(videos, vocab, c);  // validate the filter before writing anything
  ensure_dir(c.out);
  write_config(c);
  auto model = make_encoder(vocab, c);
  std::vector<EpochLoss> log;
  pretrain_encoder(model, videos, vocab, c, [&](const EpochLoss& e) {
    log.push_back(e);
    write_text_file(path_in(c.out, "loss.log"), format_loss_log(log));
  });
  write_text_file(path_in(c.out, "loss.log"), format_loss_log(log));
  save_checkpoint(path_in(c.out, "checkpoint.bin"), model);
}

void run_extract(const ExperimentConfig& config) {
  require_out(config);
  if (config.checkpoint.empty()) throw ConfigError("checkpoint: checkpoint path required");
  GestureVocabulary vocab;
  auto videos = load_corpus(config, vocab);
  auto model = load_checkpoint(config.checkpoint);
  for (const auto& v : videos) {
    if (v.frames.dim(1) != model.image.input_size()) {
      throw DimensionError(v.id + ": " + std::to_string(v.height) + "x" + std::to_string(v.width) +
                           " frames do not fit the checkpoint's " + std::to_string(model.config.height) + "x" +
                           std::to_string(model.config.width) + " encoder");
    }
  }
  ensure_dir(path_in(config.out, "features"));
  write_config(config);
  auto features = embed_videos(model, videos);
  for (std::size_t i = 0; i < videos.size(); ++i) {
    write_features(path_in(path_in(config.out, "features"), videos[i].id + ".feat"), features[i]);
  }
}

void run_train_eval(const ExperimentConfig& config) {
  require_out(config);
  if (!config.seed) throw ConfigError("seed: --seed is required for train-eval");
  if (config.features.empty()) throw ConfigError("features: feature directory required");
  GestureVocabulary vocab;
  auto videos = load_corpus(config, vocab);
  std::vector<Tensor> features;
  for (const auto& v : videos) {
    const auto path = path_in(config.features, v.id + ".feat");
    if (!fs::exists(path)) throw IoError("missing feature file " + path);
    features.push_back(read_features(path));
  }
  make_folds(videos, config);  // split errors before any output
  ensure_dir(path_in(config.out, "predictions"));
  write_config(config);

  auto result = train_and_evaluate(videos, features, vocab, config);
  const ClassSpace classes(vocab);
  const auto task = corpus_task(videos);
  std::string report = std::string(kReportHeader) + "\n";
  std::string log = "fold epoch loss\n";
  char line[96];
  for (const auto& f : result.folds) {
    report += format_report_row(f.fold.name, task, f.report);
    for (std::size_t e = 0; e < f.losses.size(); ++e) {
      std::snprintf(line, sizeof line, "%s %zu %.6f\n", f.fold.name.c_str(), e + 1, f.losses[e]);
      log += line;
    }
    for (const auto& [i, pred] : f.predictions) {
      std::string text;
      for (int cls : pred) text += classes.from_class(cls).token() + "\n";
      write_text_file(path_in(path_in(config.out, "predictions"), videos[i].id + ".txt"), text);
    }
  }
  report += format_report_row("mean", task, result.mean);
  std::map<int, std::string> names;
  for (int cls : classes.gesture_classes()) names[cls] = classes.from_class(cls).token();
  write_text_file(path_in(config.out, "report.csv"), report);
  write_text_file(path_in(config.out, "per_class.csv"), format_per_class_csv(result.mean, names));
  write_text_file(path_in(config.out, "train_log.txt"), log);
}

void run_report(const ExperimentConfig& config) {
  require_out(config);
  if (config.runs.empty()) throw ConfigError("runs: at least one run directory required");
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& run : config.runs) {
    const auto text = read_text_file(path_in(run, "report.csv"));
    std::string_view rest = text;
    bool header = true, found = false;
    while (!rest.empty()) {
      auto nl = rest.find('\n');
      auto line = trim(rest.substr(0, nl));
      rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
      if (line.empty()) continue;
      if (header) {
        if (line != kReportHeader) throw DataError(run + "/report.csv: unexpected header");
        header = false;
        continue;
      }
      auto fields = csv_fields(line);
      if (fields.size() != 7) throw DataError(run + "/report.csv: malformed row");
      if (fields[0] != "mean") continue;
      fields[0] = fs::path(run).filename().string();
      if (fields[0].empty()) fields[0] = fs::path(run).parent_path().filename().string();
      std::string row;
      for (const auto& f : fields) row += (row.empty() ? "" : ",") + f;
      out += row + "\n";
      found = true;
    }
    if (!found) throw DataError(run + "/report.csv: no mean row");
  }
  ensure_dir(config.out);
  write_config(config);
  write_text_file(path_in(config.out, "summary.csv"), out);
}

}  // namespace bp
