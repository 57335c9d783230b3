#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bridgeprompt/contrastive.hpp"
#include "bridgeprompt/dataset.hpp"
#include "bridgeprompt/encoders.hpp"
#include "bridgeprompt/metrics.hpp"
#include "bridgeprompt/mstcn.hpp"
#include "bridgeprompt/prompts.hpp"

namespace bp {

// Raw "key = value" settings; later assignments win.
using ConfigMap = std::map<std::string, std::string>;

// '#' starts a comment. Blank lines are skipped. ConfigError on a line with
// no '=' or an empty key.
ConfigMap parse_config_text(std::string_view text);

enum class SplitScheme { Louo, Fixed, Holdout };

struct ExperimentConfig {
  std::string corpus;
  std::string out;
  std::string checkpoint;
  std::string features;
  std::vector<std::string> runs;  // report inputs
  std::optional<std::uint64_t> seed;

  SyntheticSpec synth;
  std::set<std::size_t> strides{4, 8, 16};
  std::size_t hop = 16;
  EncoderConfig encoder;
  PretrainConfig pretrain;
  PromptMode prompt_mode = PromptMode::Text;
  // Gesture indices visible during pre-training; empty means all.
  std::set<int> allowed_gestures;

  MsTcnConfig tcn;
  RecognizerTrainConfig tcn_train;
  // Placeholder frames are left out of the reported metrics unless set.
  bool score_placeholders = false;

  SplitScheme split = SplitScheme::Louo;
  std::vector<std::string> louo_folds;  // restrict LOUO to these users
  std::vector<std::string> test_videos;
  std::size_t holdout_count = 4;
};

// Validates every key and value; ConfigError names the offending key.
ExperimentConfig resolve_config(const ConfigMap& settings);
std::string serialize_config(const ExperimentConfig& config);

// Class indices for the recognizer: PRE -> 0, G<k> -> k, POST -> n+1, with
// n the largest gesture index of the vocabulary.
class ClassSpace {
 public:
  explicit ClassSpace(const GestureVocabulary& vocab);

  int to_class(GestureId id) const;
  GestureId from_class(int cls) const;
  std::vector<int> encode(std::span<const GestureId> labels) const;
  std::size_t size() const { return static_cast<std::size_t>(n_ + 2); }
  // Placeholder classes, left out of every reported metric.
  std::set<int> ignored() const { return {0, n_ + 1}; }
  std::set<int> gesture_classes() const;

 private:
  int n_ = 0;
  std::set<int> present_;
};

// Clip -> prompt items for pre-training under the zero-shot filter.
struct PretrainData {
  std::vector<FrameClip> clips;
  std::vector<ContrastiveItem> items;  // points into `clips`
};
PretrainData prepare_pretrain_data(std::span<const Video> videos, const GestureVocabulary& vocab,
                                   const ExperimentConfig& config);

EncoderSet make_encoder(const GestureVocabulary& vocab, const ExperimentConfig& config);
std::vector<EpochLoss> pretrain_encoder(EncoderSet& model, std::span<const Video> videos,
                                        const GestureVocabulary& vocab, const ExperimentConfig& config,
                                        const EpochCallback& on_epoch = {});

// Frozen frame-wise embeddings, one [T x dim] matrix per video.
std::vector<Tensor> embed_videos(const EncoderSet& model, std::span<const Video> videos);

std::vector<Fold> make_folds(std::span<const Video> videos, const ExperimentConfig& config);

struct FoldOutcome {
  Fold fold;
  ScoreReport report;
  std::vector<double> losses;
  std::map<std::size_t, std::vector<int>> predictions;  // by video index
};

struct EvaluationResult {
  std::vector<FoldOutcome> folds;
  ScoreReport mean;
};

EvaluationResult train_and_evaluate(std::span<const Video> videos, std::span<const Tensor> features,
                                    const GestureVocabulary& vocab, const ExperimentConfig& config);

// ---- subcommands -------------------------------------------------------------

void run_synth(const ExperimentConfig& config);
void run_pretrain(const ExperimentConfig& config);
void run_extract(const ExperimentConfig& config);
void run_train_eval(const ExperimentConfig& config);
void run_report(const ExperimentConfig& config);

}  // namespace bp
