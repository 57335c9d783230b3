#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bridgeprompt/autodiff.hpp"
#include "bridgeprompt/dataset.hpp"
#include "bridgeprompt/sampling.hpp"

namespace bp {

struct EncoderConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t hidden = 128;
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::uint64_t seed = 0;

  std::size_t pixels() const { return height * width; }
};

// Frame map -> embedding: flatten, linear, tanh, linear.
class ImageEncoder {
 public:
  ImageEncoder(const EncoderConfig& config, std::uint64_t seed);

  // frames [n x pixels] -> [n x dim]
  Var encode(Tape& tape, Var frames);
  Var encode_frames(Tape& tape, const FrameClip& clip);
  // Frozen inference over a whole video, no gradient tracking: [T x dim].
  Tensor embed(const Tensor& frames) const;

  std::size_t input_size() const { return pixels_; }
  std::size_t dim() const { return dim_; }
  std::vector<Parameter*> parameters() { return {&w1_, &b1_, &w2_, &b2_}; }

 private:
  std::size_t pixels_;
  std::size_t dim_;
  Parameter w1_, b1_, w2_, b2_;
};

// Bag-of-words prompt encoder: mean of token embeddings, then linear.
// Token 0 is reserved for words outside the lexicon.
class TextEncoder {
 public:
  TextEncoder(std::vector<std::string> lexicon, std::size_t dim, std::uint64_t seed);

  std::size_t token_id(const std::string& word) const;
  std::vector<std::size_t> token_ids(std::string_view prompt) const;

  // One row per prompt: [n x dim].
  Var encode(Tape& tape, std::span<const std::string> prompts);
  Var encode_text(Tape& tape, const std::string& prompt);

  const std::vector<std::string>& lexicon() const { return lexicon_; }
  std::vector<Parameter*> parameters() { return {&table_, &proj_, &bias_}; }

 private:
  std::vector<std::string> lexicon_;
  std::size_t dim_;
  Parameter table_, proj_, bias_;
};

struct FusionOutput {
  Var per_run;     // z_c^k stacked: [K x dim]
  Var clip_mean;   // mean over runs: [1 x dim]
  Var count;       // count-token output: [1 x dim]
};

// One multi-head self-attention block over
// [16 frame embeddings | K ordinal prompt embeddings | count token],
// with learned clip-position and run-membership offsets.
class FusionModule {
 public:
  FusionModule(std::size_t dim, std::size_t heads, std::uint64_t seed);

  FusionOutput fuse(Tape& tape, Var frame_embs, Var ordinal_embs, std::span<const LabelRun> runs);

  std::size_t heads() const { return heads_; }
  std::vector<Parameter*> parameters() {
    return {&wq_, &wk_, &wv_, &wo_, &bo_, &position_, &run_, &count_token_};
  }

 private:
  std::size_t dim_;
  std::size_t heads_;
  Parameter wq_, wk_, wv_, wo_, bo_;
  Parameter position_;     // [16 x dim]
  Parameter run_;          // [16 x dim]
  Parameter count_token_;  // [dim]
};

// Everything trained during contrastive pre-training.
struct EncoderSet {
  EncoderConfig config;
  ImageEncoder image;
  TextEncoder text;
  FusionModule fusion;

  EncoderSet(const EncoderConfig& config, std::vector<std::string> lexicon);

  std::vector<Parameter*> parameters();
};

std::uint64_t lexicon_hash(std::span<const std::string> lexicon);

// Checkpoint = binary file of named tensors plus a text manifest
// (`<path>.manifest`) carrying the configuration and lexicon.
void save_checkpoint(const std::string& path, EncoderSet& model);
EncoderSet load_checkpoint(const std::string& path);

}  // namespace bp
