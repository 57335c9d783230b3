#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bridgeprompt/autodiff.hpp"
#include "bridgeprompt/encoders.hpp"
#include "bridgeprompt/prompts.hpp"
#include "bridgeprompt/random.hpp"

namespace bp {

// Cosine similarity; DegenerateInputError on a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// S[i][j] = cos(zx_i, zy_j) for row-stacked embeddings [B x d].
Tensor batch_similarity(const Tensor& zx, const Tensor& zy);
Var batch_similarity(Var zx, Var zy);

// D[A||B] = sum_ij A_ij log(A_ij / B_ij), with 0 log 0 = 0. SupportError when
// A_ij > 0 but B_ij = 0.
double generalized_kl(const Tensor& a, const Tensor& b);

// 1/2 * (D[I || rowsoftmax(S/t)] + D[I || colsoftmax(S/t)]) / B
Var channel_loss(Var similarity, double temperature);

struct LossBreakdown {
  double sem = 0.0;  // summed over run positions k
  double integrated = 0.0;
  double stat = 0.0;
  double total = 0.0;
};

// One clip ready for contrastive training.
struct ContrastiveItem {
  const FrameClip* clip = nullptr;
  std::vector<LabelRun> runs;
  PromptSet prompts;
};

ContrastiveItem make_item(const FrameClip& clip, const GestureVocabulary& vocab, PromptMode mode);

struct BatchLoss {
  Var total;
  LossBreakdown parts;
};

// All items must share one run count K and the batch needs at least two.
BatchLoss total_loss(Tape& tape, EncoderSet& model, std::span<const ContrastiveItem> batch, double temperature);

struct PretrainConfig {
  std::size_t epochs = 50;
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  double temperature = 0.07;
  std::uint64_t seed = 0;
};

struct EpochLoss {
  std::size_t epoch = 0;
  LossBreakdown mean;
};

// Groups item indices by run count and shuffles each group. Batches are then
// filled in shuffled order with up to `batch_size` items, passing over any
// item whose integrated prompt, or semantic prompt at some run position,
// already occurs in the batch; skipped items seed later batches. A batch left
// with one item takes the next item regardless, and a group's final single
// item joins its previous batch. A group of one is dropped. The batch order is
// shuffled.
std::vector<std::vector<std::size_t>> make_batches(std::span<const ContrastiveItem> items, std::size_t batch_size,
                                                   Rng& rng);

using EpochCallback = std::function<void(const EpochLoss&)>;

std::vector<EpochLoss> pretrain(EncoderSet& model, std::span<const ContrastiveItem> items,
                                const PretrainConfig& config, const EpochCallback& on_epoch = {});

// "epoch total l_sem l_int l_stat" per line, six decimals.
std::string format_loss_log(std::span<const EpochLoss> log);

}  // namespace bp
