#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bridgeprompt/autodiff.hpp"

namespace bp {

struct MsTcnConfig {
  std::size_t input_dim = 64;
  std::size_t classes = 10;
  std::size_t channels = 32;
  std::size_t generation_layers = 5;   // dual-dilated layers in the first stage
  std::size_t refinement_stages = 2;
  std::size_t refinement_layers = 5;
  std::uint64_t seed = 0;
};

// Multi-stage temporal convolutional recognizer: a dual-dilated prediction
// generation stage followed by dilated-residual refinement stages, each
// refining the softmax of the stage before it.
class MsTcn {
 public:
  explicit MsTcn(const MsTcnConfig& config);

  // features [T x input_dim] -> one [T x classes] score matrix per stage.
  std::vector<Var> forward(Tape& tape, Var features);

  const MsTcnConfig& config() const { return config_; }
  std::vector<Parameter*> parameters();

 private:
  struct Conv {
    Parameter weight;  // [out x in x 3]
    Parameter bias;
  };
  struct Dense {
    Parameter weight;  // [out x in]
    Parameter bias;
  };
  struct DualLayer {
    Conv wide;    // dilation 2^(L-1-i)
    Conv narrow;  // dilation 2^i
    Dense fuse;
  };
  struct ResidualLayer {
    Conv conv;  // dilation 2^i
    Dense mix;
  };
  struct Refinement {
    Dense in;
    std::vector<ResidualLayer> layers;
    Dense out;
  };

  Var apply(Tape& tape, Dense& d, Var x);
  Var apply(Tape& tape, Conv& c, Var x, std::size_t dilation);

  MsTcnConfig config_;
  Dense gen_in_;
  std::vector<DualLayer> gen_layers_;
  Dense gen_out_;
  std::vector<Refinement> refinements_;
};

// Sum over stages of mean per-frame cross-entropy plus
// lambda * mean(clamp((log p_t - log p_{t-1})^2, 0, threshold)).
struct RecognizerLoss {
  Var total;
  double cross_entropy = 0.0;
  double smoothing = 0.0;
};

RecognizerLoss recognizer_loss(std::span<const Var> stages, std::span<const int> labels, double lambda,
                               double threshold);

struct RecognizerTrainConfig {
  std::size_t epochs = 40;
  double learning_rate = 5e-3;
  double lambda = 0.15;
  double threshold = 16.0;
  std::uint64_t seed = 0;
};

using RecognizerEpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

// One video per optimisation step, video order reshuffled every epoch.
std::vector<double> train_recognizer(MsTcn& model, std::span<const Tensor> features,
                                     std::span<const std::vector<int>> labels, const RecognizerTrainConfig& config,
                                     const RecognizerEpochCallback& on_epoch = {});

struct Prediction {
  Tensor scores;  // final stage, [T x classes]
  std::vector<int> labels;
};

// Final-stage argmax per frame; ties go to the lower class index.
Prediction predict(MsTcn& model, const Tensor& features);
std::vector<int> argmax_rows(const Tensor& scores);

}  // namespace bp
