#include "bridgeprompt/mstcn.hpp"

#include <cmath>

#include "bridgeprompt/error.hpp"
#include "bridgeprompt/optim.hpp"
#include "bridgeprompt/random.hpp"

namespace bp {

namespace {

Parameter init(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.values) v = rng.uniform(-bound, bound);
  return Parameter(name, std::move(t));
}

}  // namespace

MsTcn::MsTcn(const MsTcnConfig& config) : config_(config) {
  if (config.input_dim == 0 || config.classes == 0 || config.channels == 0 || config.generation_layers == 0) {
    throw ParameterError("MS-TCN sizes must be positive");
  }
  Rng rng(config.seed);
  const auto F = config.channels, C = config.classes;
  auto dense = [&](const std::string& name, std::size_t out, std::size_t in) {
    return Dense{init(name + ".w", {out, in}, in, rng), init(name + ".b", {out}, in, rng)};
  };
  auto conv = [&](const std::string& name, std::size_t out, std::size_t in) {
    return Conv{init(name + ".w", {out, in, 3}, in * 3, rng), init(name + ".b", {out}, in * 3, rng)};
  };
  gen_in_ = dense("gen.in", F, config.input_dim);
  for (std::size_t i = 0; i < config.generation_layers; ++i) {
    const auto p = "gen." + std::to_string(i);
    gen_layers_.push_back({conv(p + ".wide", F, F), conv(p + ".narrow", F, F), dense(p + ".fuse", F, 2 * F)});
  }
  gen_out_ = dense("gen.out", C, F);
  for (std::size_t s = 0; s < config.refinement_stages; ++s) {
    const auto p = "ref" + std::to_string(s);
    Refinement r;
    r.in = dense(p + ".in", F, C);
    for (std::size_t i = 0; i < config.refinement_layers; ++i) {
      const auto q = p + "." + std::to_string(i);
      r.layers.push_back({conv(q + ".conv", F, F), dense(q + ".mix", F, F)});
    }
    r.out = dense(p + ".out", C, F);
    refinements_.push_back(std::move(r));
  }
}

std::vector<Parameter*> MsTcn::parameters() {
  std::vector<Parameter*> out;
  auto add_dense = [&](Dense& d) {
    out.push_back(&d.weight);
    out.push_back(&d.bias);
  };
  auto add_conv = [&](Conv& c) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  };
  add_dense(gen_in_);
  for (auto& l : gen_layers_) {
    add_conv(l.wide);
    add_conv(l.narrow);
    add_dense(l.fuse);
  }
  add_dense(gen_out_);
  for (auto& r : refinements_) {
    add_dense(r.in);
    for (auto& l : r.layers) {
      add_conv(l.conv);
      add_dense(l.mix);
    }
    add_dense(r.out);
  }
  return out;
}

Var MsTcn::apply(Tape& tape, Dense& d, Var x) {
  return add_bias_cols(matmul(tape.parameter(d.weight), x), tape.parameter(d.bias));
}

Var MsTcn::apply(Tape& tape, Conv& c, Var x, std::size_t dilation) {
  return add_bias_cols(conv1d_dilated(x, tape.parameter(c.weight), dilation), tape.parameter(c.bias));
}

std::vector<Var> MsTcn::forward(Tape& tape, Var features) {
  const auto& shape = features.shape();
  if (shape.size() != 2 || shape[1] != config_.input_dim) {
    throw DimensionError("MS-TCN expects [T x " + std::to_string(config_.input_dim) + "] features, got " +
                         shape_string(shape));
  }
  if (shape[0] == 0) throw DimensionError("MS-TCN needs at least one frame");
  const std::size_t L = config_.generation_layers;

  auto f = apply(tape, gen_in_, transpose(features));  // [F x T]
  for (std::size_t i = 0; i < L; ++i) {
    auto& layer = gen_layers_[i];
    Var branches[] = {apply(tape, layer.wide, f, std::size_t{1} << (L - 1 - i)),
                      apply(tape, layer.narrow, f, std::size_t{1} << i)};
    f = add(f, relu(apply(tape, layer.fuse, concat(branches, 0))));
  }
  auto scores = apply(tape, gen_out_, f);  // [C x T]
  std::vector<Var> stages{transpose(scores)};
  for (auto& r : refinements_) {
    auto g = apply(tape, r.in, softmax(scores, 0));
    for (std::size_t i = 0; i < r.layers.size(); ++i) {
      auto& layer = r.layers[i];
      g = add(g, apply(tape, layer.mix, relu(apply(tape, layer.conv, g, std::size_t{1} << i))));
    }
    scores = apply(tape, r.out, g);
    stages.push_back(transpose(scores));
  }
  return stages;
}

RecognizerLoss recognizer_loss(std::span<const Var> stages, std::span<const int> labels, double lambda,
                               double threshold) {
  if (stages.empty()) throw ContractError("recognizer_loss: no stages");
  const std::size_t T = stages[0].dim(0), C = stages[0].dim(1);
  if (labels.size() != T) throw DimensionError("recognizer_loss: one label per frame required");
  std::vector<std::size_t> targets(T);
  for (std::size_t t = 0; t < T; ++t) {
    if (labels[t] < 0 || static_cast<std::size_t>(labels[t]) >= C) {
      throw DataError("label " + std::to_string(labels[t]) + " outside 0.." + std::to_string(C - 1));
    }
    targets[t] = static_cast<std::size_t>(labels[t]);
  }
  RecognizerLoss out;
  Var total;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    auto logp = log_softmax(stages[s], 1);
    auto ce = scale(mean(pick(logp, targets)), -1.0);
    out.cross_entropy += ce.item();
    auto stage_loss = ce;
    if (T > 1 && lambda != 0.0) {
      auto diff = sub(slice(logp, 0, 1, T), slice(logp, 0, 0, T - 1));
      auto smooth = mean(clamp(square(diff), 0.0, threshold));
      out.smoothing += smooth.item();
      stage_loss = add(stage_loss, scale(smooth, lambda));
    }
    total = s == 0 ? stage_loss : add(total, stage_loss);
  }
  out.total = total;
  return out;
}

std::vector<double> train_recognizer(MsTcn& model, std::span<const Tensor> features,
                                     std::span<const std::vector<int>> labels, const RecognizerTrainConfig& config,
                                     const RecognizerEpochCallback& on_epoch) {
  if (features.empty()) throw ConfigError("train_recognizer: empty training set");
  if (features.size() != labels.size()) throw DimensionError("train_recognizer: features and labels differ in count");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (features[i].rank() != 2 || features[i].dim(0) != labels[i].size()) {
      throw DimensionError("train_recognizer: video " + std::to_string(i) + " has mismatched frames and labels");
    }
    for (int l : labels[i]) {
      if (l < 0 || static_cast<std::size_t>(l) >= model.config().classes) {
        throw DataError("train_recognizer: label " + std::to_string(l) + " outside the class range");
      }
    }
  }
  Rng rng(config.seed);
  AdamOptions opts;
  opts.learning_rate = config.learning_rate;
  Adam adam(model.parameters(), opts);
  std::vector<std::size_t> order(features.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (auto i : order) {
      adam.zero_grad();
      Tape tape;
      try {
        auto stages = model.forward(tape, tape.constant(features[i]));
        auto loss = recognizer_loss(stages, labels[i], config.lambda, config.threshold);
        total += loss.total.item();
        tape.backward(loss.total);
      } catch (const DivergenceError& e) {
        throw DivergenceError("recognizer training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      adam.step();
    }
    history.push_back(total / static_cast<double>(order.size()));
    if (on_epoch) on_epoch(epoch, history.back());
  }
  return history;
}

std::vector<int> argmax_rows(const Tensor& scores) {
  if (scores.rank() != 2) throw DimensionError("argmax_rows expects a matrix");
  const std::size_t T = scores.dim(0), C = scores.dim(1);
  std::vector<int> out(T, 0);
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c)
      if (scores(t, c) > scores(t, best)) best = c;
    out[t] = static_cast<int>(best);
  }
  return out;
}

Prediction predict(MsTcn& model, const Tensor& features) {
  Tape tape;
  auto stages = model.forward(tape, tape.constant(features));
  Prediction p;
  p.scores = stages.back().value();
  p.labels = argmax_rows(p.scores);
  return p;
}

}  // namespace bp
