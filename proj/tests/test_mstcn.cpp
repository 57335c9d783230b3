#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bridgeprompt/error.hpp"
#include "bridgeprompt/mstcn.hpp"
#include "gradient_suite.hpp"
#include "support.hpp"

using namespace bp;

namespace {

MsTcnConfig small_config(std::size_t d = 6, std::size_t C = 4) {
  MsTcnConfig c;
  c.input_dim = d;
  c.classes = C;
  c.channels = 8;
  c.generation_layers = 2;
  c.refinement_stages = 1;
  c.refinement_layers = 2;
  c.seed = 3;
  return c;
}

std::vector<double> log_softmax_row(const Tensor& s, std::size_t t) {
  const std::size_t C = s.dim(1);
  double m = s(t, 0);
  for (std::size_t c = 1; c < C; ++c) m = std::max(m, s(t, c));
  double z = 0.0;
  for (std::size_t c = 0; c < C; ++c) z += std::exp(s(t, c) - m);
  std::vector<double> out(C);
  for (std::size_t c = 0; c < C; ++c) out[c] = s(t, c) - m - std::log(z);
  return out;
}

// Piecewise-constant labels with class-mean features buried in noise.
void noisy_video(std::size_t T, std::size_t d, std::size_t C, Rng& rng, Tensor& features, std::vector<int>& labels) {
  features = Tensor::zeros({T, d});
  labels.assign(T, 0);
  std::size_t t = 0;
  int cls = 0;
  while (t < T) {
    const auto len = static_cast<std::size_t>(rng.uniform_int(15, 40));
    for (std::size_t i = t; i < std::min(T, t + len); ++i) labels[i] = cls;
    t += len;
    cls = (cls + 1 + static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(C) - 2))) % static_cast<int>(C);
  }
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t c = 0; c < d; ++c)
      features(i, c) = (c == static_cast<std::size_t>(labels[i]) % d ? 1.0 : 0.0) + 1.2 * rng.normal();
}

std::size_t transitions(const std::vector<int>& s) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < s.size(); ++i) n += s[i] != s[i - 1];
  return n;
}

}  // namespace

TEST_CASE("every stage outputs T x C") {
  auto cfg = small_config();
  MsTcn model(cfg);
  Rng rng(1);
  for (std::size_t T : {1, 7, 16, 300}) {
    Tape tape;
    auto stages = model.forward(tape, tape.constant(bptest::random_tensor({T, 6}, rng)));
    REQUIRE(stages.size() == cfg.refinement_stages + 1);
    for (const auto& s : stages) CHECK(s.shape() == Shape{T, 4});
  }
  MsTcnConfig deep = small_config();
  deep.refinement_stages = 3;
  MsTcn m3(deep);
  Tape tape;
  CHECK(m3.forward(tape, tape.constant(Tensor::zeros({5, 6}))).size() == 4);
}

TEST_CASE("constant input gives constant interior scores") {
  MsTcn model(small_config());
  Tensor x = Tensor::zeros({64, 6});
  for (std::size_t t = 0; t < 64; ++t)
    for (std::size_t c = 0; c < 6; ++c) x(t, c) = 0.1 * static_cast<double>(c) - 0.2;
  Tape tape;
  auto stages = model.forward(tape, tape.constant(x));
  // Receptive radius: generation layers reach 2 + 2 frames, refinement 1 + 2.
  const std::size_t radius = 7;
  for (const auto& s : stages) {
    const auto& v = s.value();
    for (std::size_t t = radius; t + radius < 64; ++t)
      for (std::size_t c = 0; c < 4; ++c) CHECK(v(t, c) == doctest::Approx(v(radius, c)).epsilon(1e-12));
  }
}

TEST_CASE("width mismatch and bad labels") {
  MsTcn model(small_config());
  Tape tape;
  CHECK_THROWS_AS(model.forward(tape, tape.constant(Tensor::zeros({5, 7}))), DimensionError);
  CHECK_THROWS_AS(model.forward(tape, tape.constant(Tensor::zeros({0, 6}))), DimensionError);
  auto stages = model.forward(tape, tape.constant(Tensor::zeros({3, 6})));
  std::vector<int> bad = {0, 4, 1};
  CHECK_THROWS_AS(recognizer_loss(stages, bad, 0.15, 16.0), DataError);
  std::vector<Tensor> feats = {Tensor::zeros({3, 6})};
  std::vector<std::vector<int>> labels = {{0, -1, 1}};
  RecognizerTrainConfig rc;
  rc.epochs = 1;
  CHECK_THROWS_AS(train_recognizer(model, feats, labels, rc), DataError);
  labels = {{0, 1}};
  CHECK_THROWS_AS(train_recognizer(model, feats, labels, rc), DimensionError);
  feats.clear();
  labels.clear();
  CHECK_THROWS_AS(train_recognizer(model, feats, labels, rc), ConfigError);
}

TEST_CASE("loss decomposition against a direct recomputation") {
  MsTcn model(small_config());
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto T = static_cast<std::size_t>(rng.uniform_int(1, 20));
    std::vector<int> labels(T);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, 3));
    Tape tape;
    auto stages = model.forward(tape, tape.constant(bptest::random_tensor({T, 6}, rng, -3.0, 3.0)));
    double ce = 0.0, smooth = 0.0;
    const double threshold = 0.05;
    for (const auto& s : stages) {
      double stage_ce = 0.0, stage_smooth = 0.0;
      std::vector<double> prev;
      for (std::size_t t = 0; t < T; ++t) {
        auto lp = log_softmax_row(s.value(), t);
        stage_ce -= lp[static_cast<std::size_t>(labels[t])];
        if (t > 0)
          for (std::size_t c = 0; c < 4; ++c) stage_smooth += std::min(threshold, std::pow(lp[c] - prev[c], 2));
        prev = lp;
      }
      ce += stage_ce / static_cast<double>(T);
      if (T > 1) smooth += stage_smooth / static_cast<double>((T - 1) * 4);
    }
    auto pure = recognizer_loss(stages, labels, 0.0, threshold);
    CHECK(pure.total.item() == doctest::Approx(ce).epsilon(1e-12));
    CHECK(pure.cross_entropy == doctest::Approx(ce).epsilon(1e-12));
    auto full = recognizer_loss(stages, labels, 0.7, threshold);
    CHECK(full.smoothing == doctest::Approx(smooth).epsilon(1e-12));
    CHECK(full.smoothing >= 0.0);
    CHECK(full.total.item() == doctest::Approx(ce + 0.7 * smooth).epsilon(1e-12));
  }
}

TEST_CASE("smoothing is zero for identical consecutive frames") {
  Tape tape;
  Tensor s({4, 3}, {1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3});
  auto v = tape.constant(s);
  std::vector<Var> stages = {v, v};
  std::vector<int> labels = {0, 1, 2, 0};
  CHECK(recognizer_loss(stages, labels, 1.0, 16.0).smoothing == 0.0);
}

TEST_CASE("recognizer gradients pass finite differences") {
  for (const auto& c : bptest::run_gradient_suite()) {
    if (c.op.rfind("mstcn", 0) != 0 && c.op != "recognizer_loss" && c.op != "conv1d_dilated") continue;
    CAPTURE(c.op);
    CAPTURE(c.shape);
    CHECK(c.error < bptest::kGradTolerance);
  }
}

TEST_CASE("argmax and tie rule") {
  Tensor s({3, 3}, {0.1, 0.9, 0.3, 2.0, -1.0, 0.0, 0.5, 0.7, 0.7});
  CHECK(argmax_rows(s) == std::vector<int>{1, 0, 1});
  Tensor tie({1, 2}, {4.0, 4.0});
  CHECK(argmax_rows(tie) == std::vector<int>{0});
}

TEST_CASE("constant-label video is learned exactly") {
  MsTcn model(small_config());
  Rng rng(9);
  std::vector<Tensor> feats = {bptest::random_tensor({40, 6}, rng)};
  std::vector<std::vector<int>> labels = {std::vector<int>(40, 2)};
  RecognizerTrainConfig rc;
  rc.epochs = 30;
  rc.learning_rate = 1e-2;
  auto history = train_recognizer(model, feats, labels, rc);
  CHECK(history.back() < history.front());
  CHECK(predict(model, feats[0]).labels == labels[0]);
}

TEST_CASE("training is deterministic per seed") {
  Rng rng(10);
  std::vector<Tensor> feats(3);
  std::vector<std::vector<int>> labels(3);
  for (std::size_t v = 0; v < 3; ++v) noisy_video(60, 6, 4, rng, feats[v], labels[v]);
  RecognizerTrainConfig rc;
  rc.epochs = 3;
  rc.seed = 4;
  MsTcn a(small_config()), b(small_config());
  CHECK(train_recognizer(a, feats, labels, rc) == train_recognizer(b, feats, labels, rc));
  auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("learning a separable sequence and the smoothing tendency") {
  Rng rng(12);
  std::vector<Tensor> feats(4);
  std::vector<std::vector<int>> labels(4);
  for (std::size_t v = 0; v < 4; ++v) noisy_video(200, 6, 4, rng, feats[v], labels[v]);
  Tensor val_x;
  std::vector<int> val_y;
  noisy_video(200, 6, 4, rng, val_x, val_y);

  std::vector<std::size_t> counts;
  for (double lambda : {0.0, 0.15, 1.0}) {
    MsTcnConfig cfg = small_config();
    cfg.channels = 12;
    cfg.generation_layers = 4;
    cfg.refinement_layers = 4;
    MsTcn model(cfg);
    RecognizerTrainConfig rc;
    rc.epochs = 25;
    rc.learning_rate = 5e-3;
    rc.lambda = lambda;
    rc.seed = 1;
    train_recognizer(model, feats, labels, rc);
    auto train_pred = predict(model, feats[0]).labels;
    std::size_t hits = 0;
    for (std::size_t t = 0; t < 200; ++t) hits += train_pred[t] == labels[0][t];
    CHECK(static_cast<double>(hits) / 200.0 >= 0.9);
    counts.push_back(transitions(predict(model, val_x).labels));
  }
  MESSAGE("transitions at lambda 0, 0.15, 1: " << counts[0] << " " << counts[1] << " " << counts[2]);
  CAPTURE(counts[0]);
  CAPTURE(counts[1]);
  CAPTURE(counts[2]);
  CHECK(counts[1] <= counts[0]);
  CHECK(counts[2] <= counts[1]);
}
