#pragma once

// Finite-difference checks over every differentiable building block, three
// seeded shapes each. Shared by the unit tests and the acceptance binary.

#include <array>
#include <string>
#include <vector>

#include "bridgeprompt/contrastive.hpp"
#include "bridgeprompt/encoders.hpp"
#include "bridgeprompt/mstcn.hpp"
#include "support.hpp"

namespace bptest {

struct GradCase {
  std::string op;
  std::string shape;
  double error = 0.0;
};

inline constexpr double kGradTolerance = 1e-4;

namespace detail {

inline std::string dims(const Shape& s) { return bp::shape_string(s); }

// Clip whose labels form `k` runs over 16 frames, drawn from G1..G3.
inline bp::FrameClip clip_with_runs(std::size_t k, std::size_t pixels, bp::Rng& rng, int offset) {
  bp::FrameClip clip;
  clip.video_id = "v";
  clip.stride = 1;
  clip.frames = random_tensor({bp::FrameClip::kClipLength, pixels}, rng);
  for (std::size_t i = 0; i < bp::FrameClip::kClipLength; ++i) {
    const std::size_t run = i * k / bp::FrameClip::kClipLength;
    clip.labels.push_back(bp::GestureId(static_cast<int>((run + static_cast<std::size_t>(offset)) % 3) + 1));
  }
  return clip;
}

}  // namespace detail

inline std::vector<GradCase> run_gradient_suite() {
  using namespace bp;
  std::vector<GradCase> out;
  Rng rng(2024);
  auto rt = [&](Shape s, double lo = -1.0, double hi = 1.0) { return random_tensor(std::move(s), rng, lo, hi); };
  auto add_case = [&](const std::string& op, const std::string& shape, double err) { out.push_back({op, shape, err}); };

  const std::vector<Shape> shapes = {{5}, {2, 3}, {4, 6}};
  for (const auto& s : shapes) {
    const auto d = detail::dims(s);
    add_case("add", d, check_op({rt(s), rt(s)}, [](auto& v) { return add(v[0], v[1]); }));
    add_case("sub", d, check_op({rt(s), rt(s)}, [](auto& v) { return sub(v[0], v[1]); }));
    add_case("mul", d, check_op({rt(s), rt(s)}, [](auto& v) { return mul(v[0], v[1]); }));
    add_case("scale", d, check_op({rt(s)}, [](auto& v) { return scale(v[0], -2.5); }));
    add_case("square", d, check_op({rt(s)}, [](auto& v) { return square(v[0]); }));
    add_case("relu", d, check_op({rt(s)}, [](auto& v) { return relu(v[0]); }));
    add_case("tanh", d, check_op({rt(s, -2, 2)}, [](auto& v) { return tanh(v[0]); }));
    add_case("clamp", d, check_op({rt(s, -2, 2)}, [](auto& v) { return clamp(v[0], -0.7, 0.9); }));
    add_case("sum", d, check_op({rt(s)}, [](auto& v) { return sum(v[0]); }));
    add_case("mean", d, check_op({rt(s)}, [](auto& v) { return mean(v[0]); }));
  }

  const std::vector<Shape> mats = {{1, 4}, {3, 2}, {5, 7}};
  for (const auto& s : mats) {
    const auto d = detail::dims(s);
    const std::size_t r = s[0], c = s[1];
    add_case("add_bias_rows", d, check_op({rt(s), rt({c})}, [](auto& v) { return add_bias_rows(v[0], v[1]); }));
    add_case("add_bias_cols", d, check_op({rt(s), rt({r})}, [](auto& v) { return add_bias_cols(v[0], v[1]); }));
    add_case("transpose", d, check_op({rt(s)}, [](auto& v) { return transpose(v[0]); }));
    add_case("reshape", d, check_op({rt(s)}, [c, r](auto& v) { return reshape(v[0], {c, r}); }));
    add_case("mean_pool/0", d, check_op({rt(s)}, [](auto& v) { return mean_pool(v[0], 0); }));
    add_case("mean_pool/1", d, check_op({rt(s)}, [](auto& v) { return mean_pool(v[0], 1); }));
    add_case("softmax/0", d, check_op({rt(s)}, [](auto& v) { return softmax(v[0], 0); }));
    add_case("softmax/1", d, check_op({rt(s)}, [](auto& v) { return softmax(v[0], 1, 0.3); }));
    add_case("log_softmax/0", d, check_op({rt(s)}, [](auto& v) { return log_softmax(v[0], 0, 0.5); }));
    add_case("log_softmax/1", d, check_op({rt(s)}, [](auto& v) { return log_softmax(v[0], 1, 0.07); }));
    add_case("concat/0", d, check_op({rt(s), rt({2, c})}, [](auto& v) { return concat(std::span<const Var>(v), 0); }));
    add_case("concat/1", d, check_op({rt(s), rt({r, 3})}, [](auto& v) { return concat(std::span<const Var>(v), 1); }));
    add_case("slice/0", d, check_op({rt(s)}, [r](auto& v) { return slice(v[0], 0, r / 2, r); }));
    add_case("slice/1", d, check_op({rt(s)}, [c](auto& v) { return slice(v[0], 1, 0, (c + 1) / 2); }));
    add_case("gather_rows", d, check_op({rt(s)}, [r](auto& v) {
               std::vector<std::size_t> rows = {r - 1, 0, r - 1};
               return gather_rows(v[0], rows);
             }));
    add_case("pick", d, check_op({rt(s)}, [r, c](auto& v) {
               std::vector<std::size_t> cols(r);
               for (std::size_t i = 0; i < r; ++i) cols[i] = (i * 3 + 1) % c;
               return pick(v[0], cols);
             }));
    add_case("normalize_rows", d, check_op({rt(s, 0.2, 1.0)}, [](auto& v) { return normalize_rows(v[0]); }));
  }

  const std::vector<std::array<std::size_t, 3>> mm = {{{2, 3, 4}}, {{1, 5, 1}}, {{4, 2, 6}}};
  for (const auto& [m, k, n] : mm) {
    add_case("matmul", detail::dims({m, k}) + "x" + detail::dims({k, n}),
             check_op({rt({m, k}), rt({k, n})}, [](auto& v) { return matmul(v[0], v[1]); }));
  }

  struct ConvShape {
    std::size_t cin, cout, len, dilation;
  };
  for (const auto& cs : {ConvShape{2, 3, 8, 1}, ConvShape{3, 2, 10, 2}, ConvShape{1, 2, 5, 4}}) {
    add_case("conv1d_dilated",
             detail::dims({cs.cin, cs.len}) + " d=" + std::to_string(cs.dilation),
             check_op({rt({cs.cin, cs.len}), rt({cs.cout, cs.cin, 3})},
                      [dl = cs.dilation](auto& v) { return conv1d_dilated(v[0], v[1], dl); }));
  }

  // Contrastive pieces.
  for (std::size_t b : {2, 3, 5}) {
    const auto d = detail::dims({b, b});
    add_case("batch_similarity", detail::dims({b, 4}),
             check_op({rt({b, 4}), rt({b, 4})}, [](auto& v) { return batch_similarity(v[0], v[1]); }));
    add_case("channel_loss", d, check_op({rt({b, b})}, [](auto& v) { return channel_loss(v[0], 0.07); }));
  }

  // Encoders.
  EncoderConfig ec;
  ec.height = 2;
  ec.width = 3;
  ec.hidden = 5;
  ec.dim = 4;
  ec.heads = 2;
  ec.seed = 5;
  const auto vocab = GestureVocabulary::first(3);
  EncoderSet model(ec, prompt_lexicon(vocab));
  for (std::size_t n : {1, 3, 16}) {
    auto frames = rt({n, ec.pixels()});
    add_case("image_encoder", detail::dims({n, ec.pixels()}), check_params(model.image.parameters(), [&](Tape& t) {
               Rng w(n);
               auto y = model.image.encode(t, t.constant(frames));
               return sum(mul(y, t.constant(random_tensor(y.shape(), w))));
             }));
  }
  const std::vector<std::vector<std::string>> prompt_sets = {
      {"this video contains 2 actions in total"},
      {"Firstly, the person is performing gesture 1", "this is the third action in the video"},
      {"a b c", "Secondly, the person is performing reaching for needle with right hand", "first", "unknown words"}};
  for (const auto& ps : prompt_sets) {
    add_case("text_encoder", std::to_string(ps.size()) + " prompts", check_params(model.text.parameters(), [&](Tape& t) {
               Rng w(ps.size());
               auto y = model.text.encode(t, ps);
               return sum(mul(y, t.constant(random_tensor(y.shape(), w))));
             }));
  }
  for (std::size_t k : {1, 2, 3}) {
    auto clip = detail::clip_with_runs(k, ec.pixels(), rng, 0);
    auto runs = label_runs(clip.labels);
    auto frame_embs = rt({FrameClip::kClipLength, ec.dim});
    auto ord = rt({k, ec.dim});
    std::vector<Parameter*> ps = model.fusion.parameters();
    add_case("fusion", "K=" + std::to_string(k), check_params(ps, [&](Tape& t) {
               auto f = model.fusion.fuse(t, t.constant(frame_embs), t.constant(ord), runs);
               Rng w(k);
               Var parts[] = {f.per_run, f.clip_mean, f.count};
               auto all = concat(parts, 0);
               return sum(mul(all, t.constant(random_tensor(all.shape(), w))));
             }));
  }

  // The three losses through every encoder parameter.
  struct LossShape {
    std::size_t b, k;
  };
  for (const auto& ls : {LossShape{2, 1}, LossShape{2, 2}, LossShape{3, 3}}) {
    std::vector<FrameClip> clips;
    for (std::size_t i = 0; i < ls.b; ++i) clips.push_back(detail::clip_with_runs(ls.k, ec.pixels(), rng, static_cast<int>(i)));
    std::vector<ContrastiveItem> items;
    for (const auto& c : clips) items.push_back(make_item(c, vocab, PromptMode::Text));
    const auto shape = "B=" + std::to_string(ls.b) + " K=" + std::to_string(ls.k);
    const char* names[] = {"loss_sem", "loss_int", "loss_stat"};
    for (int part = 0; part < 3; ++part) {
      add_case(names[part], shape, check_params(model.parameters(), [&](Tape& t) {
                 auto ords = model.text.encode(t, items[0].prompts.ordinals);
                 std::vector<FusionOutput> fused;
                 for (const auto& it : items) {
                   fused.push_back(model.fusion.fuse(t, model.image.encode(t, t.constant(it.clip->frames)), ords, it.runs));
                 }
                 Var total;
                 if (part == 0) {
                   for (std::size_t k = 0; k < ls.k; ++k) {
                     std::vector<Var> z;
                     std::vector<std::string> txt;
                     for (std::size_t b = 0; b < ls.b; ++b) {
                       z.push_back(slice(fused[b].per_run, 0, k, k + 1));
                       txt.push_back(items[b].prompts.semantics[k]);
                     }
                     auto l = channel_loss(batch_similarity(concat(z, 0), model.text.encode(t, txt)), 0.07);
                     total = k == 0 ? l : add(total, l);
                   }
                   return total;
                 }
                 std::vector<Var> z;
                 std::vector<std::string> txt;
                 for (std::size_t b = 0; b < ls.b; ++b) {
                   z.push_back(part == 1 ? fused[b].clip_mean : fused[b].count);
                   txt.push_back(part == 1 ? items[b].prompts.integrated : items[b].prompts.statistical);
                 }
                 return channel_loss(batch_similarity(concat(z, 0), model.text.encode(t, txt)), 0.07);
               }));
    }
    add_case("total_loss", shape, check_params(model.parameters(), [&](Tape& t) {
               return total_loss(t, model, items, 0.07).total;
             }));
  }

  // MS-TCN++ stages and the recognizer loss, w.r.t. parameters and features.
  struct TcnShape {
    std::size_t t, d, c;
  };
  for (const auto& ts : {TcnShape{8, 8, 3}, TcnShape{5, 4, 2}, TcnShape{11, 3, 4}}) {
    MsTcnConfig mc;
    mc.input_dim = ts.d;
    mc.classes = ts.c;
    mc.channels = 4;
    mc.generation_layers = 3;
    mc.refinement_stages = 2;
    mc.refinement_layers = 3;
    mc.seed = ts.t;
    MsTcn net(mc);
    auto x = rt({ts.t, ts.d});
    std::vector<int> labels(ts.t);
    for (std::size_t i = 0; i < ts.t; ++i) labels[i] = static_cast<int>((i * ts.c) / ts.t);
    const auto shape = "T=" + std::to_string(ts.t) + " d=" + std::to_string(ts.d) + " C=" + std::to_string(ts.c);
    add_case("mstcn_stages", shape, check_params(net.parameters(), [&](Tape& t) {
               auto stages = net.forward(t, t.constant(x));
               auto all = concat(stages, 1);
               Rng w(ts.t);
               return sum(mul(all, t.constant(random_tensor(all.shape(), w))));
             }));
    add_case("recognizer_loss", shape, check_params(net.parameters(), [&](Tape& t) {
               auto stages = net.forward(t, t.constant(x));
               return recognizer_loss(stages, labels, 0.15, 16.0).total;
             }));
    add_case("mstcn_input", shape, check_op({x}, [&](auto& v) {
               auto stages = net.forward(*v[0].tape(), v[0]);
               return recognizer_loss(stages, labels, 0.15, 16.0).total;
             }));
  }
  return out;
}

}  // namespace bptest
