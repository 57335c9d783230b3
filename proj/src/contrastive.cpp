#include "bridgeprompt/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "bridgeprompt/error.hpp"
#include "bridgeprompt/optim.hpp"
#include "bridgeprompt/random.hpp"

namespace bp {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: vector lengths differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine_similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

Tensor batch_similarity(const Tensor& zx, const Tensor& zy) {
  if (zx.rank() != 2 || zy.rank() != 2 || zx.shape != zy.shape) {
    throw DimensionError("batch_similarity: need two [B x d] matrices of equal shape");
  }
  const std::size_t B = zx.dim(0), d = zx.dim(1);
  Tensor s = Tensor::zeros({B, B});
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < B; ++j)
      s(i, j) = cosine_similarity({&zx.values[i * d], d}, {&zy.values[j * d], d});
  return s;
}

Var batch_similarity(Var zx, Var zy) {
  if (zx.shape().size() != 2 || zx.shape() != zy.shape()) {
    throw DimensionError("batch_similarity: need two [B x d] matrices of equal shape");
  }
  return matmul(normalize_rows(zx), transpose(normalize_rows(zy)));
}

double generalized_kl(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) throw DimensionError("generalized_kl: matrix shapes differ");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double p = a.values[i], q = b.values[i];
    if (p < 0.0 || q < 0.0) throw SupportError("generalized_kl: negative entry");
    if (p == 0.0) continue;
    if (q == 0.0) throw SupportError("generalized_kl: A has mass where B is zero at entry " + std::to_string(i));
    total += p * std::log(p / q);
  }
  return total;
}

Var channel_loss(Var similarity, double temperature) {
  const auto& shape = similarity.shape();
  if (shape.size() != 2 || shape[0] != shape[1]) {
    throw DimensionError("channel_loss: similarity matrix must be square, got " + shape_string(shape));
  }
  const std::size_t B = shape[0];
  if (B == 0) throw DimensionError("channel_loss: empty similarity matrix");
  std::vector<std::size_t> diag(B);
  for (std::size_t i = 0; i < B; ++i) diag[i] = i;
  // D[I || P] reduces to -sum_i log P_ii.
  auto text_wise = sum(pick(log_softmax(similarity, 1, temperature), diag));
  auto clip_wise = sum(pick(transpose(log_softmax(similarity, 0, temperature)), diag));
  return scale(add(text_wise, clip_wise), -0.5 / static_cast<double>(B));
}

ContrastiveItem make_item(const FrameClip& clip, const GestureVocabulary& vocab, PromptMode mode) {
  ContrastiveItem item;
  item.clip = &clip;
  item.runs = label_runs(clip.labels);
  item.prompts = build_prompts(item.runs, vocab, mode);
  return item;
}

BatchLoss total_loss(Tape& tape, EncoderSet& model, std::span<const ContrastiveItem> batch, double temperature) {
  constexpr std::size_t L = FrameClip::kClipLength;
  const std::size_t B = batch.size();
  if (B < 2) throw ContractError("total_loss: contrastive batches need at least two clips");
  const std::size_t K = batch[0].runs.size();
  for (const auto& item : batch) {
    if (item.runs.size() != K) throw ContractError("total_loss: clips in a batch must share their run count");
    if (item.prompts.run_count() != K) throw ContractError("total_loss: prompts do not match the clip's runs");
  }
  const std::size_t pixels = batch[0].clip->frames.dim(1);

  Tensor frames = Tensor::zeros({B * L, pixels});
  for (std::size_t b = 0; b < B; ++b) {
    if (batch[b].clip->frames.shape != Shape{L, pixels}) throw DimensionError("total_loss: clip frame shape differs");
    std::copy(batch[b].clip->frames.values.begin(), batch[b].clip->frames.values.end(),
              frames.values.begin() + static_cast<std::ptrdiff_t>(b * L * pixels));
  }
  auto frame_embs = model.image.encode(tape, tape.constant(std::move(frames)));

  // The ordinal prompts depend only on K, so one encoding serves the batch.
  auto ordinal_embs = model.text.encode(tape, batch[0].prompts.ordinals);

  std::vector<std::vector<Var>> per_run(K);
  std::vector<Var> clip_means, counts;
  for (std::size_t b = 0; b < B; ++b) {
    auto out = model.fusion.fuse(tape, slice(frame_embs, 0, b * L, (b + 1) * L), ordinal_embs, batch[b].runs);
    for (std::size_t k = 0; k < K; ++k) per_run[k].push_back(slice(out.per_run, 0, k, k + 1));
    clip_means.push_back(out.clip_mean);
    counts.push_back(out.count);
  }

  std::vector<std::string> texts;
  BatchLoss result;
  Var sem_total;
  for (std::size_t k = 0; k < K; ++k) {
    texts.clear();
    for (const auto& item : batch) texts.push_back(item.prompts.semantics[k]);
    auto loss_k = channel_loss(batch_similarity(concat(per_run[k], 0), model.text.encode(tape, texts)), temperature);
    sem_total = k == 0 ? loss_k : add(sem_total, loss_k);
  }
  texts.clear();
  for (const auto& item : batch) texts.push_back(item.prompts.integrated);
  auto int_loss = channel_loss(batch_similarity(concat(clip_means, 0), model.text.encode(tape, texts)), temperature);
  texts.clear();
  for (const auto& item : batch) texts.push_back(item.prompts.statistical);
  auto stat_loss = channel_loss(batch_similarity(concat(counts, 0), model.text.encode(tape, texts)), temperature);

  result.total = add(add(sem_total, int_loss), stat_loss);
  result.parts.sem = sem_total.item();
  result.parts.integrated = int_loss.item();
  result.parts.stat = stat_loss.item();
  result.parts.total = result.total.item();
  return result;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const ContrastiveItem> items, std::size_t batch_size,
                                                   Rng& rng) {
  if (batch_size < 2) throw ParameterError("contrastive batch size must be at least 2");
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < items.size(); ++i) groups[items[i].runs.size()].push_back(i);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [k, members] : groups) {
    if (members.size() < 2) continue;
    rng.shuffle(members);
    std::vector<std::size_t> pool = members;
    const std::size_t first = batches.size();
    while (!pool.empty()) {
      std::vector<std::size_t> batch;
      std::set<std::string> used;  // "<position>|<prompt>" keys already in the batch
      auto keys = [&](std::size_t i) {
        std::vector<std::string> out{"int|" + items[i].prompts.integrated};
        for (std::size_t r = 0; r < k; ++r) out.push_back(std::to_string(r) + "|" + items[i].prompts.semantics[r]);
        return out;
      };
      for (auto it = pool.begin(); it != pool.end() && batch.size() < batch_size;) {
        const auto ks = keys(*it);
        if (std::none_of(ks.begin(), ks.end(), [&](const std::string& key) { return used.count(key) > 0; })) {
          used.insert(ks.begin(), ks.end());
          batch.push_back(*it);
          it = pool.erase(it);
        } else {
          ++it;
        }
      }
      if (batch.size() == 1 && !pool.empty()) {
        batch.push_back(pool.front());
        pool.erase(pool.begin());
      }
      if (batch.size() == 1 && batches.size() > first) {
        batches.back().push_back(batch[0]);
      } else {
        batches.push_back(std::move(batch));
      }
    }
  }
  rng.shuffle(batches);
  return batches;
}

std::vector<EpochLoss> pretrain(EncoderSet& model, std::span<const ContrastiveItem> items,
                                const PretrainConfig& config, const EpochCallback& on_epoch) {
  if (items.empty()) throw ConfigError("pretrain: no clips to train on");
  if (!(config.temperature > 0.0)) throw ParameterError("pretrain: temperature must be positive");
  Rng rng(config.seed);
  AdamOptions opts;
  opts.learning_rate = config.learning_rate;
  Adam adam(model.parameters(), opts);
  std::vector<EpochLoss> log;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(items, config.batch_size, rng);
    if (batches.empty()) throw ConfigError("pretrain: no run-count group holds two or more clips");
    EpochLoss record;
    record.epoch = epoch;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<ContrastiveItem> batch;
      for (auto i : batches[bi]) batch.push_back(items[i]);
      adam.zero_grad();
      Tape tape;
      BatchLoss loss;
      try {
        loss = total_loss(tape, model, batch, config.temperature);
        tape.backward(loss.total);
      } catch (const DivergenceError& e) {
        throw DivergenceError("pretrain diverged at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(bi + 1) + ": " + e.what());
      }
      adam.step();
      record.mean.sem += loss.parts.sem;
      record.mean.integrated += loss.parts.integrated;
      record.mean.stat += loss.parts.stat;
      record.mean.total += loss.parts.total;
    }
    const double n = static_cast<double>(batches.size());
    record.mean.sem /= n;
    record.mean.integrated /= n;
    record.mean.stat /= n;
    record.mean.total /= n;
    log.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return log;
}

std::string format_loss_log(std::span<const EpochLoss> log) {
  std::string out;
  char line[160];
  for (const auto& e : log) {
    std::snprintf(line, sizeof line, "%zu %.6f %.6f %.6f %.6f\n", e.epoch, e.mean.total, e.mean.sem,
                  e.mean.integrated, e.mean.stat);
    out += line;
  }
  return out;
}

}  // namespace bp
