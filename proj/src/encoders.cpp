#include "bridgeprompt/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "bridgeprompt/error.hpp"
#include "bridgeprompt/prompts.hpp"
#include "bridgeprompt/random.hpp"

namespace bp {

namespace {

Tensor random_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values) v = stddev * rng.normal();
  return t;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

// ---- ImageEncoder ------------------------------------------------------------

ImageEncoder::ImageEncoder(const EncoderConfig& config, std::uint64_t seed)
    : pixels_(config.pixels()), dim_(config.dim) {
  if (pixels_ == 0 || config.hidden == 0 || dim_ == 0) throw ParameterError("image encoder sizes must be positive");
  Rng rng(seed);
  const auto h = config.hidden;
  w1_ = Parameter("image.w1", random_tensor({pixels_, h}, 1.0 / std::sqrt(static_cast<double>(pixels_)), rng));
  b1_ = Parameter("image.b1", Tensor::zeros({h}));
  w2_ = Parameter("image.w2", random_tensor({h, dim_}, 1.0 / std::sqrt(static_cast<double>(h)), rng));
  b2_ = Parameter("image.b2", Tensor::zeros({dim_}));
}

Var ImageEncoder::encode(Tape& tape, Var frames) {
  if (frames.shape().size() != 2 || frames.dim(1) != pixels_) {
    throw DimensionError("image encoder expects [n x " + std::to_string(pixels_) + "] frames, got " +
                         shape_string(frames.shape()));
  }
  auto hidden = tanh(add_bias_rows(matmul(frames, tape.parameter(w1_)), tape.parameter(b1_)));
  return add_bias_rows(matmul(hidden, tape.parameter(w2_)), tape.parameter(b2_));
}

Var ImageEncoder::encode_frames(Tape& tape, const FrameClip& clip) {
  return encode(tape, tape.constant(clip.frames));
}

Tensor ImageEncoder::embed(const Tensor& frames) const {
  if (frames.rank() != 2 || frames.dim(1) != pixels_) {
    throw DimensionError("image encoder expects [T x " + std::to_string(pixels_) + "] frames, got " +
                         shape_string(frames.shape));
  }
  const std::size_t n = frames.dim(0), h = b1_.value.size();
  Tensor out = Tensor::zeros({n, dim_});
  std::vector<double> hidden(h);
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = &frames.values[r * pixels_];
    std::copy(b1_.value.values.begin(), b1_.value.values.end(), hidden.begin());
    for (std::size_t p = 0; p < pixels_; ++p) {
      const double xv = x[p];
      const double* w = &w1_.value.values[p * h];
      for (std::size_t j = 0; j < h; ++j) hidden[j] += xv * w[j];
    }
    double* o = &out.values[r * dim_];
    std::copy(b2_.value.values.begin(), b2_.value.values.end(), o);
    for (std::size_t j = 0; j < h; ++j) {
      const double a = std::tanh(hidden[j]);
      const double* w = &w2_.value.values[j * dim_];
      for (std::size_t k = 0; k < dim_; ++k) o[k] += a * w[k];
    }
  }
  return out;
}

// ---- TextEncoder -------------------------------------------------------------

TextEncoder::TextEncoder(std::vector<std::string> lexicon, std::size_t dim, std::uint64_t seed)
    : dim_(dim) {
  std::sort(lexicon.begin(), lexicon.end());
  lexicon.erase(std::unique(lexicon.begin(), lexicon.end()), lexicon.end());
  lexicon_.push_back("<unk>");
  for (auto& w : lexicon)
    if (w != "<unk>") lexicon_.push_back(std::move(w));
  Rng rng(seed);
  table_ = Parameter("text.table", random_tensor({lexicon_.size(), dim_}, 1.0, rng));
  proj_ = Parameter("text.proj", random_tensor({dim_, dim_}, 1.0 / std::sqrt(static_cast<double>(dim_)), rng));
  bias_ = Parameter("text.bias", Tensor::zeros({dim_}));
}

std::size_t TextEncoder::token_id(const std::string& word) const {
  const auto it = std::lower_bound(lexicon_.begin() + 1, lexicon_.end(), word);
  if (it != lexicon_.end() && *it == word) return static_cast<std::size_t>(it - lexicon_.begin());
  return 0;
}

std::vector<std::size_t> TextEncoder::token_ids(std::string_view prompt) const {
  std::vector<std::size_t> ids;
  for (const auto& w : tokenize(prompt)) ids.push_back(token_id(w));
  return ids;
}

Var TextEncoder::encode(Tape& tape, std::span<const std::string> prompts) {
  if (prompts.empty()) throw ContractError("encode_text: no prompts");
  const std::size_t V = lexicon_.size();
  Tensor averaging = Tensor::zeros({prompts.size(), V});
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto ids = token_ids(prompts[i]);
    if (ids.empty()) throw ContractError("encode_text: empty prompt");
    for (auto id : ids) averaging.values[i * V + id] += 1.0 / static_cast<double>(ids.size());
  }
  auto pooled = matmul(tape.constant(std::move(averaging)), tape.parameter(table_));
  return add_bias_rows(matmul(pooled, tape.parameter(proj_)), tape.parameter(bias_));
}

Var TextEncoder::encode_text(Tape& tape, const std::string& prompt) {
  return encode(tape, std::span<const std::string>(&prompt, 1));
}

// ---- FusionModule ------------------------------------------------------------

FusionModule::FusionModule(std::size_t dim, std::size_t heads, std::uint64_t seed) : dim_(dim), heads_(heads) {
  if (heads == 0 || dim % heads != 0) throw ParameterError("fusion heads must divide the embedding dimension");
  Rng rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  wq_ = Parameter("fusion.wq", random_tensor({dim, dim}, s, rng));
  wk_ = Parameter("fusion.wk", random_tensor({dim, dim}, s, rng));
  wv_ = Parameter("fusion.wv", random_tensor({dim, dim}, s, rng));
  wo_ = Parameter("fusion.wo", random_tensor({dim, dim}, s, rng));
  bo_ = Parameter("fusion.bo", Tensor::zeros({dim}));
  position_ = Parameter("fusion.position", random_tensor({FrameClip::kClipLength, dim}, 0.1, rng));
  run_ = Parameter("fusion.run", random_tensor({FrameClip::kClipLength, dim}, 0.1, rng));
  count_token_ = Parameter("fusion.count", random_tensor({dim}, 0.1, rng));
}

FusionOutput FusionModule::fuse(Tape& tape, Var frame_embs, Var ordinal_embs, std::span<const LabelRun> runs) {
  constexpr std::size_t L = FrameClip::kClipLength;
  const std::size_t K = runs.size();
  if (K == 0) throw ContractError("fuse: clip has no label runs");
  if (frame_embs.shape() != Shape{L, dim_}) {
    throw DimensionError("fuse: frame embeddings must be [16 x " + std::to_string(dim_) + "]");
  }
  if (ordinal_embs.shape() != Shape{K, dim_}) {
    throw DimensionError("fuse: need one ordinal embedding per run");
  }
  if (runs.front().first != 0 || runs.back().last != L - 1) {
    throw ContractError("fuse: runs must cover the 16 clip positions");
  }

  std::vector<std::size_t> positions(L), membership(L), ordinals(K);
  for (std::size_t i = 0; i < L; ++i) positions[i] = i;
  for (std::size_t k = 0; k < K; ++k) {
    ordinals[k] = k;
    for (std::size_t f = runs[k].first; f <= runs[k].last; ++f) membership[f] = k;
  }
  auto run_table = tape.parameter(run_);
  auto frames = add(add(frame_embs, gather_rows(tape.parameter(position_), positions)),
                    gather_rows(run_table, membership));
  auto ords = add(ordinal_embs, gather_rows(run_table, ordinals));
  auto count = reshape(tape.parameter(count_token_), {1, dim_});
  Var rows[] = {frames, ords, count};
  auto x = concat(rows, 0);

  const std::size_t dh = dim_ / heads_;
  auto q = matmul(x, tape.parameter(wq_));
  auto k = matmul(x, tape.parameter(wk_));
  auto v = matmul(x, tape.parameter(wv_));
  std::vector<Var> heads;
  for (std::size_t h = 0; h < heads_; ++h) {
    auto qh = slice(q, 1, h * dh, (h + 1) * dh);
    auto kh = slice(k, 1, h * dh, (h + 1) * dh);
    auto vh = slice(v, 1, h * dh, (h + 1) * dh);
    auto attn = softmax(scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh))), 1);
    heads.push_back(matmul(attn, vh));
  }
  auto mixed = add_bias_rows(matmul(concat(heads, 1), tape.parameter(wo_)), tape.parameter(bo_));
  auto y = add(x, mixed);

  std::vector<Var> per_run;
  for (const auto& r : runs) per_run.push_back(reshape(mean_pool(slice(y, 0, r.first, r.last + 1), 0), {1, dim_}));
  FusionOutput out;
  out.per_run = concat(per_run, 0);
  out.clip_mean = reshape(mean_pool(out.per_run, 0), {1, dim_});
  out.count = slice(y, 0, L + K, L + K + 1);
  return out;
}

// ---- EncoderSet & checkpoints ------------------------------------------------------

EncoderSet::EncoderSet(const EncoderConfig& cfg, std::vector<std::string> lexicon)
    : config(cfg),
      image(cfg, mix_seed(cfg.seed, 1)),
      text(std::move(lexicon), cfg.dim, mix_seed(cfg.seed, 2)),
      fusion(cfg.dim, cfg.heads, mix_seed(cfg.seed, 3)) {}

std::vector<Parameter*> EncoderSet::parameters() {
  std::vector<Parameter*> all;
  for (auto* p : image.parameters()) all.push_back(p);
  for (auto* p : text.parameters()) all.push_back(p);
  for (auto* p : fusion.parameters()) all.push_back(p);
  return all;
}

std::uint64_t lexicon_hash(std::span<const std::string> lexicon) {
  // FNV-1a over newline-joined words.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& w : lexicon) {
    for (unsigned char c : w) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

constexpr char kMagic[8] = {'B', 'P', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError(path + ": truncated checkpoint");
  return v;
}

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void save_checkpoint(const std::string& path, EncoderSet& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  const auto params = model.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rank()));
    for (auto d : p->value.shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(p->value.values.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw IoError("short write to " + path);

  const auto& lex = model.text.lexicon();
  const std::vector<std::string> words(lex.begin() + 1, lex.end());
  std::ostringstream m;
  m << "version " << kVersion << "\n"
    << "dim " << model.config.dim << "\n"
    << "height " << model.config.height << "\n"
    << "width " << model.config.width << "\n"
    << "hidden " << model.config.hidden << "\n"
    << "heads " << model.config.heads << "\n"
    << "seed " << model.config.seed << "\n"
    << "lexicon_size " << words.size() << "\n"
    << "lexicon_hash " << hex(lexicon_hash(words)) << "\n"
    << "lexicon";
  for (const auto& w : words) m << " " << w;
  m << "\n";
  write_text_file(path + ".manifest", m.str());
}

EncoderSet load_checkpoint(const std::string& path) {
  const auto manifest = read_text_file(path + ".manifest");
  std::map<std::string, std::string> fields;
  std::vector<std::string> lexicon;
  std::istringstream ms(manifest);
  std::string line;
  while (std::getline(ms, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "lexicon") {
      std::string w;
      while (ls >> w) lexicon.push_back(w);
    } else if (!key.empty()) {
      std::string value;
      ls >> value;
      fields[key] = value;
    }
  }
  auto field = [&](const char* key) -> std::size_t {
    const auto it = fields.find(key);
    if (it == fields.end()) throw DataError(path + ".manifest: missing '" + key + "'");
    try {
      return static_cast<std::size_t>(std::stoull(it->second));
    } catch (const std::exception&) {
      throw DataError(path + ".manifest: bad value for '" + key + "'");
    }
  };
  if (field("version") != kVersion) throw DataError(path + ": unsupported checkpoint version");
  if (field("lexicon_size") != lexicon.size() || fields["lexicon_hash"] != hex(lexicon_hash(lexicon))) {
    throw DataError(path + ".manifest: lexicon does not match its hash");
  }
  EncoderConfig cfg;
  cfg.dim = field("dim");
  cfg.height = field("height");
  cfg.width = field("width");
  cfg.hidden = field("hidden");
  cfg.heads = field("heads");
  cfg.seed = field("seed");
  EncoderSet model(cfg, lexicon);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError(path + ": not a checkpoint");
  if (get<std::uint32_t>(in, path) != kVersion) throw DataError(path + ": unsupported checkpoint version");
  const auto count = get<std::uint32_t>(in, path);
  std::map<std::string, Parameter*> by_name;
  for (auto* p : model.parameters()) by_name[p->name] = p;
  if (count != by_name.size()) throw DimensionError(path + ": tensor count differs from model");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rank = get<std::uint32_t>(in, path);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in, path)));
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError(path + ": unknown tensor '" + name + "'");
    if (it->second->value.shape != shape) {
      throw DimensionError(path + ": tensor '" + name + "' has shape " + shape_string(shape) + ", model expects " +
                           shape_string(it->second->value.shape));
    }
    in.read(reinterpret_cast<char*>(it->second->value.values.data()),
            static_cast<std::streamsize>(numel(shape) * sizeof(double)));
    if (!in) throw DataError(path + ": truncated checkpoint");
  }
  return model;
}

}  // namespace bp
