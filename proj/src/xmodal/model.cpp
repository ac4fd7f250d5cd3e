#include "mkg/xmodal/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mkg/error.hpp"
#include "mkg/tokenize.hpp"

namespace mkg::xmodal {

void ModelConfig::validate() const {
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || vocab_size < 2 || patch_size == 0 || image_h == 0 ||
      image_w == 0)
    throw Error(ErrorCode::InvalidConfig, "model dimensions must be positive (vocab_size >= 2)");
  if (d_model % n_heads != 0) throw Error(ErrorCode::InvalidConfig, "d_model must be divisible by n_heads");
  if (channels != 1 && channels != 3) throw Error(ErrorCode::InvalidConfig, "channels must be 1 or 3");
  if (image_h % patch_size != 0 || image_w % patch_size != 0)
    throw Error(ErrorCode::IndivisibleDimensions, "image size must be a multiple of patch_size");
  if (!(mask_prob > 0.0 && mask_prob < 1.0)) throw Error(ErrorCode::InvalidConfig, "mask_prob must lie in (0,1)");
  if (loss_weights.mlm < 0 || loss_weights.mpfr < 0 || loss_weights.cmr < 0)
    throw Error(ErrorCode::InvalidConfig, "loss weights must be non-negative");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"d_model", c.d_model},
       {"n_layers", c.n_layers},
       {"n_heads", c.n_heads},
       {"vocab_size", c.vocab_size},
       {"max_text_len", c.max_text_len},
       {"patch_size", c.patch_size},
       {"image_h", c.image_h},
       {"image_w", c.image_w},
       {"channels", c.channels},
       {"mask_prob", c.mask_prob},
       {"loss_weights", {c.loss_weights.mlm, c.loss_weights.mpfr, c.loss_weights.cmr}},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_text_len = j.value("max_text_len", c.max_text_len);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.image_h = j.value("image_h", c.image_h);
  c.image_w = j.value("image_w", c.image_w);
  c.channels = j.value("channels", c.channels);
  c.mask_prob = j.value("mask_prob", c.mask_prob);
  c.seed = j.value("seed", c.seed);
  if (auto w = j.find("loss_weights"); w != j.end()) {
    if (!w->is_array() || w->size() != 3)
      throw Error(ErrorCode::InvalidConfig, "loss_weights must be [mlm, mpfr, cmr]");
    c.loss_weights = {(*w)[0].get<double>(), (*w)[1].get<double>(), (*w)[2].get<double>()};
  }
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() : tokens_{"[CLS]", "[UNK]"} {
  ids_.emplace(tokens_[0], kCls);
  ids_.emplace(tokens_[1], kUnk);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus) {
  std::set<std::string> seen;
  for (const auto& text : corpus)
    for (auto& tok : tokenize(text)) seen.insert(std::move(tok));
  Vocabulary v;
  for (const auto& tok : seen) {
    if (v.ids_.count(tok)) continue;
    v.ids_.emplace(tok, static_cast<std::uint32_t>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "[CLS]" || tokens[1] != "[UNK]")
    throw Error(ErrorCode::InvalidCheckpoint, "vocabulary must start with [CLS], [UNK]");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.ids_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.ids_.emplace(v.tokens_[i], static_cast<std::uint32_t>(i));
  return v;
}

std::uint32_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

TokenSequence encode_text_input(const Vocabulary& vocab, const std::string& text, std::size_t max_len) {
  TokenSequence seq;
  seq.ids.push_back(Vocabulary::kCls);
  for (const auto& tok : tokenize(text)) {
    if (seq.ids.size() > max_len) break;
    seq.ids.push_back(vocab.id(tok));
  }
  return seq;
}

// ---------------------------------------------------------------------------

PatchSequence patchify(const RawImage& img, std::size_t p) {
  img.validate();
  if (p == 0 || img.height % p != 0 || img.width % p != 0)
    throw Error(ErrorCode::IndivisibleDimensions,
                std::to_string(img.height) + "x" + std::to_string(img.width) + " by patch " + std::to_string(p));
  const std::size_t grid_w = img.width / p;
  const std::size_t n = (img.height / p) * grid_w;
  const std::size_t c = img.channels;
  PatchSequence seq;
  seq.patches = Mat(n, p * p * c);
  for (std::size_t idx = 0; idx < n; ++idx) {
    const std::size_t r0 = (idx / grid_w) * p, c0 = (idx % grid_w) * p;
    double* out = seq.patches.data.data() + idx * p * p * c;
    for (std::size_t dy = 0; dy < p; ++dy)
      for (std::size_t dx = 0; dx < p; ++dx)
        for (std::size_t ch = 0; ch < c; ++ch) *out++ = img.at(r0 + dy, c0 + dx, ch) / 255.0;
  }
  return seq;
}

RawImage unpatchify(const PatchSequence& seq, std::size_t height, std::size_t width, std::size_t channels,
                    std::size_t p) {
  RawImage img(width, height, channels);
  const std::size_t grid_w = width / p;
  for (std::size_t idx = 0; idx < seq.count(); ++idx) {
    const std::size_t r0 = (idx / grid_w) * p, c0 = (idx % grid_w) * p;
    const double* in = seq.patches.data.data() + idx * seq.patches.cols;
    for (std::size_t dy = 0; dy < p; ++dy)
      for (std::size_t dx = 0; dx < p; ++dx)
        for (std::size_t ch = 0; ch < channels; ++ch)
          img.at(r0 + dy, c0 + dx, ch) = static_cast<std::uint8_t>(std::lround(*in++ * 255.0));
  }
  return img;
}

// ---------------------------------------------------------------------------

void init_normal(Param& p, double stddev, std::uint64_t seed, std::uint64_t stream) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + stream);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : p.value.data) v = dist(rng);
}

namespace {

LayerNormParams make_ln(const std::string& prefix, std::size_t d) {
  LayerNormParams ln{Param(prefix + ".gamma", 1, d), Param(prefix + ".beta", 1, d)};
  ln.gamma.value.fill(1.0);
  return ln;
}

}  // namespace

StackParams make_stack(const std::string& prefix, const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model, f = cfg.ffn_dim();
  StackParams s;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string b = prefix + ".blocks." + std::to_string(l);
    BlockParams blk;
    blk.ln1 = make_ln(b + ".ln1", d);
    blk.wq = Param(b + ".attn.wq", d, d);
    blk.bq = Param(b + ".attn.bq", 1, d);
    blk.wk = Param(b + ".attn.wk", d, d);
    blk.bk = Param(b + ".attn.bk", 1, d);
    blk.wv = Param(b + ".attn.wv", d, d);
    blk.bv = Param(b + ".attn.bv", 1, d);
    blk.wo = Param(b + ".attn.wo", d, d);
    blk.bo = Param(b + ".attn.bo", 1, d);
    blk.ln2 = make_ln(b + ".ln2", d);
    blk.w1 = Param(b + ".ffn.w1", d, f);
    blk.b1 = Param(b + ".ffn.b1", 1, f);
    blk.w2 = Param(b + ".ffn.w2", f, d);
    blk.b2 = Param(b + ".ffn.b2", 1, d);
    s.blocks.push_back(std::move(blk));
  }
  s.ln_f = make_ln(prefix + ".ln_f", d);
  return s;
}

template <typename S, typename F>
static void visit_stack(S& s, F&& fn) {
  for (auto& b : s.blocks) {
    for (auto* p : {&b.ln1.gamma, &b.ln1.beta, &b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv, &b.wo, &b.bo,
                    &b.ln2.gamma, &b.ln2.beta, &b.w1, &b.b1, &b.w2, &b.b2})
      fn(*p);
  }
  fn(s.ln_f.gamma);
  fn(s.ln_f.beta);
}

void for_each_param(StackParams& s, const std::function<void(Param&)>& fn) { visit_stack(s, fn); }
void for_each_param(const StackParams& s, const std::function<void(const Param&)>& fn) { visit_stack(s, fn); }

void init_stack(StackParams& s, std::uint64_t seed, std::uint64_t& stream) {
  for (auto& b : s.blocks) {
    for (auto* w : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.w2})
      init_normal(*w, 1.0 / std::sqrt(static_cast<double>(w->value.rows)), seed, stream++);
  }
}

Encoders Encoders::init(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model, pd = cfg.patch_dim(), v = cfg.vocab_size;
  Encoders e;
  e.cfg = cfg;
  e.text.tok_emb = Param("text.tok_emb", v, d);
  e.text.pos_emb = Param("text.pos_emb", cfg.max_text_len + 1, d);
  e.text.mask_emb = Param("text.mask_emb", 1, d);
  e.text.stack = make_stack("text", cfg);
  e.image.patch_w = Param("image.patch_w", pd, d);
  e.image.patch_b = Param("image.patch_b", 1, d);
  e.image.cls = Param("image.cls", 1, d);
  e.image.pos_emb = Param("image.pos_emb", cfg.num_patches() + 1, d);
  e.image.seg_emb = Param("image.seg_emb", 1, d);
  e.image.mask_emb = Param("image.mask_emb", 1, d);
  e.image.stack = make_stack("image", cfg);
  e.heads.mlm_w = Param("heads.mlm_w", d, v);
  e.heads.mlm_b = Param("heads.mlm_b", 1, v);
  e.heads.mpfr_w = Param("heads.mpfr_w", d, pd);
  e.heads.mpfr_b = Param("heads.mpfr_b", 1, pd);
  e.heads.match_scale = Param("heads.match_scale", 1, 1);
  e.heads.match_bias = Param("heads.match_bias", 1, 1);
  e.heads.match_scale.value.fill(1.0);

  std::uint64_t stream = 0;
  const std::uint64_t seed = cfg.seed;
  for (auto* p : {&e.text.tok_emb, &e.text.pos_emb, &e.text.mask_emb, &e.image.cls, &e.image.pos_emb,
                  &e.image.seg_emb, &e.image.mask_emb})
    init_normal(*p, 0.1, seed, stream++);
  init_normal(e.image.patch_w, 1.0 / std::sqrt(static_cast<double>(pd)), seed, stream++);
  init_normal(e.heads.mlm_w, 1.0 / std::sqrt(static_cast<double>(d)), seed, stream++);
  init_normal(e.heads.mpfr_w, 1.0 / std::sqrt(static_cast<double>(d)), seed, stream++);
  init_stack(e.text.stack, seed, stream);
  init_stack(e.image.stack, seed, stream);
  return e;
}

void Encoders::for_each_param(const std::function<void(Param&)>& fn) {
  for (auto* p : {&text.tok_emb, &text.pos_emb, &text.mask_emb}) fn(*p);
  xmodal::for_each_param(text.stack, fn);
  for (auto* p : {&image.patch_w, &image.patch_b, &image.cls, &image.pos_emb, &image.seg_emb, &image.mask_emb})
    fn(*p);
  xmodal::for_each_param(image.stack, fn);
  for (auto* p : {&heads.mlm_w, &heads.mlm_b, &heads.mpfr_w, &heads.mpfr_b, &heads.match_scale, &heads.match_bias})
    fn(*p);
}

void Encoders::for_each_param(const std::function<void(const Param&)>& fn) const {
  const_cast<Encoders*>(this)->for_each_param([&](Param& p) { fn(p); });
}

void Encoders::zero_grad() {
  for_each_param([](Param& p) { p.grad.fill(0.0); });
}

std::size_t Encoders::parameter_count() const {
  std::size_t n = 0;
  for_each_param([&](const Param& p) { n += p.value.size(); });
  return n;
}

Param* Encoders::find(const std::string& name) {
  Param* out = nullptr;
  for_each_param([&](Param& p) {
    if (p.name == name) out = &p;
  });
  return out;
}

}  // namespace mkg::xmodal
