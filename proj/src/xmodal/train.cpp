#include "mkg/xmodal/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mkg/error.hpp"
#include "mkg/xmodal/encoder.hpp"

namespace mkg::xmodal {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// log(1 + e^z) without overflow
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

TokenSequence unmasked(const TokenSequence& s) { return TokenSequence{s.ids, {}}; }
PatchSequence unmasked(const PatchSequence& s) { return PatchSequence{s.patches, {}}; }

Mat cls_only_grad(std::size_t rows, std::span<const double> dcls) {
  Mat d(rows, dcls.size());
  std::copy(dcls.begin(), dcls.end(), d.row(0).begin());
  return d;
}

std::vector<std::size_t> choose(std::mt19937_64& rng, std::size_t first, std::size_t count, double prob) {
  if (count == 0) return {};
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(prob * double(count))), 1, count);
  std::vector<std::size_t> pool(count);
  std::iota(pool.begin(), pool.end(), first);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, count - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

CmrResult cmr_from_scores(const Mat& s) {
  const std::size_t m = s.rows;
  if (m == 0 || s.cols != m) throw Error(ErrorCode::EmptySet, "score matrix must be square and non-empty");
  CmrResult r;
  r.dscores = Mat(m, m);
  const double inv = 1.0 / static_cast<double>(m);
  double rows = 0.0, cols = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    double mx = -INFINITY;
    for (std::size_t b = 0; b < m; ++b) mx = std::max(mx, s(a, b));
    double z = 0.0;
    for (std::size_t b = 0; b < m; ++b) z += std::exp(s(a, b) - mx);
    const double lse = mx + std::log(z);
    rows += lse - s(a, a);
    for (std::size_t b = 0; b < m; ++b)
      r.dscores(a, b) += 0.5 * inv * (std::exp(s(a, b) - lse) - (a == b ? 1.0 : 0.0));
  }
  for (std::size_t b = 0; b < m; ++b) {
    double mx = -INFINITY;
    for (std::size_t a = 0; a < m; ++a) mx = std::max(mx, s(a, b));
    double z = 0.0;
    for (std::size_t a = 0; a < m; ++a) z += std::exp(s(a, b) - mx);
    const double lse = mx + std::log(z);
    cols += lse - s(b, b);
    for (std::size_t a = 0; a < m; ++a)
      r.dscores(a, b) += 0.5 * inv * (std::exp(s(a, b) - lse) - (a == b ? 1.0 : 0.0));
  }
  r.loss = 0.5 * (rows * inv + cols * inv);
  return r;
}

std::vector<std::size_t> choose_text_masks(std::mt19937_64& rng, std::size_t length, double prob) {
  if (length < 2) throw Error(ErrorCode::NoMaskableTokens, "text has no token besides CLS");
  return choose(rng, 1, length - 1, prob);
}

std::vector<std::size_t> choose_patch_masks(std::mt19937_64& rng, std::size_t count, double prob) {
  if (count == 0) throw Error(ErrorCode::NoMaskablePatches, "image has no patches");
  return choose(rng, 0, count, prob);
}

LossBreakdown compute_losses(Encoders& enc, const TrainingBatch& batch, const LossWeights& w) {
  const std::size_t m = batch.size(), d = enc.cfg.d_model;
  if (m == 0) throw Error(ErrorCode::EmptySet, "empty training batch");
  LossBreakdown out;
  const bool use_mlm = w.mlm > 0, use_mpfr = w.mpfr > 0, use_cmr = w.cmr > 0;

  std::size_t text_masks = 0, patch_masks = 0;
  for (const auto& p : batch) {
    text_masks += p.text.mask_positions.size();
    patch_masks += p.image.mask_positions.size();
  }
  if (use_mlm && text_masks == 0) throw Error(ErrorCode::NoMaskableTokens, "no masked token in batch");
  if (use_mpfr && patch_masks == 0) throw Error(ErrorCode::NoMaskablePatches, "no masked patch in batch");

  const bool need_text = use_cmr || use_mpfr, need_image = use_cmr || use_mlm;
  std::vector<TokenSequence> clean_text(m);
  std::vector<PatchSequence> clean_image(m);
  std::vector<TextTrace> text_trace(m);
  std::vector<ImageTrace> image_trace(m);
  std::vector<std::vector<double>> tcls(m), icls(m), dtcls(m, std::vector<double>(d, 0.0)),
      dicls(m, std::vector<double>(d, 0.0));
  for (std::size_t k = 0; k < m; ++k) {
    if (need_text) {
      clean_text[k] = unmasked(batch[k].text);
      const Mat o = forward_text(enc, clean_text[k], {}, &text_trace[k]);
      tcls[k].assign(o.row(0).begin(), o.row(0).end());
    }
    if (need_image) {
      clean_image[k] = unmasked(batch[k].image);
      const Mat o = forward_image(enc, clean_image[k], {}, &image_trace[k]);
      icls[k].assign(o.row(0).begin(), o.row(0).end());
    }
  }

  if (use_cmr) {
    Mat s(m, m);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) s(a, b) = dot(icls[a], tcls[b]);
    const CmrResult r = cmr_from_scores(s);
    out.cmr = r.loss;
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) {
        const double g = w.cmr * r.dscores(a, b);
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < d; ++j) {
          dicls[a][j] += g * tcls[b][j];
          dtcls[b][j] += g * icls[a][j];
        }
      }
  }

  if (use_mlm) {
    const std::size_t v = enc.cfg.vocab_size;
    const double scale = w.mlm / static_cast<double>(text_masks);
    auto& hw = enc.heads.mlm_w;
    auto& hb = enc.heads.mlm_b;
    std::vector<double> logits(v);
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const auto& seq = batch[k].text;
      if (seq.mask_positions.empty()) continue;
      TextTrace trace;
      const Mat h = forward_text(enc, seq, icls[k], &trace);
      Mat dh(h.rows, d);
      for (std::size_t pos : seq.mask_positions) {
        const auto hrow = h.row(pos);
        double mx = -INFINITY;
        for (std::size_t c = 0; c < v; ++c) {
          double z = hb.value.data[c];
          for (std::size_t j = 0; j < d; ++j) z += hrow[j] * hw.value(j, c);
          logits[c] = z;
          mx = std::max(mx, z);
        }
        double zsum = 0.0;
        for (double z : logits) zsum += std::exp(z - mx);
        const double lse = mx + std::log(zsum);
        const std::uint32_t target = seq.ids[pos];
        total += lse - logits[target];
        for (std::size_t c = 0; c < v; ++c) {
          const double g = scale * (std::exp(logits[c] - lse) - (c == target ? 1.0 : 0.0));
          hb.grad.data[c] += g;
          for (std::size_t j = 0; j < d; ++j) {
            hw.grad(j, c) += hrow[j] * g;
            dh(pos, j) += g * hw.value(j, c);
          }
        }
      }
      const auto dcond = backward_text(enc, seq, trace, dh);
      for (std::size_t j = 0; j < d; ++j) dicls[k][j] += dcond[j];
    }
    out.mlm = total / static_cast<double>(text_masks);
  }

  if (use_mpfr) {
    const std::size_t pd = enc.cfg.patch_dim();
    const double elems = static_cast<double>(patch_masks * pd);
    const double scale = w.mpfr / elems;
    auto& hw = enc.heads.mpfr_w;
    auto& hb = enc.heads.mpfr_b;
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const auto& seq = batch[k].image;
      if (seq.mask_positions.empty()) continue;
      ImageTrace trace;
      const Mat h = forward_image(enc, seq, tcls[k], &trace);
      Mat dh(h.rows, d);
      for (std::size_t pos : seq.mask_positions) {
        const auto hrow = h.row(pos + 1);
        const auto target = seq.patches.row(pos);
        for (std::size_t c = 0; c < pd; ++c) {
          double pred = hb.value.data[c];
          for (std::size_t j = 0; j < d; ++j) pred += hrow[j] * hw.value(j, c);
          const double diff = pred - target[c];
          total += diff * diff;
          const double g = scale * 2.0 * diff;
          hb.grad.data[c] += g;
          for (std::size_t j = 0; j < d; ++j) {
            hw.grad(j, c) += hrow[j] * g;
            dh(pos + 1, j) += g * hw.value(j, c);
          }
        }
      }
      const auto dcond = backward_image(enc, seq, trace, dh);
      for (std::size_t j = 0; j < d; ++j) dtcls[k][j] += dcond[j];
    }
    out.mpfr = total / elems;
  }

  for (std::size_t k = 0; k < m; ++k) {
    if (need_text) backward_text(enc, clean_text[k], text_trace[k], cls_only_grad(clean_text[k].ids.size(), dtcls[k]));
    if (need_image)
      backward_image(enc, clean_image[k], image_trace[k], cls_only_grad(clean_image[k].count() + 1, dicls[k]));
  }
  out.total = w.mlm * out.mlm + w.mpfr * out.mpfr + w.cmr * out.cmr;
  return out;
}

double mlm_loss(Encoders& enc, const TrainingBatch& batch) { return compute_losses(enc, batch, {1, 0, 0}).mlm; }
double mpfr_loss(Encoders& enc, const TrainingBatch& batch) { return compute_losses(enc, batch, {0, 1, 0}).mpfr; }
double cmr_loss(Encoders& enc, const TrainingBatch& batch) { return compute_losses(enc, batch, {0, 0, 1}).cmr; }

// ---------------------------------------------------------------------------

namespace {

const char* kind_name(OptimizerConfig::Kind k) {
  switch (k) {
    case OptimizerConfig::Kind::sgd: return "sgd";
    case OptimizerConfig::Kind::momentum: return "momentum";
    case OptimizerConfig::Kind::adam: return "adam";
  }
  return "sgd";
}

}  // namespace

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = {{"kind", kind_name(c.kind)}, {"lr", c.lr},       {"momentum", c.momentum}, {"beta1", c.beta1},
       {"beta2", c.beta2},          {"eps", c.eps},     {"clip_norm", c.clip_norm}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
  const std::string kind = j.value("kind", std::string(kind_name(c.kind)));
  if (kind == "sgd") c.kind = OptimizerConfig::Kind::sgd;
  else if (kind == "momentum") c.kind = OptimizerConfig::Kind::momentum;
  else if (kind == "adam") c.kind = OptimizerConfig::Kind::adam;
  else throw Error(ErrorCode::InvalidConfig, "unknown optimizer " + kind);
  c.lr = j.value("lr", c.lr);
  c.momentum = j.value("momentum", c.momentum);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  if (c.lr < 0) throw Error(ErrorCode::InvalidConfig, "learning rate must be non-negative");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"seed", c.seed}, {"optimizer", c.optimizer}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("optimizer")) c.optimizer = j.at("optimizer").get<OptimizerConfig>();
  if (c.batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be positive");
}

double Optimizer::step(Encoders& enc) {
  double sq = 0.0;
  enc.for_each_param([&](const Param& p) {
    for (double g : p.grad.data) sq += g * g;
  });
  const double norm = std::sqrt(sq);
  const double scale = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  enc.for_each_param([&](Param& p) {
    auto& val = p.value.data;
    const auto& grad = p.grad.data;
    switch (cfg_.kind) {
      case OptimizerConfig::Kind::sgd:
        for (std::size_t i = 0; i < val.size(); ++i) val[i] -= cfg_.lr * scale * grad[i];
        break;
      case OptimizerConfig::Kind::momentum: {
        Slot& s = slots_[p.name];
        if (s.m.size() != val.size()) s.m = Mat(p.value.rows, p.value.cols);
        for (std::size_t i = 0; i < val.size(); ++i) {
          s.m.data[i] = cfg_.momentum * s.m.data[i] + scale * grad[i];
          val[i] -= cfg_.lr * s.m.data[i];
        }
        break;
      }
      case OptimizerConfig::Kind::adam: {
        Slot& s = slots_[p.name];
        if (s.m.size() != val.size()) {
          s.m = Mat(p.value.rows, p.value.cols);
          s.v = Mat(p.value.rows, p.value.cols);
        }
        for (std::size_t i = 0; i < val.size(); ++i) {
          const double g = scale * grad[i];
          s.m.data[i] = cfg_.beta1 * s.m.data[i] + (1 - cfg_.beta1) * g;
          s.v.data[i] = cfg_.beta2 * s.v.data[i] + (1 - cfg_.beta2) * g * g;
          val[i] -= cfg_.lr * (s.m.data[i] / bc1) / (std::sqrt(s.v.data[i] / bc2) + cfg_.eps);
        }
        break;
      }
    }
  });
  return norm;
}

// ---------------------------------------------------------------------------

TokenSequence text_input(const Model& model, const std::string& text) {
  return encode_text_input(model.vocab, text, model.enc.cfg.max_text_len);
}

PatchSequence image_input(const ModelConfig& cfg, const RawImage& image) {
  if (image.channels != cfg.channels || image.height != cfg.image_h || image.width != cfg.image_w) {
    if (image.height % cfg.patch_size != 0 || image.width % cfg.patch_size != 0)
      throw Error(ErrorCode::IndivisibleDimensions, "image size is not a multiple of patch_size");
    throw Error(ErrorCode::LengthExceeded, "image geometry " + std::to_string(image.width) + "x" +
                                               std::to_string(image.height) + "x" + std::to_string(image.channels) +
                                               " differs from the model configuration");
  }
  return patchify(image, cfg.patch_size);
}

Model pretrain(const std::vector<PairExample>& corpus, ModelConfig cfg, const TrainConfig& train,
               std::vector<EpochLog>* log, const EpochCallback& on_epoch) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "no image-text pairs to pretrain on");
  if (train.batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be positive");
  std::vector<std::string> texts;
  for (const auto& p : corpus) texts.push_back(p.text);
  Model model;
  model.vocab = Vocabulary::build(texts);
  cfg.vocab_size = model.vocab.size();
  model.enc = Encoders::init(cfg);

  std::vector<TrainingPair> data;
  for (const auto& p : corpus) data.push_back({text_input(model, p.text), image_input(cfg, p.image)});

  std::mt19937_64 rng(train.seed);
  Optimizer opt(train.optimizer);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog entry{epoch + 1, {}};
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
      TrainingBatch batch;
      std::size_t text_masks = 0;
      for (std::size_t i = start; i < std::min(order.size(), start + train.batch_size); ++i) {
        TrainingPair p = data[order[i]];
        if (p.text.ids.size() > 1) p.text.mask_positions = choose_text_masks(rng, p.text.ids.size(), cfg.mask_prob);
        p.image.mask_positions = choose_patch_masks(rng, p.image.count(), cfg.mask_prob);
        text_masks += p.text.mask_positions.size();
        batch.push_back(std::move(p));
      }
      LossWeights w = cfg.loss_weights;
      if (text_masks == 0) w.mlm = 0;  // batch of CLS-only texts
      model.enc.zero_grad();
      const LossBreakdown l = compute_losses(model.enc, batch, w);
      opt.step(model.enc);
      entry.mean.mlm += l.mlm;
      entry.mean.mpfr += l.mpfr;
      entry.mean.cmr += l.cmr;
      entry.mean.total += l.total;
      ++batches;
    }
    for (double* v : {&entry.mean.mlm, &entry.mean.mpfr, &entry.mean.cmr, &entry.mean.total})
      *v /= static_cast<double>(batches);
    if (log) log->push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  model.enc.zero_grad();
  return model;
}

// ---------------------------------------------------------------------------

double match_probability(const Encoders& enc, const TokenSequence& text, const PatchSequence& image) {
  const auto t = encode_text(enc, text);
  const auto i = encode_image(enc, image);
  return sigmoid(enc.heads.match_scale.value.data[0] * dot(t.cls, i.cls) + enc.heads.match_bias.value.data[0]);
}

double match_probability(const Model& model, const std::string& text, const RawImage& image) {
  return match_probability(model.enc, text_input(model, text), image_input(model.enc.cfg, image));
}

double matching_loss(Encoders& enc, const std::vector<TokenSequence>& texts,
                     const std::vector<PatchSequence>& images, const std::vector<int>& labels) {
  const std::size_t m = labels.size();
  if (m == 0 || texts.size() != m || images.size() != m) throw Error(ErrorCode::EmptySet, "empty matching batch");
  const double tau = enc.heads.match_scale.value.data[0], bias = enc.heads.match_bias.value.data[0];
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    TextTrace tt;
    ImageTrace it;
    const TokenSequence ts = unmasked(texts[k]);
    const PatchSequence is = unmasked(images[k]);
    const Mat to = forward_text(enc, ts, {}, &tt);
    const Mat io = forward_image(enc, is, {}, &it);
    const double s = dot(to.row(0), io.row(0));
    const double z = tau * s + bias;
    const double y = labels[k] ? 1.0 : 0.0;
    total += softplus(z) - y * z;
    const double dz = (sigmoid(z) - y) / static_cast<double>(m);
    enc.heads.match_scale.grad.data[0] += dz * s;
    enc.heads.match_bias.grad.data[0] += dz;
    std::vector<double> dt(to.cols), di(io.cols);
    for (std::size_t j = 0; j < dt.size(); ++j) {
      dt[j] = dz * tau * io(0, j);
      di[j] = dz * tau * to(0, j);
    }
    backward_text(enc, ts, tt, cls_only_grad(to.rows, dt));
    backward_image(enc, is, it, cls_only_grad(io.rows, di));
  }
  return total / static_cast<double>(m);
}

std::vector<EpochLog> finetune_matching(Model& model, const std::vector<LabeledPair>& set, const TrainConfig& train) {
  if (set.empty()) throw Error(ErrorCode::EmptySet, "no labeled pairs to fine-tune on");
  if (train.batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be positive");
  std::vector<TokenSequence> texts;
  std::vector<PatchSequence> images;
  std::vector<int> labels;
  for (const auto& p : set) {
    texts.push_back(text_input(model, p.text));
    images.push_back(image_input(model.enc.cfg, p.image));
    labels.push_back(p.label ? 1 : 0);
  }
  std::mt19937_64 rng(train.seed);
  Optimizer opt(train.optimizer);
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochLog> log;
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog entry{epoch + 1, {}};
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
      std::vector<TokenSequence> bt;
      std::vector<PatchSequence> bi;
      std::vector<int> bl;
      for (std::size_t i = start; i < std::min(order.size(), start + train.batch_size); ++i) {
        bt.push_back(texts[order[i]]);
        bi.push_back(images[order[i]]);
        bl.push_back(labels[order[i]]);
      }
      model.enc.zero_grad();
      entry.mean.total += matching_loss(model.enc, bt, bi, bl);
      opt.step(model.enc);
      ++batches;
    }
    entry.mean.total /= static_cast<double>(batches);
    log.push_back(entry);
  }
  model.enc.zero_grad();
  return log;
}

}  // namespace mkg::xmodal
