#include "mkg/xmodal/speed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "mkg/error.hpp"
#include "mkg/xmodal/index.hpp"
#include "mkg/xmodal/joint.hpp"
#include "mkg/xmodal/train.hpp"

namespace mkg::xmodal {

ModelConfig toy_config() {
  ModelConfig c;
  c.d_model = 32;
  c.n_layers = 2;
  c.n_heads = 4;
  c.max_text_len = 8;
  c.patch_size = 8;
  c.image_h = c.image_w = 32;
  c.channels = 1;
  return c;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

SpeedReport compare_two_stream(const ModelConfig& base, std::size_t candidates, std::size_t repeats,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::string query = "red lipstick velvet matte";
  Model model;
  model.vocab = Vocabulary::build({query});
  ModelConfig cfg = base;
  cfg.vocab_size = model.vocab.size();
  cfg.seed = seed;
  model.enc = Encoders::init(cfg);
  const JointModel joint = JointModel::init(cfg);

  std::vector<IndexImage> images;
  std::uniform_int_distribution<int> px(0, 255);
  for (std::size_t i = 0; i < candidates; ++i) {
    RawImage img(cfg.image_w, cfg.image_h, cfg.channels);
    for (auto& p : img.pixels) p = std::uint8_t(px(rng));
    images.push_back({"cand" + std::to_string(i), "", std::move(img)});
  }
  std::vector<PatchSequence> patches;
  for (const auto& im : images) patches.push_back(image_input(cfg, im.image));
  const TokenSequence text = text_input(model, query);

  SpeedReport r;
  r.candidates = candidates;
  auto t0 = std::chrono::steady_clock::now();
  const EmbeddingIndex index = build_index(model.enc, images);
  r.index_seconds = seconds_since(t0);

  r.match_seconds = r.joint_seconds = 1e300;
  for (std::size_t rep = 0; rep < std::max<std::size_t>(repeats, 1); ++rep) {
    model.enc.text_forwards.reset();
    model.enc.image_forwards.reset();
    t0 = std::chrono::steady_clock::now();
    const auto hits = match(model, index, query, candidates);
    r.match_seconds = std::min(r.match_seconds, seconds_since(t0));
    r.text_forwards = model.enc.text_forwards.get();
    r.image_forwards = model.enc.image_forwards.get();
    if (hits.size() != candidates) throw Error(ErrorCode::InvalidConfig, "match returned a short list");

    joint.forwards.reset();
    t0 = std::chrono::steady_clock::now();
    double sink = 0.0;
    for (const auto& p : patches) sink += single_stream_score(joint, text, p);
    r.joint_seconds = std::min(r.joint_seconds, seconds_since(t0));
    r.joint_forwards = joint.forwards.get();
    if (!std::isfinite(sink)) throw Error(ErrorCode::InvalidConfig, "non-finite single-stream score");
  }
  return r;
}

}  // namespace mkg::xmodal
