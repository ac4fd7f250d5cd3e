#pragma once

// Synthetic separable image-text corpus: class k texts contain the word
// "tok<k>" among filler words, class k images have a class-specific gray
// level and a bright square on patch-grid cell k.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "mkg/xmodal/train.hpp"

namespace mkg::testing {

struct SyntheticExample {
  int cls = 0;
  xmodal::PairExample pair;
};

inline RawImage class_image(std::mt19937_64& rng, int cls, std::size_t side, std::size_t patch) {
  // base gray level 40 + 50k with +-20 noise, plus a bright square on cell k
  RawImage img(side, side, 1);
  std::uniform_int_distribution<int> noise(-20, 20), bright(215, 255);
  for (auto& p : img.pixels) p = std::uint8_t(std::clamp(40 + 50 * cls + noise(rng), 0, 255));
  const std::size_t grid = side / patch;
  const std::size_t r0 = (std::size_t(cls) / grid) * patch, c0 = (std::size_t(cls) % grid) * patch;
  for (std::size_t r = r0; r < r0 + patch; ++r)
    for (std::size_t c = c0; c < c0 + patch; ++c) img.at(r, c) = std::uint8_t(bright(rng));
  return img;
}

inline std::string class_text(std::mt19937_64& rng, int cls) {
  static const char* filler[] = {"soft", "daily", "fresh", "light", "new", "classic", "gift", "small"};
  std::uniform_int_distribution<int> count(2, 4), word(0, 7);
  std::vector<std::string> words;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) words.push_back(filler[word(rng)]);
  std::uniform_int_distribution<int> at(0, n);
  words.insert(words.begin() + at(rng), "tok" + std::to_string(cls));
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

inline std::vector<SyntheticExample> synthetic_corpus(std::uint64_t seed, std::size_t n, int classes,
                                                      std::size_t side, std::size_t patch) {
  std::mt19937_64 rng(seed);
  std::vector<SyntheticExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = int(i % std::size_t(classes));
    out.push_back({cls, {class_text(rng, cls), class_image(rng, cls, side, patch)}});
  }
  return out;
}

inline xmodal::ModelConfig synthetic_config() {
  xmodal::ModelConfig c;
  c.d_model = 32;
  c.n_layers = 2;
  c.n_heads = 4;
  c.max_text_len = 8;
  c.patch_size = 8;
  c.image_h = 32;
  c.image_w = 32;
  c.channels = 1;
  c.loss_weights = {0.1, 0.1, 1.0};
  c.seed = 42;
  return c;
}

inline xmodal::TrainConfig synthetic_training(std::size_t epochs) {
  xmodal::TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 16;
  t.seed = 5;
  t.optimizer.kind = xmodal::OptimizerConfig::Kind::adam;
  t.optimizer.lr = 2e-3;
  t.optimizer.clip_norm = 5.0;
  return t;
}

}  // namespace mkg::testing
