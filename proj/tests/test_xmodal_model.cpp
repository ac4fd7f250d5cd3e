#include <cmath>
#include <random>

#include "doctest.h"
#include "mkg/error.hpp"
#include "mkg/xmodal/encoder.hpp"
#include "mkg/xmodal/model.hpp"
#include "mkg/xmodal/train.hpp"
#include "support/xmodal_oracle.hpp"

using namespace mkg;
using namespace mkg::xmodal;

namespace {

RawImage random_image(std::mt19937_64& rng, std::size_t w, std::size_t h, std::size_t c) {
  RawImage img(w, h, c);
  for (auto& p : img.pixels) p = std::uint8_t(rng() & 0xFF);
  return img;
}

void check_close(const Mat& got, const testing::Rows& want, double tol) {
  REQUIRE(got.rows == want.size());
  for (std::size_t i = 0; i < got.rows; ++i)
    for (std::size_t j = 0; j < got.cols; ++j) CHECK(got(i, j) == doctest::Approx(want[i][j]).epsilon(tol));
}

}  // namespace

TEST_CASE("patch counts follow HW / P^2") {
  RawImage big(224, 224, 3, 10);
  auto seq = patchify(big, 16);
  CHECK(seq.count() == 196);
  CHECK(seq.patches.cols == 768);

  std::mt19937_64 rng(1);
  auto whole = random_image(rng, 8, 8, 3);
  auto one = patchify(whole, 8);
  REQUIRE(one.count() == 1);
  for (std::size_t i = 0; i < whole.pixels.size(); ++i) CHECK(one.patches.data[i] == whole.pixels[i] / 255.0);

  CHECK_THROWS_AS(patchify(RawImage(10, 8, 1), 4), Error);
}

TEST_CASE("4x4 gray image, P=2, patches reproduce the pixel bytes") {
  RawImage img(4, 4, 1);
  for (std::size_t i = 0; i < 16; ++i) img.pixels[i] = std::uint8_t(i * 16 + 1);
  auto seq = patchify(img, 2);
  REQUIRE(seq.count() == 4);
  // patch (pr, pc) holds rows 2pr..2pr+1, cols 2pc..2pc+1 in row-major order
  for (std::size_t pr = 0; pr < 2; ++pr)
    for (std::size_t pc = 0; pc < 2; ++pc)
      for (std::size_t dy = 0; dy < 2; ++dy)
        for (std::size_t dx = 0; dx < 2; ++dx)
          CHECK(std::lround(seq.patches(pr * 2 + pc, dy * 2 + dx) * 255) ==
                img.pixels[(2 * pr + dy) * 4 + (2 * pc + dx)]);
}

TEST_CASE("unpatchify inverts patchify") {
  std::mt19937_64 rng(2);
  for (int round = 0; round < 30; ++round) {
    const std::size_t p = 1 + rng() % 5, c = (rng() & 1) ? 3 : 1;
    const std::size_t h = p * (1 + rng() % 6), w = p * (1 + rng() % 6);
    auto img = random_image(rng, w, h, c);
    CHECK(unpatchify(patchify(img, p), h, w, c, p) == img);
  }
}

TEST_CASE("config validation") {
  ModelConfig c = testing::tiny_config();
  CHECK_NOTHROW(c.validate());
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = testing::tiny_config();
  c.image_h = 5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = testing::tiny_config();
  c.mask_prob = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = testing::tiny_config();
  c.loss_weights.cmr = -1;
  CHECK_THROWS_AS(c.validate(), Error);

  nlohmann::json j = testing::tiny_config();
  auto back = j.get<ModelConfig>();
  CHECK(nlohmann::json(back) == j);
}

TEST_CASE("parameter count depends only on the config") {
  auto cfg = testing::tiny_config();
  auto a = Encoders::init(cfg);
  cfg.seed = 99;
  auto b = Encoders::init(cfg);
  CHECK(a.parameter_count() == b.parameter_count());
  const std::size_t d = 8, f = 32, v = 7, pd = 4, n = 4;
  const std::size_t stack = (2 * d + 4 * (d * d + d) + 2 * d + d * f + f + f * d + d) + 2 * d;
  const std::size_t text = v * d + 7 * d + d + stack;
  const std::size_t image = pd * d + d + d + (n + 1) * d + d + d + stack;
  const std::size_t heads = d * v + v + d * pd + pd + 2;
  CHECK(a.parameter_count() == text + image + heads);
}

TEST_CASE("vocabulary and text input") {
  auto vocab = Vocabulary::build({"补水 mask", "Mask 保湿"});
  CHECK(vocab.tokens() == std::vector<std::string>{"[CLS]", "[UNK]", "mask", "保", "水", "湿", "补"});
  auto seq = encode_text_input(vocab, "补水 unknown", 32);
  CHECK(seq.ids == std::vector<std::uint32_t>{0, 6, 4, Vocabulary::kUnk});
  auto cut = encode_text_input(vocab, "补水保湿", 2);
  CHECK(cut.ids.size() == 3);
}

TEST_CASE("encoders are deterministic, position-aware and read-only") {
  auto enc = Encoders::init(testing::tiny_config());
  std::mt19937_64 rng(3);
  auto batch = testing::random_batch(rng, enc.cfg, 1);
  PatchSequence img{batch[0].image.patches, {}};
  TokenSequence txt{batch[0].text.ids, {}};

  std::vector<double> before;
  enc.for_each_param([&](const Param& p) { before.insert(before.end(), p.value.data.begin(), p.value.data.end()); });
  auto a = encode_image(enc, img);
  auto b = encode_image(enc, img);
  CHECK(a.outputs == b.outputs);
  CHECK(a.cls.size() == enc.cfg.d_model);
  CHECK(encode_text(enc, txt).outputs == encode_text(enc, txt).outputs);
  std::vector<double> after;
  enc.for_each_param([&](const Param& p) { after.insert(after.end(), p.value.data.begin(), p.value.data.end()); });
  CHECK(before == after);
  CHECK(enc.image_forwards.get() == 2);
  CHECK(enc.text_forwards.get() == 2);

  PatchSequence swapped = img;
  for (std::size_t c = 0; c < swapped.patches.cols; ++c) std::swap(swapped.patches(0, c), swapped.patches(2, c));
  CHECK(encode_image(enc, swapped).cls != a.cls);

  TokenSequence too_long;
  too_long.ids.assign(enc.cfg.max_text_len + 2, 2);
  CHECK_THROWS_AS(encode_text(enc, too_long), Error);
  PatchSequence too_many{Mat(enc.cfg.num_patches() + 1, enc.cfg.patch_dim()), {}};
  CHECK_THROWS_AS(encode_image(enc, too_many), Error);
}

TEST_CASE("tower outputs match a step-by-step forward oracle") {
  for (std::size_t heads : {1, 2}) {
    auto cfg = testing::tiny_config();
    cfg.n_heads = heads;
    auto enc = Encoders::init(cfg);
    std::mt19937_64 rng(4 + heads);
    auto batch = testing::random_batch(rng, cfg, 1);
    const std::vector<double> none;
    check_close(forward_text(enc, TokenSequence{batch[0].text.ids, {}}, {}, nullptr),
                testing::text_oracle(enc, TokenSequence{batch[0].text.ids, {}}, none), 1e-12);
    check_close(forward_image(enc, PatchSequence{batch[0].image.patches, {}}, {}, nullptr),
                testing::image_oracle(enc, PatchSequence{batch[0].image.patches, {}}, none), 1e-12);

    std::vector<double> cond(cfg.d_model);
    for (auto& v : cond) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    check_close(forward_text(enc, batch[0].text, cond, nullptr), testing::text_oracle(enc, batch[0].text, cond),
                1e-12);
    check_close(forward_image(enc, batch[0].image, cond, nullptr), testing::image_oracle(enc, batch[0].image, cond),
                1e-12);
  }
}

TEST_CASE("mask selection") {
  std::mt19937_64 rng(5);
  CHECK_THROWS_AS(choose_text_masks(rng, 1, 0.15), Error);
  CHECK(choose_text_masks(rng, 2, 0.15) == std::vector<std::size_t>{1});
  for (int round = 0; round < 100; ++round) {
    const std::size_t n = 2 + rng() % 30;
    auto m = choose_text_masks(rng, n, 0.15);
    CHECK(m.size() == std::max<std::size_t>(1, std::size_t(std::llround(0.15 * double(n - 1)))));
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(m[i] >= 1);
      CHECK(m[i] < n);
      if (i) CHECK(m[i] > m[i - 1]);
    }
    auto p = choose_patch_masks(rng, n, 0.5);
    CHECK(p.back() < n);
  }
}

TEST_CASE("mlm loss edge cases") {
  auto cfg = testing::tiny_config();
  cfg.vocab_size = 2;
  auto enc = Encoders::init(cfg);
  std::mt19937_64 rng(6);
  auto batch = testing::random_batch(rng, cfg, 2);
  enc.heads.mlm_w.value.fill(0.0);
  enc.heads.mlm_b.value.fill(0.0);
  CHECK(mlm_loss(enc, batch) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  for (auto& p : batch) p.text.mask_positions.clear();
  CHECK_THROWS_AS(mlm_loss(enc, batch), Error);
  try {
    mlm_loss(enc, batch);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoMaskableTokens);
  }
}

TEST_CASE("mpfr loss edge cases") {
  auto cfg = testing::tiny_config();
  auto enc = Encoders::init(cfg);
  TrainingPair p;
  p.text.ids = {0, 2, 3};
  p.image.patches = Mat(cfg.num_patches(), cfg.patch_dim(), 1.0);
  p.image.mask_positions = {1};
  enc.heads.mpfr_w.value.fill(0.0);
  enc.heads.mpfr_b.value.fill(0.0);
  CHECK(mpfr_loss(enc, {p}) == 1.0);

  enc.heads.mpfr_b.value.fill(1.0);  // head outputs exactly the target
  CHECK(mpfr_loss(enc, {p}) == 0.0);

  p.image.mask_positions.clear();
  try {
    mpfr_loss(enc, {p});
    FAIL("expected NoMaskablePatches");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoMaskablePatches);
  }
}

TEST_CASE("cmr closed forms") {
  CHECK(cmr_from_scores(Mat(1, 1, 3.7)).loss == 0.0);
  auto enc = Encoders::init(testing::tiny_config());
  std::mt19937_64 rng(7);
  CHECK(cmr_loss(enc, testing::random_batch(rng, enc.cfg, 1)) == 0.0);

  for (double s : {0.0, 0.5, 2.0, -1.0, 10.0}) {
    Mat m(2, 2);
    m(0, 0) = m(1, 1) = s;
    CHECK(std::abs(cmr_from_scores(m).loss - std::log1p(std::exp(-s))) < 1e-9);
  }
  Mat zero(2, 2);
  CHECK(std::abs(cmr_from_scores(zero).loss - std::log(2.0)) < 1e-12);
}

TEST_CASE("cmr is symmetric under transposing the score matrix") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0, 2);
  for (int round = 0; round < 50; ++round) {
    const std::size_t m = 1 + rng() % 8;
    Mat s(m, m), t(m, m);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) t(b, a) = s(a, b) = g(rng);
    CHECK(cmr_from_scores(s).loss == doctest::Approx(cmr_from_scores(t).loss).epsilon(1e-14));

    // explicit bidirectional cross-entropy
    double rows = 0, cols = 0;
    for (std::size_t a = 0; a < m; ++a) {
      double zr = 0, zc = 0;
      for (std::size_t b = 0; b < m; ++b) {
        zr += std::exp(s(a, b));
        zc += std::exp(s(b, a));
      }
      rows += -std::log(std::exp(s(a, a)) / zr);
      cols += -std::log(std::exp(s(a, a)) / zc);
    }
    CHECK(cmr_from_scores(s).loss == doctest::Approx(0.5 * (rows / m + cols / m)).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match central differences") {
  auto cfg = testing::tiny_config();
  std::mt19937_64 rng(9);
  const auto batch = testing::random_batch(rng, cfg, 3);
  const LossWeights mlm{1, 0, 0}, mpfr{0, 1, 0}, cmr{0, 0, 1}, all{0.7, 1.3, 0.9};
  for (const auto& w : {mlm, mpfr, cmr, all}) {
    auto enc = Encoders::init(cfg);
    auto res = testing::finite_difference_check(
        enc, [&] { return compute_losses(enc, batch, w).total; }, [&] { compute_losses(enc, batch, w); });
    INFO("weights " << w.mlm << "," << w.mpfr << "," << w.cmr << " worst " << res.worst_name);
    CHECK(res.checked == enc.parameter_count());
    CHECK(res.worst < 1e-4);
  }
}

TEST_CASE("matching loss gradients match central differences") {
  auto cfg = testing::tiny_config();
  std::mt19937_64 rng(10);
  const auto batch = testing::random_batch(rng, cfg, 4);
  std::vector<TokenSequence> texts;
  std::vector<PatchSequence> images;
  for (const auto& p : batch) {
    texts.push_back(p.text);
    images.push_back(p.image);
  }
  const std::vector<int> labels = {1, 0, 1, 0};
  auto enc = Encoders::init(cfg);
  enc.heads.match_scale.value.fill(0.8);
  enc.heads.match_bias.value.fill(-0.2);
  auto res = testing::finite_difference_check(
      enc, [&] { return matching_loss(enc, texts, images, labels); },
      [&] { matching_loss(enc, texts, images, labels); });
  INFO("worst " << res.worst_name);
  CHECK(res.worst < 1e-4);
}

TEST_CASE("zero loss weights leave their heads without gradient") {
  auto cfg = testing::tiny_config();
  auto enc = Encoders::init(cfg);
  std::mt19937_64 rng(11);
  auto batch = testing::random_batch(rng, cfg, 3);
  enc.zero_grad();
  compute_losses(enc, batch, {0, 0, 1});
  for (auto* p : {&enc.heads.mlm_w, &enc.heads.mlm_b, &enc.heads.mpfr_w, &enc.heads.mpfr_b})
    for (double g : p->grad.data) CHECK(g == 0.0);
  double tower = 0;
  for (double g : enc.text.tok_emb.grad.data) tower += std::abs(g);
  CHECK(tower > 0);
}
