#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mkg/image.hpp"
#include "mkg/tensor.hpp"

namespace mkg::xmodal {

struct LossWeights {
  double mlm = 1.0;
  double mpfr = 1.0;
  double cmr = 1.0;
};

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t vocab_size = 0;
  std::size_t max_text_len = 32;  // excluding CLS
  std::size_t patch_size = 8;
  std::size_t image_h = 64;
  std::size_t image_w = 64;
  std::size_t channels = 1;
  double mask_prob = 0.15;
  LossWeights loss_weights;
  std::uint64_t seed = 42;

  std::size_t num_patches() const { return (image_h / patch_size) * (image_w / patch_size); }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  std::size_t ffn_dim() const { return 4 * d_model; }

  void validate() const;  // throws InvalidConfig / IndivisibleDimensions
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Per-character CJK / whitespace-word vocabulary built from a corpus.
class Vocabulary {
 public:
  static constexpr std::uint32_t kCls = 0;
  static constexpr std::uint32_t kUnk = 1;

  Vocabulary();
  static Vocabulary build(const std::vector<std::string>& corpus);
  static Vocabulary from_tokens(std::vector<std::string> tokens);  // tokens[id], specials included

  std::uint32_t id(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// Text encoder input: ids[0] is CLS. mask_positions index into ids and never
// include 0.
struct TokenSequence {
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> mask_positions;
};

// Tokenizes and truncates to max_len tokens after CLS.
TokenSequence encode_text_input(const Vocabulary& vocab, const std::string& text, std::size_t max_len);

// N flattened P x P x C patches in raster order, values scaled to [0, 1].
// mask_positions index patches (0-based, CLS excluded).
struct PatchSequence {
  Mat patches;
  std::vector<std::size_t> mask_positions;

  std::size_t count() const { return patches.rows; }
};

// Throws IndivisibleDimensions when H or W is not a multiple of P.
PatchSequence patchify(const RawImage& img, std::size_t patch_size);
// Exact inverse of patchify on the 8-bit grid.
RawImage unpatchify(const PatchSequence& seq, std::size_t height, std::size_t width, std::size_t channels,
                    std::size_t patch_size);

struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}
};

struct LayerNormParams {
  Param gamma, beta;
};

struct BlockParams {
  LayerNormParams ln1;
  Param wq, bq, wk, bk, wv, bv, wo, bo;
  LayerNormParams ln2;
  Param w1, b1, w2, b2;
};

// Pre-norm transformer stack followed by a final LayerNorm.
struct StackParams {
  std::vector<BlockParams> blocks;
  LayerNormParams ln_f;
};

struct TextParams {
  Param tok_emb, pos_emb, mask_emb;
  StackParams stack;
};

struct ImageParams {
  Param patch_w, patch_b, cls, pos_emb, seg_emb, mask_emb;
  StackParams stack;
};

struct HeadParams {
  Param mlm_w, mlm_b;    // d -> vocab
  Param mpfr_w, mpfr_b;  // d -> P*P*C
  Param match_scale, match_bias;
};

// Counts encoder invocations; copies start from the source value.
struct ForwardCounter {
  mutable std::atomic<std::uint64_t> value{0};

  ForwardCounter() = default;
  ForwardCounter(const ForwardCounter& o) : value(o.value.load()) {}
  ForwardCounter& operator=(const ForwardCounter& o) {
    value = o.value.load();
    return *this;
  }
  void bump() const { value.fetch_add(1, std::memory_order_relaxed); }
  std::uint64_t get() const { return value.load(); }
  void reset() const { value = 0; }
};

// Two independent towers (no cross-attention) plus the pretraining and
// matching heads.
struct Encoders {
  ModelConfig cfg;
  TextParams text;
  ImageParams image;
  HeadParams heads;
  ForwardCounter text_forwards;
  ForwardCounter image_forwards;

  static Encoders init(const ModelConfig& cfg);

  void for_each_param(const std::function<void(Param&)>& fn);
  void for_each_param(const std::function<void(const Param&)>& fn) const;
  void zero_grad();
  std::size_t parameter_count() const;
  Param* find(const std::string& name);
};

// Builds the transformer stack parameters; shared by the towers and the
// single-stream comparator.
StackParams make_stack(const std::string& prefix, const ModelConfig& cfg);
void for_each_param(StackParams& s, const std::function<void(Param&)>& fn);
void for_each_param(const StackParams& s, const std::function<void(const Param&)>& fn);
void init_stack(StackParams& s, std::uint64_t seed, std::uint64_t& stream);

// Deterministic Gaussian fill keyed by (seed, stream).
void init_normal(Param& p, double stddev, std::uint64_t seed, std::uint64_t stream);

struct Model {
  Vocabulary vocab;
  Encoders enc;
};

}  // namespace mkg::xmodal
