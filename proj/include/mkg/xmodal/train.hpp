#pragma once

#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "mkg/xmodal/model.hpp"

namespace mkg::xmodal {

// Row k text is paired with row k image.
struct TrainingPair {
  TokenSequence text;
  PatchSequence image;
};
using TrainingBatch = std::vector<TrainingPair>;

struct LossBreakdown {
  double mlm = 0.0;
  double mpfr = 0.0;
  double cmr = 0.0;
  double total = 0.0;  // weighted sum
};

// Computes the weighted pretraining objective on a batch whose mask
// positions are already chosen, and accumulates weight-scaled gradients into
// enc. Terms with weight 0 are skipped entirely (value reported as 0).
// Clean (unmasked) forwards of both towers are shared between CMR and the
// conditioning embeddings of MLM and MPFR.
LossBreakdown compute_losses(Encoders& enc, const TrainingBatch& batch, const LossWeights& w);

// Single-objective entry points (weight 1); each returns the loss value.
double mlm_loss(Encoders& enc, const TrainingBatch& batch);
double mpfr_loss(Encoders& enc, const TrainingBatch& batch);
double cmr_loss(Encoders& enc, const TrainingBatch& batch);

struct CmrResult {
  double loss = 0.0;
  Mat dscores;  // d loss / d S
};
// S[a][b] = dot(image_cls_a, text_cls_b).
CmrResult cmr_from_scores(const Mat& scores);

// Picks max(1, round(prob * n)) distinct positions among the maskable ones
// (token positions 1..n-1; every patch), returned sorted.
std::vector<std::size_t> choose_text_masks(std::mt19937_64& rng, std::size_t length, double prob);
std::vector<std::size_t> choose_patch_masks(std::mt19937_64& rng, std::size_t count, double prob);

struct OptimizerConfig {
  enum class Kind { sgd, momentum, adam };
  Kind kind = Kind::sgd;
  double lr = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global L2 norm; <= 0 disables clipping
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}
  // Clips, then applies one update to every parameter and returns the
  // pre-clip gradient norm.
  double step(Encoders& enc);

  const OptimizerConfig& config() const { return cfg_; }

 private:
  struct Slot {
    Mat m, v;
  };
  OptimizerConfig cfg_;
  std::unordered_map<std::string, Slot> slots_;
  std::uint64_t t_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  OptimizerConfig optimizer;
  std::uint64_t seed = 7;  // shuffling and mask sampling
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown mean;  // per-batch average
};

struct PairExample {
  std::string text;
  RawImage image;  // must already have the configured geometry
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Builds the vocabulary from the corpus text, initializes the encoders from
// cfg (vocab_size is overwritten) and runs the pretraining loop.
Model pretrain(const std::vector<PairExample>& corpus, ModelConfig cfg, const TrainConfig& train,
               std::vector<EpochLog>* log = nullptr, const EpochCallback& on_epoch = {});

struct LabeledPair {
  std::string text;
  RawImage image;
  int label = 0;
};

// sigmoid(tau * dot(text_cls, image_cls) + b)
double match_probability(const Encoders& enc, const TokenSequence& text, const PatchSequence& image);
double match_probability(const Model& model, const std::string& text, const RawImage& image);

// Mean binary cross-entropy of the matching head over the batch; accumulates
// gradients into every tower parameter and the scalar head.
double matching_loss(Encoders& enc, const std::vector<TokenSequence>& texts,
                     const std::vector<PatchSequence>& images, const std::vector<int>& labels);

std::vector<EpochLog> finetune_matching(Model& model, const std::vector<LabeledPair>& set, const TrainConfig& train);

// Text/image inputs shaped for the model; images must match the geometry.
TokenSequence text_input(const Model& model, const std::string& text);
PatchSequence image_input(const ModelConfig& cfg, const RawImage& image);

}  // namespace mkg::xmodal
