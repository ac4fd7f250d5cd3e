#pragma once

#include "mkg/xmodal/model.hpp"

namespace mkg::xmodal {

// Single-stream comparator: text tokens and image patches concatenated into
// one self-attention stack of the same width and depth as a tower. Used only
// as a cost model; it is never trained.
struct JointModel {
  ModelConfig cfg;
  Param tok_emb, patch_w, patch_b, pos_emb, seg_emb, cls_w, cls_b;
  StackParams stack;
  ForwardCounter forwards;

  static JointModel init(const ModelConfig& cfg);
};

// Runs the full joint forward for one pair; every call is a fresh forward.
double single_stream_score(const JointModel& model, const TokenSequence& text, const PatchSequence& image);

}  // namespace mkg::xmodal
