#pragma once

#include <span>
#include <vector>

#include "mkg/xmodal/model.hpp"

namespace mkg::xmodal {

struct LayerNormTrace {
  Mat xhat;
  std::vector<double> rstd;
};

struct BlockTrace {
  Mat x_in;
  LayerNormTrace ln1;
  Mat a_in;           // ln1 output
  Mat q, k, v;        // n x d
  std::vector<Mat> probs;  // per head, n x n
  Mat ctx;            // concatenated head outputs
  Mat x_mid;
  LayerNormTrace ln2;
  Mat f_in;
  Mat h_pre, h_act;
};

struct StackTrace {
  std::vector<BlockTrace> blocks;
  LayerNormTrace ln_f;
};

// Runs the stack on x (n x d). Fills trace when non-null.
Mat stack_forward(const StackParams& s, std::size_t n_heads, Mat x, StackTrace* trace);
// Backpropagates dout through the stack, accumulating parameter gradients;
// returns the gradient with respect to the stack input.
Mat stack_backward(StackParams& s, std::size_t n_heads, const StackTrace& trace, const Mat& dout);

struct TextTrace {
  StackTrace stack;
};

struct ImageTrace {
  StackTrace stack;
};

// Embeds a token sequence. Masked positions take the MASK embedding plus
// `cond` (when non-empty) in place of the token embedding.
Mat embed_text(const Encoders& enc, const TokenSequence& seq, std::span<const double> cond);
Mat embed_image(const Encoders& enc, const PatchSequence& seq, std::span<const double> cond);

// Full tower forward; outputs are n x d_model with row 0 the CLS readout.
Mat forward_text(const Encoders& enc, const TokenSequence& seq, std::span<const double> cond, TextTrace* trace);
Mat forward_image(const Encoders& enc, const PatchSequence& seq, std::span<const double> cond, ImageTrace* trace);

// Accumulates gradients for the tower parameters; returns d(cond) (zeros
// when there is no masked position).
std::vector<double> backward_text(Encoders& enc, const TokenSequence& seq, const TextTrace& trace, const Mat& dout);
std::vector<double> backward_image(Encoders& enc, const PatchSequence& seq, const ImageTrace& trace,
                                   const Mat& dout);

struct StreamOutput {
  std::vector<double> cls;
  Mat outputs;
};

// Read-only inference entry points. Mask positions in the input are applied
// with the plain MASK embedding.
StreamOutput encode_text(const Encoders& enc, const TokenSequence& seq);
StreamOutput encode_image(const Encoders& enc, const PatchSequence& seq);

}  // namespace mkg::xmodal
