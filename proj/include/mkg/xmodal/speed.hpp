#pragma once

#include <cstdint>

#include "mkg/xmodal/model.hpp"

namespace mkg::xmodal {

struct SpeedReport {
  std::size_t candidates = 0;
  double match_seconds = 0.0;   // one match() call over the whole index (best of repeats)
  double joint_seconds = 0.0;   // single_stream_score over every candidate (best of repeats)
  double index_seconds = 0.0;   // offline index build, reported but not compared
  std::uint64_t text_forwards = 0;   // during one match()
  std::uint64_t image_forwards = 0;  // during one match()
  std::uint64_t joint_forwards = 0;  // during one full single-stream scan

  double speedup() const { return joint_seconds / match_seconds; }
};

// Small model used for the timing comparison: d 32, 2 layers, 4 heads,
// 32x32 gray images in 8x8 patches, texts of up to 8 tokens.
ModelConfig toy_config();

// Random candidate images and one query text; both sides see the same
// inputs and weights of the same width and depth.
SpeedReport compare_two_stream(const ModelConfig& cfg, std::size_t candidates, std::size_t repeats,
                               std::uint64_t seed);

}  // namespace mkg::xmodal
