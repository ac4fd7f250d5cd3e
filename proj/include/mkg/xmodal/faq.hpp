#pragma once

#include "mkg/qa.hpp"
#include "mkg/xmodal/model.hpp"

namespace mkg::xmodal {

// FAQ similarity as the cosine of text-tower CLS embeddings. Question
// embeddings are computed once at construction.
class EncoderFaqMatcher : public qa::FaqMatcher {
 public:
  EncoderFaqMatcher(const Model& model, const std::vector<qa::FaqEntry>& entries);
  std::vector<double> similarities(std::string_view query) const override;

 private:
  const Model& model_;
  std::vector<std::vector<double>> unit_rows_;  // L2-normalised, empty for a zero vector
};

}  // namespace mkg::xmodal
