#pragma once

#include <cstdint>
#include <span>

namespace mkg::xmodal {

// AUC as an exact fraction numerator / denominator (not reduced).
struct AucValue {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 1;

  double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
};

// Mann-Whitney statistic with ties counted half. labels are 0/1.
// Throws SingleClass when either class is absent.
AucValue auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace mkg::xmodal
