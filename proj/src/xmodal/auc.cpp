#include "mkg/xmodal/auc.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "mkg/error.hpp"

namespace mkg::xmodal {

AucValue auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::InvalidConfig, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::uint64_t pos = 0;
  for (int l : labels) pos += l ? 1 : 0;
  const std::uint64_t neg = n - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorCode::SingleClass, "AUC needs both positive and negative labels");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Ranks are 1-based; a tie group spanning ranks [lo, hi] shares the
  // average (lo + hi) / 2, kept doubled so everything stays integral.
  std::uint64_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const std::uint64_t doubled = (i + 1) + (j + 1);
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]]) doubled_rank_sum += doubled;
    i = j + 1;
  }
  return AucValue{doubled_rank_sum - pos * (pos + 1), 2 * pos * neg};
}

}  // namespace mkg::xmodal
