#include "mkg/xmodal/faq.hpp"

#include <algorithm>
#include <cmath>

#include "mkg/xmodal/encoder.hpp"
#include "mkg/xmodal/train.hpp"

namespace mkg::xmodal {

namespace {

std::vector<double> unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  if (n == 0.0) return {};
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

EncoderFaqMatcher::EncoderFaqMatcher(const Model& model, const std::vector<qa::FaqEntry>& entries) : model_(model) {
  for (const auto& e : entries) unit_rows_.push_back(unit(encode_text(model_.enc, text_input(model_, e.question)).cls));
}

std::vector<double> EncoderFaqMatcher::similarities(std::string_view query) const {
  std::vector<double> out(unit_rows_.size(), 0.0);
  if (unit_rows_.empty()) return out;
  const auto q = unit(encode_text(model_.enc, text_input(model_, std::string(query))).cls);
  if (q.empty()) return out;
  for (std::size_t i = 0; i < unit_rows_.size(); ++i) {
    if (unit_rows_[i].empty()) continue;
    double dot = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) dot += q[j] * unit_rows_[i][j];
    out[i] = std::clamp(dot, -1.0, 1.0);
  }
  return out;
}

}  // namespace mkg::xmodal
