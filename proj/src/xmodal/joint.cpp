#include "mkg/xmodal/joint.hpp"

#include <cmath>

#include "mkg/error.hpp"
#include "mkg/kernels.hpp"
#include "mkg/xmodal/encoder.hpp"

namespace mkg::xmodal {

JointModel JointModel::init(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  JointModel m;
  m.cfg = cfg;
  m.tok_emb = Param("joint.tok_emb", cfg.vocab_size, d);
  m.patch_w = Param("joint.patch_w", cfg.patch_dim(), d);
  m.patch_b = Param("joint.patch_b", 1, d);
  m.pos_emb = Param("joint.pos_emb", cfg.max_text_len + 1 + cfg.num_patches(), d);
  m.seg_emb = Param("joint.seg_emb", 2, d);
  m.cls_w = Param("joint.cls_w", d, 1);
  m.cls_b = Param("joint.cls_b", 1, 1);
  m.stack = make_stack("joint", cfg);
  std::uint64_t stream = 1000;
  for (auto* p : {&m.tok_emb, &m.pos_emb, &m.seg_emb}) init_normal(*p, 0.1, cfg.seed, stream++);
  init_normal(m.patch_w, 1.0 / std::sqrt(double(cfg.patch_dim())), cfg.seed, stream++);
  init_normal(m.cls_w, 1.0 / std::sqrt(double(d)), cfg.seed, stream++);
  init_stack(m.stack, cfg.seed, stream);
  return m;
}

double single_stream_score(const JointModel& m, const TokenSequence& text, const PatchSequence& image) {
  const auto& cfg = m.cfg;
  const std::size_t nt = text.ids.size(), np = image.count(), d = cfg.d_model;
  if (nt == 0 || nt > cfg.max_text_len + 1 || np > cfg.num_patches() || image.patches.cols != cfg.patch_dim())
    throw Error(ErrorCode::LengthExceeded, "joint input exceeds the configured lengths");
  m.forwards.bump();
  Mat proj;
  kernels::gemm(image.patches, m.patch_w.value, proj);
  Mat x(nt + np, d);
  for (std::size_t i = 0; i < nt; ++i) {
    if (text.ids[i] >= cfg.vocab_size) throw Error(ErrorCode::LengthExceeded, "token id out of vocabulary");
    for (std::size_t j = 0; j < d; ++j)
      x(i, j) = m.tok_emb.value(text.ids[i], j) + m.pos_emb.value(i, j) + m.seg_emb.value(0, j);
  }
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < d; ++j)
      x(nt + i, j) = proj(i, j) + m.patch_b.value.data[j] + m.pos_emb.value(nt + i, j) + m.seg_emb.value(1, j);
  const Mat h = stack_forward(m.stack, cfg.n_heads, std::move(x), nullptr);
  double z = m.cls_b.value.data[0];
  for (std::size_t j = 0; j < d; ++j) z += h(0, j) * m.cls_w.value.data[j];
  return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace mkg::xmodal
