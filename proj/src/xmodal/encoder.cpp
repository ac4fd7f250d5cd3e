#include "mkg/xmodal/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "mkg/error.hpp"
#include "mkg/kernels.hpp"

namespace mkg::xmodal {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

Mat layer_norm(const Mat& x, const LayerNormParams& p, LayerNormTrace* trace) {
  const std::size_t n = x.rows, d = x.cols;
  Mat y(n, d);
  if (trace) {
    trace->xhat = Mat(n, d);
    trace->rstd.assign(n, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat = (row[j] - mean) * rstd;
      y(i, j) = xhat * p.gamma.value.data[j] + p.beta.value.data[j];
      if (trace) trace->xhat(i, j) = xhat;
    }
    if (trace) trace->rstd[i] = rstd;
  }
  return y;
}

Mat layer_norm_backward(LayerNormParams& p, const LayerNormTrace& t, const Mat& dy) {
  const std::size_t n = dy.rows, d = dy.cols;
  Mat dx(n, d);
  std::vector<double> g(d);
  for (std::size_t i = 0; i < n; ++i) {
    double mean_g = 0.0, mean_gx = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat = t.xhat(i, j);
      p.gamma.grad.data[j] += dy(i, j) * xhat;
      p.beta.grad.data[j] += dy(i, j);
      g[j] = dy(i, j) * p.gamma.value.data[j];
      mean_g += g[j];
      mean_gx += g[j] * xhat;
    }
    mean_g /= static_cast<double>(d);
    mean_gx /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) dx(i, j) = t.rstd[i] * (g[j] - mean_g - t.xhat(i, j) * mean_gx);
  }
  return dx;
}

Mat linear(const Mat& x, const Param& w, const Param& b) {
  Mat y;
  kernels::gemm(x, w.value, y);
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += b.value.data[j];
  return y;
}

Mat linear_backward(const Mat& x, Param& w, Param& b, const Mat& dy) {
  kernels::gemm_at(x, dy, w.grad, true);
  for (std::size_t i = 0; i < dy.rows; ++i)
    for (std::size_t j = 0; j < dy.cols; ++j) b.grad.data[j] += dy(i, j);
  Mat dx;
  kernels::gemm_bt(dy, w.value, dx);
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

void add_into(Mat& a, const Mat& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

// Multi-head self-attention over the full sequence (no padding: every
// sequence is processed at its own length).
Mat attention(const BlockParams& p, std::size_t heads, const Mat& x, BlockTrace& t) {
  const std::size_t n = x.rows, d = x.cols, dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  t.q = linear(x, p.wq, p.bq);
  t.k = linear(x, p.wk, p.bk);
  t.v = linear(x, p.wv, p.bv);
  t.ctx = Mat(n, d);
  t.probs.assign(heads, Mat(n, n));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    Mat& prob = t.probs[h];
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += t.q(i, off + c) * t.k(j, off + c);
        prob(i, j) = s * scale;
        mx = std::max(mx, prob(i, j));
      }
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) z += (prob(i, j) = std::exp(prob(i, j) - mx));
      for (std::size_t j = 0; j < n; ++j) prob(i, j) /= z;
      for (std::size_t j = 0; j < n; ++j) {
        const double pij = prob(i, j);
        for (std::size_t c = 0; c < dh; ++c) t.ctx(i, off + c) += pij * t.v(j, off + c);
      }
    }
  }
  return linear(t.ctx, p.wo, p.bo);
}

Mat attention_backward(BlockParams& p, std::size_t heads, const BlockTrace& t, const Mat& dout) {
  const std::size_t n = dout.rows, d = dout.cols, dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Mat dctx = linear_backward(t.ctx, p.wo, p.bo, dout);
  Mat dq(n, d), dk(n, d), dv(n, d);
  Mat dprob(n, n);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    const Mat& prob = t.probs[h];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += dctx(i, off + c) * t.v(j, off + c);
        dprob(i, j) = s;
        for (std::size_t c = 0; c < dh; ++c) dv(j, off + c) += prob(i, j) * dctx(i, off + c);
      }
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += dprob(i, j) * prob(i, j);
      for (std::size_t j = 0; j < n; ++j) {
        const double ds = prob(i, j) * (dprob(i, j) - dot) * scale;
        if (ds == 0.0) continue;
        for (std::size_t c = 0; c < dh; ++c) {
          dq(i, off + c) += ds * t.k(j, off + c);
          dk(j, off + c) += ds * t.q(i, off + c);
        }
      }
    }
  }
  Mat dx = linear_backward(t.a_in, p.wq, p.bq, dq);
  add_into(dx, linear_backward(t.a_in, p.wk, p.bk, dk));
  add_into(dx, linear_backward(t.a_in, p.wv, p.bv, dv));
  return dx;
}

Mat block_forward(const BlockParams& p, std::size_t heads, Mat x, BlockTrace& t) {
  t.x_in = std::move(x);
  t.a_in = layer_norm(t.x_in, p.ln1, &t.ln1);
  t.x_mid = attention(p, heads, t.a_in, t);
  add_into(t.x_mid, t.x_in);
  t.f_in = layer_norm(t.x_mid, p.ln2, &t.ln2);
  t.h_pre = linear(t.f_in, p.w1, p.b1);
  t.h_act = t.h_pre;
  for (auto& v : t.h_act.data) v = gelu(v);
  Mat out = linear(t.h_act, p.w2, p.b2);
  add_into(out, t.x_mid);
  return out;
}

Mat block_backward(BlockParams& p, std::size_t heads, const BlockTrace& t, const Mat& dout) {
  Mat dh = linear_backward(t.h_act, p.w2, p.b2, dout);
  for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] *= gelu_grad(t.h_pre.data[i]);
  const Mat df = linear_backward(t.f_in, p.w1, p.b1, dh);
  Mat dmid = layer_norm_backward(p.ln2, t.ln2, df);
  add_into(dmid, dout);
  const Mat da = attention_backward(p, heads, t, dmid);
  Mat dx = layer_norm_backward(p.ln1, t.ln1, da);
  add_into(dx, dmid);
  return dx;
}

bool is_masked(const std::vector<std::size_t>& masks, std::size_t pos) {
  return std::find(masks.begin(), masks.end(), pos) != masks.end();
}

}  // namespace

Mat stack_forward(const StackParams& s, std::size_t n_heads, Mat x, StackTrace* trace) {
  if (trace) trace->blocks.assign(s.blocks.size(), {});
  BlockTrace scratch;
  for (std::size_t l = 0; l < s.blocks.size(); ++l)
    x = block_forward(s.blocks[l], n_heads, std::move(x), trace ? trace->blocks[l] : scratch);
  return layer_norm(x, s.ln_f, trace ? &trace->ln_f : nullptr);
}

Mat stack_backward(StackParams& s, std::size_t n_heads, const StackTrace& trace, const Mat& dout) {
  Mat d = layer_norm_backward(s.ln_f, trace.ln_f, dout);
  for (std::size_t l = s.blocks.size(); l-- > 0;) d = block_backward(s.blocks[l], n_heads, trace.blocks[l], d);
  return d;
}

// ---------------------------------------------------------------------------

Mat embed_text(const Encoders& enc, const TokenSequence& seq, std::span<const double> cond) {
  const auto& cfg = enc.cfg;
  const std::size_t n = seq.ids.size(), d = cfg.d_model;
  if (n == 0 || n > cfg.max_text_len + 1)
    throw Error(ErrorCode::LengthExceeded, "text length " + std::to_string(n) + " exceeds " +
                                               std::to_string(cfg.max_text_len + 1));
  Mat x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const bool masked = i > 0 && is_masked(seq.mask_positions, i);
    if (!masked && seq.ids[i] >= cfg.vocab_size) throw Error(ErrorCode::LengthExceeded, "token id out of vocabulary");
    for (std::size_t j = 0; j < d; ++j) {
      double v = enc.text.pos_emb.value(i, j);
      if (masked) {
        v += enc.text.mask_emb.value.data[j] + (cond.empty() ? 0.0 : cond[j]);
      } else {
        v += enc.text.tok_emb.value(seq.ids[i], j);
      }
      x(i, j) = v;
    }
  }
  return x;
}

Mat embed_image(const Encoders& enc, const PatchSequence& seq, std::span<const double> cond) {
  const auto& cfg = enc.cfg;
  const std::size_t n = seq.count(), d = cfg.d_model;
  if (n > cfg.num_patches()) throw Error(ErrorCode::LengthExceeded, "too many patches");
  if (seq.patches.cols != cfg.patch_dim()) throw Error(ErrorCode::LengthExceeded, "patch dimension mismatch");
  Mat proj;
  kernels::gemm(seq.patches, enc.image.patch_w.value, proj);
  Mat x(n + 1, d);
  for (std::size_t j = 0; j < d; ++j)
    x(0, j) = enc.image.cls.value.data[j] + enc.image.pos_emb.value(0, j) + enc.image.seg_emb.value.data[j];
  for (std::size_t i = 0; i < n; ++i) {
    const bool masked = is_masked(seq.mask_positions, i);
    for (std::size_t j = 0; j < d; ++j) {
      double v = enc.image.pos_emb.value(i + 1, j) + enc.image.seg_emb.value.data[j];
      if (masked) {
        v += enc.image.mask_emb.value.data[j] + (cond.empty() ? 0.0 : cond[j]);
      } else {
        v += proj(i, j) + enc.image.patch_b.value.data[j];
      }
      x(i + 1, j) = v;
    }
  }
  return x;
}

Mat forward_text(const Encoders& enc, const TokenSequence& seq, std::span<const double> cond, TextTrace* trace) {
  enc.text_forwards.bump();
  return stack_forward(enc.text.stack, enc.cfg.n_heads, embed_text(enc, seq, cond), trace ? &trace->stack : nullptr);
}

Mat forward_image(const Encoders& enc, const PatchSequence& seq, std::span<const double> cond, ImageTrace* trace) {
  enc.image_forwards.bump();
  return stack_forward(enc.image.stack, enc.cfg.n_heads, embed_image(enc, seq, cond),
                       trace ? &trace->stack : nullptr);
}

std::vector<double> backward_text(Encoders& enc, const TokenSequence& seq, const TextTrace& trace, const Mat& dout) {
  const Mat dx = stack_backward(enc.text.stack, enc.cfg.n_heads, trace.stack, dout);
  const std::size_t d = enc.cfg.d_model;
  std::vector<double> dcond(d, 0.0);
  for (std::size_t i = 0; i < dx.rows; ++i) {
    const bool masked = i > 0 && is_masked(seq.mask_positions, i);
    for (std::size_t j = 0; j < d; ++j) {
      const double g = dx(i, j);
      enc.text.pos_emb.grad(i, j) += g;
      if (masked) {
        enc.text.mask_emb.grad.data[j] += g;
        dcond[j] += g;
      } else {
        enc.text.tok_emb.grad(seq.ids[i], j) += g;
      }
    }
  }
  return dcond;
}

std::vector<double> backward_image(Encoders& enc, const PatchSequence& seq, const ImageTrace& trace,
                                   const Mat& dout) {
  const Mat dx = stack_backward(enc.image.stack, enc.cfg.n_heads, trace.stack, dout);
  const std::size_t d = enc.cfg.d_model, n = seq.count();
  std::vector<double> dcond(d, 0.0);
  Mat dproj(n, d);  // zero rows for masked patches
  for (std::size_t j = 0; j < d; ++j) {
    enc.image.cls.grad.data[j] += dx(0, j);
    enc.image.pos_emb.grad(0, j) += dx(0, j);
    enc.image.seg_emb.grad.data[j] += dx(0, j);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const bool masked = is_masked(seq.mask_positions, i);
    for (std::size_t j = 0; j < d; ++j) {
      const double g = dx(i + 1, j);
      enc.image.pos_emb.grad(i + 1, j) += g;
      enc.image.seg_emb.grad.data[j] += g;
      if (masked) {
        enc.image.mask_emb.grad.data[j] += g;
        dcond[j] += g;
      } else {
        enc.image.patch_b.grad.data[j] += g;
        dproj(i, j) = g;
      }
    }
  }
  kernels::gemm_at(seq.patches, dproj, enc.image.patch_w.grad, true);
  return dcond;
}

StreamOutput encode_text(const Encoders& enc, const TokenSequence& seq) {
  StreamOutput out;
  out.outputs = forward_text(enc, seq, {}, nullptr);
  auto row = out.outputs.row(0);
  out.cls.assign(row.begin(), row.end());
  return out;
}

StreamOutput encode_image(const Encoders& enc, const PatchSequence& seq) {
  StreamOutput out;
  out.outputs = forward_image(enc, seq, {}, nullptr);
  auto row = out.outputs.row(0);
  out.cls.assign(row.begin(), row.end());
  return out;
}

}  // namespace mkg::xmodal
