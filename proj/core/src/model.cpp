#include "lowprec/model.hpp"

#include <cmath>
#include <stdexcept>

namespace lowprec {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

const LinearMode kStandardMode{};  // Standard variant, format irrelevant

void check_config(const ModelConfig& cfg) {
  if (cfg.depth < 1 || cfg.dim < 1 || cfg.heads < 1 || cfg.input_dim < 1 ||
      cfg.output_dim < 1)
    throw std::invalid_argument("model config: dimensions must be >= 1");
  if (cfg.dim % cfg.heads != 0)
    throw std::invalid_argument("model config: dim must be divisible by heads");
  if (cfg.mlp_hidden() < 1)
    throw std::invalid_argument("model config: mlp hidden width must be >= 1");
}

Matrix constant_row(int64_t cols, float value) {
  Matrix m(1, cols);
  for (int64_t j = 0; j < cols; ++j) m(0, j) = value;
  return m;
}

// y = gain * (x - mean)/sqrt(var + eps) + bias, row-wise
Matrix layer_norm_forward(const Matrix& x, const LayerNormParams& p, LayerNormTape* tape) {
  const int64_t b = x.rows(), d = x.cols();
  Matrix y(b, d);
  if (tape) {
    tape->x_hat = Matrix(b, d);
    tape->inv_std.assign(size_t(b), 0.0);
  }
  for (int64_t i = 0; i < b; ++i) {
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += double(x(i, j));
    mean /= double(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double c = double(x(i, j)) - mean;
      var += c * c;
    }
    var /= double(d);
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    if (tape) tape->inv_std[size_t(i)] = inv;
    for (int64_t j = 0; j < d; ++j) {
      const double xh = (double(x(i, j)) - mean) * inv;
      if (tape) tape->x_hat(i, j) = float(xh);
      y(i, j) = float(double(p.gain(0, j)) * xh + double(p.bias(0, j)));
    }
  }
  return y;
}

struct LayerNormGrads {
  Matrix dx;
  Matrix dgain;
  Matrix dbias;
};

LayerNormGrads layer_norm_backward(const Matrix& dy, const LayerNormParams& p,
                                   const LayerNormTape& tape) {
  const int64_t b = dy.rows(), d = dy.cols();
  LayerNormGrads g;
  g.dx = Matrix(b, d);
  g.dgain = Matrix(1, d);
  g.dbias = Matrix(1, d);
  std::vector<double> dgain(size_t(d), 0.0), dbias(size_t(d), 0.0);
  for (int64_t i = 0; i < b; ++i) {
    double m1 = 0.0, m2 = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double dxh = double(dy(i, j)) * double(p.gain(0, j));
      m1 += dxh;
      m2 += dxh * double(tape.x_hat(i, j));
    }
    m1 /= double(d);
    m2 /= double(d);
    const double inv = tape.inv_std[size_t(i)];
    for (int64_t j = 0; j < d; ++j) {
      const double dxh = double(dy(i, j)) * double(p.gain(0, j));
      g.dx(i, j) = float(inv * (dxh - m1 - double(tape.x_hat(i, j)) * m2));
      dgain[size_t(j)] += double(dy(i, j)) * double(tape.x_hat(i, j));
      dbias[size_t(j)] += double(dy(i, j));
    }
  }
  for (int64_t j = 0; j < d; ++j) {
    g.dgain(0, j) = float(dgain[size_t(j)]);
    g.dbias(0, j) = float(dbias[size_t(j)]);
  }
  return g;
}

Matrix slice_cols(const Matrix& m, int64_t c0, int64_t c1) {
  Matrix s(m.rows(), c1 - c0);
  for (int64_t i = 0; i < m.rows(); ++i)
    for (int64_t j = c0; j < c1; ++j) s(i, j - c0) = m(i, j);
  return s;
}

void paste_cols(Matrix& dst, const Matrix& src, int64_t c0) {
  for (int64_t i = 0; i < src.rows(); ++i)
    for (int64_t j = 0; j < src.cols(); ++j) dst(i, c0 + j) = src(i, j);
}

Matrix softmax_rows(const Matrix& s) {
  Matrix a(s.rows(), s.cols());
  for (int64_t i = 0; i < s.rows(); ++i) {
    double mx = double(s(i, 0));
    for (int64_t j = 1; j < s.cols(); ++j) mx = std::max(mx, double(s(i, j)));
    double denom = 0.0;
    for (int64_t j = 0; j < s.cols(); ++j) denom += std::exp(double(s(i, j)) - mx);
    for (int64_t j = 0; j < s.cols(); ++j)
      a(i, j) = float(std::exp(double(s(i, j)) - mx) / denom);
  }
  return a;
}

// dS = A * (dA - rowsum(dA * A)), scaled by `scale`
Matrix softmax_backward(const Matrix& a, const Matrix& da, double scale) {
  Matrix ds(a.rows(), a.cols());
  for (int64_t i = 0; i < a.rows(); ++i) {
    double dot = 0.0;
    for (int64_t j = 0; j < a.cols(); ++j) dot += double(da(i, j)) * double(a(i, j));
    for (int64_t j = 0; j < a.cols(); ++j)
      ds(i, j) = float(double(a(i, j)) * (double(da(i, j)) - dot) * scale);
  }
  return ds;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// y = x + ls * branch (ls broadcast over rows; identity scale when disabled)
Matrix residual_add(const Matrix& x, const Matrix& branch, const Matrix* ls) {
  Matrix y(x.rows(), x.cols());
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t j = 0; j < x.cols(); ++j) {
      const double s = ls ? double((*ls)(0, j)) : 1.0;
      y(i, j) = float(double(x(i, j)) + s * double(branch(i, j)));
    }
  return y;
}

Matrix scale_cols(const Matrix& d, const Matrix* ls) {
  if (!ls) return d;
  Matrix y(d.rows(), d.cols());
  for (int64_t i = 0; i < d.rows(); ++i)
    for (int64_t j = 0; j < d.cols(); ++j)
      y(i, j) = float(double(d(i, j)) * double((*ls)(0, j)));
  return y;
}

Matrix ls_grad(const Matrix& d, const Matrix& branch) {
  Matrix g(1, d.cols());
  for (int64_t j = 0; j < d.cols(); ++j) {
    double acc = 0.0;
    for (int64_t i = 0; i < d.rows(); ++i) acc += double(d(i, j)) * double(branch(i, j));
    g(0, j) = float(acc);
  }
  return g;
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix y(a.rows(), a.cols());
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t j = 0; j < a.cols(); ++j)
      y(i, j) = float(double(a(i, j)) + double(b(i, j)));
  return y;
}

void add_into(Matrix& a, const Matrix& b) {
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t j = 0; j < a.cols(); ++j)
      a(i, j) = float(double(a(i, j)) + double(b(i, j)));
}

double abs_mean(const Matrix& m) {
  double acc = 0.0;
  const int64_t n = m.rows() * m.cols();
  for (int64_t i = 0; i < n; ++i) acc += std::abs(double(m.data()[i]));
  return acc / double(n);
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, uint64_t seed) {
  check_config(cfg);
  ModelParams p = zeros_like(cfg);
  uint64_t idx = 0;
  auto weight = [&](int64_t rows, int64_t cols) {
    const double stdev = 1.0 / std::sqrt(double(cols));
    return gaussian_matrix(rows, cols, 0.0, stdev, derive_seed(seed, idx++));
  };
  p.embed = weight(cfg.dim, cfg.input_dim);
  if (cfg.embed_norm) {
    p.embed_norm.gain = constant_row(cfg.dim, 1.0f);
    p.embed_norm.bias = constant_row(cfg.dim, 0.0f);
  }
  for (BlockParams& blk : p.blocks) {
    blk.norm1.gain = constant_row(cfg.dim, 1.0f);
    blk.norm1.bias = constant_row(cfg.dim, 0.0f);
    blk.wq = weight(cfg.dim, cfg.dim);
    blk.wk = weight(cfg.dim, cfg.dim);
    blk.wv = weight(cfg.dim, cfg.dim);
    blk.wo = weight(cfg.dim, cfg.dim);
    if (cfg.layer_scale_enabled) {
      blk.ls1 = constant_row(cfg.dim, float(cfg.layer_scale_init));
      blk.ls2 = constant_row(cfg.dim, float(cfg.layer_scale_init));
    }
    blk.norm2.gain = constant_row(cfg.dim, 1.0f);
    blk.norm2.bias = constant_row(cfg.dim, 0.0f);
    blk.w1 = weight(cfg.mlp_hidden(), cfg.dim);
    blk.w2 = weight(cfg.dim, cfg.mlp_hidden());
  }
  p.head = weight(cfg.output_dim, cfg.dim);
  return p;
}

ModelParams zeros_like(const ModelConfig& cfg) {
  check_config(cfg);
  ModelParams p;
  p.embed = Matrix(cfg.dim, cfg.input_dim);
  if (cfg.embed_norm) {
    p.embed_norm.gain = Matrix(1, cfg.dim);
    p.embed_norm.bias = Matrix(1, cfg.dim);
  }
  p.blocks.resize(size_t(cfg.depth));
  for (BlockParams& blk : p.blocks) {
    blk.norm1.gain = Matrix(1, cfg.dim);
    blk.norm1.bias = Matrix(1, cfg.dim);
    blk.wq = Matrix(cfg.dim, cfg.dim);
    blk.wk = Matrix(cfg.dim, cfg.dim);
    blk.wv = Matrix(cfg.dim, cfg.dim);
    blk.wo = Matrix(cfg.dim, cfg.dim);
    if (cfg.layer_scale_enabled) {
      blk.ls1 = Matrix(1, cfg.dim);
      blk.ls2 = Matrix(1, cfg.dim);
    }
    blk.norm2.gain = Matrix(1, cfg.dim);
    blk.norm2.bias = Matrix(1, cfg.dim);
    blk.w1 = Matrix(cfg.mlp_hidden(), cfg.dim);
    blk.w2 = Matrix(cfg.dim, cfg.mlp_hidden());
  }
  p.head = Matrix(cfg.output_dim, cfg.dim);
  return p;
}

std::vector<std::pair<std::string, Matrix*>> named_tensors(ModelParams& params,
                                                           const ModelConfig& cfg) {
  std::vector<std::pair<std::string, Matrix*>> out;
  out.emplace_back("embed.weight", &params.embed);
  if (cfg.embed_norm) {
    out.emplace_back("embed_norm.gain", &params.embed_norm.gain);
    out.emplace_back("embed_norm.bias", &params.embed_norm.bias);
  }
  for (size_t k = 0; k < params.blocks.size(); ++k) {
    const std::string pre = "blocks." + std::to_string(k) + ".";
    BlockParams& blk = params.blocks[k];
    out.emplace_back(pre + "norm1.gain", &blk.norm1.gain);
    out.emplace_back(pre + "norm1.bias", &blk.norm1.bias);
    out.emplace_back(pre + "attn.wq", &blk.wq);
    out.emplace_back(pre + "attn.wk", &blk.wk);
    out.emplace_back(pre + "attn.wv", &blk.wv);
    out.emplace_back(pre + "attn.wo", &blk.wo);
    if (cfg.layer_scale_enabled) {
      out.emplace_back(pre + "ls1", &blk.ls1);
      out.emplace_back(pre + "ls2", &blk.ls2);
    }
    out.emplace_back(pre + "norm2.gain", &blk.norm2.gain);
    out.emplace_back(pre + "norm2.bias", &blk.norm2.bias);
    out.emplace_back(pre + "mlp.w1", &blk.w1);
    out.emplace_back(pre + "mlp.w2", &blk.w2);
  }
  out.emplace_back("head.weight", &params.head);
  return out;
}

Matrix transformer_block(const ModelConfig& cfg, const BlockParams& params, const Matrix& x,
                         BlockTape* tape) {
  check_config(cfg);
  if (x.cols() != cfg.dim)
    throw std::invalid_argument("transformer_block: input width != dim");
  const int64_t tokens = x.rows();
  const int64_t dh = cfg.dim / cfg.heads;
  const double scale = 1.0 / std::sqrt(double(dh));
  const Matrix* ls1 = cfg.layer_scale_enabled ? &params.ls1 : nullptr;
  const Matrix* ls2 = cfg.layer_scale_enabled ? &params.ls2 : nullptr;

  BlockTape local;
  BlockTape& tp = tape ? *tape : local;
  tp.x_in = x;

  const Matrix ln1_out = layer_norm_forward(x, params.norm1, &tp.ln1);
  tp.q = linear_forward(cfg.linear_mode, ln1_out, params.wq, &tp.q_ctx);
  tp.k = linear_forward(cfg.linear_mode, ln1_out, params.wk, &tp.k_ctx);
  tp.v = linear_forward(cfg.linear_mode, ln1_out, params.wv, &tp.v_ctx);

  tp.attn_weights.clear();
  tp.attn_concat = Matrix(tokens, cfg.dim);
  for (int64_t h = 0; h < cfg.heads; ++h) {
    const int64_t c0 = h * dh, c1 = c0 + dh;
    const Matrix qh = slice_cols(tp.q, c0, c1);
    const Matrix kh = slice_cols(tp.k, c0, c1);
    const Matrix vh = slice_cols(tp.v, c0, c1);
    Matrix scores = matmul(qh, kh);  // q . k^T
    for (int64_t i = 0; i < tokens; ++i)
      for (int64_t j = 0; j < tokens; ++j)
        scores(i, j) = float(double(scores(i, j)) * scale);
    Matrix a = softmax_rows(scores);
    const Matrix oh = matmul(a, vh.transposed());  // a . v
    paste_cols(tp.attn_concat, oh, c0);
    tp.attn_weights.push_back(std::move(a));
  }

  tp.attn_out = linear_forward(cfg.linear_mode, tp.attn_concat, params.wo, &tp.o_ctx);
  tp.x_mid = residual_add(x, tp.attn_out, ls1);

  const Matrix ln2_out = layer_norm_forward(tp.x_mid, params.norm2, &tp.ln2);
  tp.h_pre = linear_forward(cfg.linear_mode, ln2_out, params.w1, &tp.w1_ctx);
  tp.h = Matrix(tokens, cfg.mlp_hidden());
  for (int64_t i = 0; i < tokens; ++i)
    for (int64_t j = 0; j < cfg.mlp_hidden(); ++j)
      tp.h(i, j) = float(gelu(double(tp.h_pre(i, j))));
  tp.mlp_out = linear_forward(cfg.linear_mode, tp.h, params.w2, &tp.w2_ctx);

  return residual_add(tp.x_mid, tp.mlp_out, ls2);
}

namespace {

// Gradients of one block; returns d(input) and fills the block's grad slot.
Matrix block_backward(const ModelConfig& cfg, const BlockParams& params, const BlockTape& tp,
                      const Matrix& d_out, BlockParams& grads) {
  const int64_t tokens = tp.x_in.rows();
  const int64_t dh = cfg.dim / cfg.heads;
  const double scale = 1.0 / std::sqrt(double(dh));
  const Matrix* ls1 = cfg.layer_scale_enabled ? &params.ls1 : nullptr;
  const Matrix* ls2 = cfg.layer_scale_enabled ? &params.ls2 : nullptr;

  // out = x_mid + ls2 * mlp_out
  Matrix d_xmid = d_out;
  if (cfg.layer_scale_enabled) grads.ls2 = ls_grad(d_out, tp.mlp_out);
  const Matrix d_mlp_out = scale_cols(d_out, ls2);

  auto [d_h, d_w2] = linear_backward(cfg.linear_mode, tp.w2_ctx, d_mlp_out);
  grads.w2 = std::move(d_w2);
  Matrix d_hpre(tokens, cfg.mlp_hidden());
  for (int64_t i = 0; i < tokens; ++i)
    for (int64_t j = 0; j < cfg.mlp_hidden(); ++j)
      d_hpre(i, j) = float(double(d_h(i, j)) * gelu_grad(double(tp.h_pre(i, j))));
  auto [d_ln2_out, d_w1] = linear_backward(cfg.linear_mode, tp.w1_ctx, d_hpre);
  grads.w1 = std::move(d_w1);

  LayerNormGrads ln2g = layer_norm_backward(d_ln2_out, params.norm2, tp.ln2);
  grads.norm2.gain = std::move(ln2g.dgain);
  grads.norm2.bias = std::move(ln2g.dbias);
  add_into(d_xmid, ln2g.dx);

  // x_mid = x_in + ls1 * attn_out
  Matrix d_x = d_xmid;
  if (cfg.layer_scale_enabled) grads.ls1 = ls_grad(d_xmid, tp.attn_out);
  const Matrix d_attn_out = scale_cols(d_xmid, ls1);

  auto [d_concat, d_wo] = linear_backward(cfg.linear_mode, tp.o_ctx, d_attn_out);
  grads.wo = std::move(d_wo);

  Matrix dq(tokens, cfg.dim), dk(tokens, cfg.dim), dv(tokens, cfg.dim);
  for (int64_t h = 0; h < cfg.heads; ++h) {
    const int64_t c0 = h * dh, c1 = c0 + dh;
    const Matrix qh = slice_cols(tp.q, c0, c1);
    const Matrix kh = slice_cols(tp.k, c0, c1);
    const Matrix vh = slice_cols(tp.v, c0, c1);
    const Matrix doh = slice_cols(d_concat, c0, c1);
    const Matrix& a = tp.attn_weights[size_t(h)];

    const Matrix da = matmul(doh, vh);  // dO . V^T
    const Matrix dvh = matmul(a.transposed(), doh.transposed());  // A^T . dO
    const Matrix ds = softmax_backward(a, da, scale);
    const Matrix dqh = matmul(ds, kh.transposed());               // dS . K
    const Matrix dkh = matmul(ds.transposed(), qh.transposed());  // dS^T . Q
    paste_cols(dq, dqh, c0);
    paste_cols(dk, dkh, c0);
    paste_cols(dv, dvh, c0);
  }

  auto [d_ln1_q, d_wq] = linear_backward(cfg.linear_mode, tp.q_ctx, dq);
  auto [d_ln1_k, d_wk] = linear_backward(cfg.linear_mode, tp.k_ctx, dk);
  auto [d_ln1_v, d_wv] = linear_backward(cfg.linear_mode, tp.v_ctx, dv);
  grads.wq = std::move(d_wq);
  grads.wk = std::move(d_wk);
  grads.wv = std::move(d_wv);
  Matrix d_ln1_out = add(add(d_ln1_q, d_ln1_k), d_ln1_v);

  LayerNormGrads ln1g = layer_norm_backward(d_ln1_out, params.norm1, tp.ln1);
  grads.norm1.gain = std::move(ln1g.dgain);
  grads.norm1.bias = std::move(ln1g.dbias);
  add_into(d_x, ln1g.dx);
  return d_x;
}

}  // namespace

Matrix model_forward(const ModelConfig& cfg, const ModelParams& params, const Matrix& inputs,
                     ModelTape* tape, std::vector<double>* feat_absmean) {
  check_config(cfg);
  if (inputs.cols() != cfg.input_dim)
    throw std::invalid_argument("model_forward: input width != input_dim");
  if (int64_t(params.blocks.size()) != cfg.depth)
    throw std::invalid_argument("model_forward: params depth != config depth");

  ModelTape local;
  ModelTape& tp = tape ? *tape : local;
  tp.blocks.resize(size_t(cfg.depth));
  if (feat_absmean) feat_absmean->clear();

  tp.embed_out = linear_forward(kStandardMode, inputs, params.embed, &tp.embed_ctx);
  tp.x0 = cfg.embed_norm ? layer_norm_forward(tp.embed_out, params.embed_norm, &tp.embed_ln)
                         : tp.embed_out;
  if (feat_absmean) feat_absmean->push_back(abs_mean(tp.x0));

  Matrix x = tp.x0;
  for (int64_t k = 0; k < cfg.depth; ++k) {
    x = transformer_block(cfg, params.blocks[size_t(k)], x, &tp.blocks[size_t(k)]);
    if (feat_absmean) feat_absmean->push_back(abs_mean(x));
  }

  return linear_forward(kStandardMode, x, params.head, &tp.head_ctx);
}

ModelParams model_backward(const ModelConfig& cfg, const ModelParams& params,
                           const ModelTape& tape, const Matrix& d_logits) {
  ModelParams grads = zeros_like(cfg);

  auto [d_x, d_head] = linear_backward(kStandardMode, tape.head_ctx, d_logits);
  grads.head = std::move(d_head);

  for (int64_t k = cfg.depth - 1; k >= 0; --k)
    d_x = block_backward(cfg, params.blocks[size_t(k)], tape.blocks[size_t(k)], d_x,
                         grads.blocks[size_t(k)]);

  Matrix d_embed_out;
  if (cfg.embed_norm) {
    LayerNormGrads lng = layer_norm_backward(d_x, params.embed_norm, tape.embed_ln);
    grads.embed_norm.gain = std::move(lng.dgain);
    grads.embed_norm.bias = std::move(lng.dbias);
    d_embed_out = std::move(lng.dx);
  } else {
    d_embed_out = std::move(d_x);
  }
  auto [d_inputs, d_embed] = linear_backward(kStandardMode, tape.embed_ctx, d_embed_out);
  (void)d_inputs;
  grads.embed = std::move(d_embed);
  return grads;
}

double cross_entropy_loss(const Matrix& logits, const std::vector<int64_t>& targets,
                          Matrix* d_logits) {
  const int64_t b = logits.rows(), c = logits.cols();
  if (int64_t(targets.size()) != b)
    throw std::invalid_argument("cross_entropy_loss: one target per row required");
  for (int64_t t : targets)
    if (t < 0 || t >= c) throw std::invalid_argument("cross_entropy_loss: target out of range");
  if (d_logits) *d_logits = Matrix(b, c);
  double total = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    double mx = double(logits(i, 0));
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, double(logits(i, j)));
    double denom = 0.0;
    for (int64_t j = 0; j < c; ++j) denom += std::exp(double(logits(i, j)) - mx);
    const int64_t t = targets[size_t(i)];
    total += std::log(denom) - (double(logits(i, t)) - mx);
    if (d_logits) {
      for (int64_t j = 0; j < c; ++j) {
        const double p = std::exp(double(logits(i, j)) - mx) / denom;
        (*d_logits)(i, j) = float((p - (j == t ? 1.0 : 0.0)) / double(b));
      }
    }
  }
  return total / double(b);
}

double mse_loss(const Matrix& pred, const Matrix& target, Matrix* d_pred) {
  if (!pred.same_shape(target)) throw std::invalid_argument("mse_loss: shape mismatch");
  const int64_t n = pred.rows() * pred.cols();
  if (d_pred) *d_pred = Matrix(pred.rows(), pred.cols());
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = double(pred.data()[i]) - double(target.data()[i]);
    total += d * d;
    if (d_pred) d_pred->data()[i] = float(2.0 * d / double(n));
  }
  return total / double(n);
}

}  // namespace lowprec
