#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lowprec/linear.hpp"
#include "lowprec/matrix.hpp"

namespace lowprec {

// Pre-norm transformer acting on one sequence: the batch rows are the tokens.
// Attention and layer norms run in working precision; the six block
// projections (q/k/v/out, mlp w1/w2) route through linear_mode. The embedding
// and head projections always run in Standard mode: they are the
// full-precision first/last tensors whose RMS the telemetry watches.
struct ModelConfig {
  int64_t depth = 2;
  int64_t dim = 64;
  int64_t heads = 4;
  double mlp_ratio = 4.0;
  bool layer_scale_enabled = true;
  double layer_scale_init = 0.0;  // zero makes every block the identity at init
  LinearMode linear_mode;
  bool embed_norm = false;  // layer-norm after the embedding projection
  int64_t input_dim = 32;
  int64_t output_dim = 8;

  int64_t mlp_hidden() const { return int64_t(mlp_ratio * double(dim)); }
};

struct LayerNormParams {
  Matrix gain;  // 1 x dim
  Matrix bias;  // 1 x dim
};

struct BlockParams {
  LayerNormParams norm1;
  Matrix wq, wk, wv, wo;  // dim x dim
  Matrix ls1, ls2;        // 1 x dim; present only when layer scale is enabled
  LayerNormParams norm2;
  Matrix w1;  // hidden x dim
  Matrix w2;  // dim x hidden
};

struct ModelParams {
  Matrix embed;  // dim x input_dim
  LayerNormParams embed_norm;
  std::vector<BlockParams> blocks;
  Matrix head;  // output_dim x dim
};

// Weights ~ N(0, 1/fan_in), gains 1, biases 0, layer scales at
// layer_scale_init; per-tensor streams derived from (seed, tensor index).
ModelParams init_params(const ModelConfig& cfg, uint64_t seed);

// Zero-filled gradients/optimizer-state shapes matching cfg.
ModelParams zeros_like(const ModelConfig& cfg);

// Canonical (name, tensor) enumeration: embed.weight, embed_norm.gain/bias,
// blocks.K.{norm1.gain, norm1.bias, attn.wq/wk/wv/wo, ls1, ls2, norm2.gain,
// norm2.bias, mlp.w1, mlp.w2}, head.weight.
std::vector<std::pair<std::string, Matrix*>> named_tensors(ModelParams& params,
                                                           const ModelConfig& cfg);

struct LayerNormTape {
  Matrix x_hat;                 // normalized input
  std::vector<double> inv_std;  // per row
};

struct BlockTape {
  Matrix x_in;
  LayerNormTape ln1;
  LinearContext q_ctx, k_ctx, v_ctx, o_ctx;
  Matrix q, k, v;                    // tokens x dim
  std::vector<Matrix> attn_weights;  // per head, tokens x tokens, post-softmax
  Matrix attn_concat;                // heads' outputs, tokens x dim
  Matrix attn_out;                   // after the out projection
  Matrix x_mid;                      // x + ls1 * attn_out
  LayerNormTape ln2;
  LinearContext w1_ctx, w2_ctx;
  Matrix h_pre;  // before gelu
  Matrix h;      // after gelu
  Matrix mlp_out;
};

struct ModelTape {
  LinearContext embed_ctx;
  Matrix embed_out;  // before the optional embedding norm
  LayerNormTape embed_ln;
  Matrix x0;  // block stack input
  std::vector<BlockTape> blocks;
  LinearContext head_ctx;
};

// One block: x' = x + ls1 * attn(norm1(x)); out = x' + ls2 * mlp(norm2(x')).
Matrix transformer_block(const ModelConfig& cfg, const BlockParams& params, const Matrix& x,
                         BlockTape* tape = nullptr);

// Returns logits (b x output_dim). feat_absmean, when given, receives
// depth+1 values: mean |x| of the block-stack input and of every block
// output.
Matrix model_forward(const ModelConfig& cfg, const ModelParams& params, const Matrix& inputs,
                     ModelTape* tape = nullptr, std::vector<double>* feat_absmean = nullptr);

// Gradients for every tensor in params; tape must come from model_forward
// over the same params.
ModelParams model_backward(const ModelConfig& cfg, const ModelParams& params,
                           const ModelTape& tape, const Matrix& d_logits);

// Mean over rows of -log softmax(logits)[target]; d_logits (when requested)
// is the gradient of that mean.
double cross_entropy_loss(const Matrix& logits, const std::vector<int64_t>& targets,
                          Matrix* d_logits = nullptr);

// Mean squared error over all entries.
double mse_loss(const Matrix& pred, const Matrix& target, Matrix* d_pred = nullptr);

}  // namespace lowprec
