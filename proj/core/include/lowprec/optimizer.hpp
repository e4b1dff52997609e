#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lowprec/matrix.hpp"

namespace lowprec {

enum class Clipping {
  kNone,
  kUpdateClip,  // eta_t = alpha_t / max(1, RMS_t), d fixed to 1
  kGradClip,    // scale all gradients to global L2 norm <= max_grad_norm
};

const char* to_string(Clipping c);
Clipping parse_clipping(const std::string& name);

struct OptimizerHyperparams {
  std::function<double(int64_t)> lr_schedule;  // t -> alpha_t
  double beta1 = 0.9;
  double beta2 = 0.99;
  // When > 0, beta2 follows the warmup schedule 1 - t^-lambda, which is
  // self-debiasing (it starts at 0, forcing full replacement at t=1), so it
  // is used directly where the debiased beta2 would be.
  double beta2_warmup_lambda = 0.0;
  double eps = 1e-6;  // shared by the RMS floor (eps^2) and the sqrt(u)+eps denominator
  double weight_decay = 0.0;
  Clipping clipping = Clipping::kNone;
  double max_grad_norm = 1.0;  // used by kGradClip only
};

// First/second moment, zero-initialized, same shape as the parameter.
struct TensorOptState {
  Matrix v;
  Matrix u;
  static TensorOptState zeros(int64_t rows, int64_t cols);
};

// Fixed-scale loss scaler: the scale never changes; non-finite gradients are
// handled by skipping the affected tensor (or the whole step when
// per_tensor_skip is false).
struct LossScaler {
  double scale = 1.0;
  bool per_tensor_skip = true;
};

// sqrt(mean(g^2 / max(u, eps^2))), accumulated in double.
double compute_rms(const Matrix& g, const Matrix& u, double eps);

// Warmup schedule 1 - t^-lambda, clamped below 1.
double beta2_warmup(int64_t t, double lambda);

// Scales every gradient by max_norm/norm when the concatenated L2 norm
// exceeds max_norm; otherwise leaves them untouched (bit-exact).
void grad_clip_global_norm(std::vector<Matrix>& grads, double max_norm);

struct FilterResult {
  std::vector<Matrix> grads;    // all divided by scaler.scale, including skipped entries
  std::vector<size_t> skipped;  // indices of tensors with any non-finite entry
};

// Unscale gradients and report which tensors must not be applied this step.
// With per_tensor_skip=false a single bad tensor voids the whole step.
FilterResult filter_nonfinite(const std::vector<Matrix>& grads, const LossScaler& scaler);

struct TensorStepInfo {
  double rms = 0.0;  // RMS_t of this tensor, from the already-updated u_t
  double eta = 0.0;  // learning rate actually applied
};

struct TensorRef {
  std::string name;
  Matrix* param = nullptr;
  const Matrix* grad = nullptr;
  TensorOptState* state = nullptr;
};

// One optimizer step over a set of tensors. Per tensor, in order: debiased
// decay rates, moment updates, RMS from the updated u, eta from the clipping
// mode, then the decoupled-weight-decay parameter update. kGradClip computes
// the global norm across exactly the tensors passed in.
std::vector<TensorStepInfo> optimizer_step(std::vector<TensorRef>& tensors,
                                           const OptimizerHyperparams& hp, int64_t t);

}  // namespace lowprec
