#pragma once

#include <string>
#include <utility>

#include "lowprec/matrix.hpp"
#include "lowprec/quantize.hpp"

namespace lowprec {

// Standard     — full-precision forward and backward (the reference layer).
// SwitchBack   — int8/fp8 forward and input-gradient matmuls (row-wise
//                activations, tensor-wise weights); the weight gradient is
//                computed in working precision, whose inner dimension
//                (batch*sequence) is where quantization noise is largest.
// SwitchBackM  — SwitchBack that saves only quantized tensors for backward;
//                the weight gradient runs on the dequantized activations.
// SwitchBackQ  — row-wise activations against row-wise weights forward;
//                backward re-quantizes the weight column-wise (transposed).
// AllQuant     — the fully quantized baseline: the weight gradient also runs
//                through the quantized path (int8: row-wise on both G^T and
//                X^T; fp8: tensor-wise on everything).
enum class LinearVariant { kStandard, kSwitchBack, kSwitchBackM, kSwitchBackQ, kAllQuant };

enum class NumericFormat { kInt8, kFp8 };

const char* to_string(LinearVariant v);
LinearVariant parse_linear_variant(const std::string& name);

struct LinearMode {
  LinearVariant variant = LinearVariant::kStandard;
  NumericFormat format = NumericFormat::kInt8;
  Fp8Format fp8_forward = Fp8Format::e4m3();   // activations and weights
  Fp8Format fp8_gradient = Fp8Format::e5m2();  // output gradients
};

bool operator==(const LinearMode& a, const LinearMode& b);

// What a forward saved for its backward. SwitchBackM keeps only the
// quantized tensors (x_full/w_full stay empty); every other variant keeps
// the full-precision operands.
struct LinearContext {
  LinearMode mode;
  Matrix x_full;
  Matrix w_full;
  QuantizedMatrix x_quant;
  QuantizedMatrix w_quant;
};

// Row-wise quantized X (b x k) against tensor-wise quantized W (m x k),
// computed as X*W^T with integer accumulation and the states applied
// afterwards: out[i][j] = raw[i][j] * state_x[i] * state_w / 127^2.
// Accumulation is int32 while k*127^2 fits, int64 beyond.
Matrix int8_matmul_dequant(const QuantizedMatrix& qx, const QuantizedMatrix& qw);

// Both operands row-wise quantized; the state scaling is the outer product
// state_a[i] * state_b[j] / 127^2.
Matrix matmul_dequant_dual_rowwise(const QuantizedMatrix& qa, const QuantizedMatrix& qb);

// Y = X*W^T for X (b x n) and W (m x n); no bias. ctx, when non-null,
// receives what the variant saves for backward.
Matrix linear_forward(const LinearMode& mode, const Matrix& x, const Matrix& w,
                      LinearContext* ctx = nullptr);

// G is b x m. Returns {x_grad (b x n), w_grad (m x n)}.
std::pair<Matrix, Matrix> linear_backward(const LinearMode& mode, const LinearContext& ctx,
                                          const Matrix& g);

}  // namespace lowprec
