#include "lowprec/linear.hpp"

#include <limits>
#include <stdexcept>

namespace lowprec {

const char* to_string(LinearVariant v) {
  switch (v) {
    case LinearVariant::kStandard: return "Standard";
    case LinearVariant::kSwitchBack: return "SwitchBack";
    case LinearVariant::kSwitchBackM: return "SwitchBackM";
    case LinearVariant::kSwitchBackQ: return "SwitchBackQ";
    case LinearVariant::kAllQuant: return "AllQuant";
  }
  return "?";
}

LinearVariant parse_linear_variant(const std::string& name) {
  for (LinearVariant v : {LinearVariant::kStandard, LinearVariant::kSwitchBack,
                          LinearVariant::kSwitchBackM, LinearVariant::kSwitchBackQ,
                          LinearVariant::kAllQuant})
    if (name == to_string(v)) return v;
  throw std::invalid_argument("unknown linear variant: " + name);
}

bool operator==(const LinearMode& a, const LinearMode& b) {
  if (a.variant != b.variant || a.format != b.format) return false;
  if (a.format == NumericFormat::kInt8) return true;
  return a.fp8_forward == b.fp8_forward && a.fp8_gradient == b.fp8_gradient;
}

namespace {

// Largest inner dimension whose worst-case |sum of payload products| =
// k*127*127 still fits an int32 accumulator.
constexpr int64_t kInt32SafeInner = std::numeric_limits<int32_t>::max() / (127 * 127);

template <typename Acc>
void accumulate_int8(const QuantizedMatrix& qa, const QuantizedMatrix& qb, Matrix& y,
                     const std::vector<double>& scale_a, const std::vector<double>& scale_b) {
  const int64_t r = qa.rows, c = qb.rows, k = qa.cols;
  for (int64_t i = 0; i < r; ++i) {
    const int8_t* ai = qa.payload_int8.data() + i * k;
    for (int64_t j = 0; j < c; ++j) {
      const int8_t* bj = qb.payload_int8.data() + j * k;
      Acc acc = 0;
      for (int64_t p = 0; p < k; ++p) acc += Acc(ai[p]) * Acc(bj[p]);
      y(i, j) = float(double(acc) * scale_a[size_t(i)] * scale_b[size_t(j)] / 16129.0);
    }
  }
}

Matrix int8_product(const QuantizedMatrix& qa, const QuantizedMatrix& qb) {
  if (qa.cols != qb.cols) throw std::invalid_argument("int8 matmul: inner dimension mismatch");
  std::vector<double> scale_a(size_t(qa.rows)), scale_b(size_t(qb.rows));
  for (int64_t i = 0; i < qa.rows; ++i)
    scale_a[size_t(i)] = double(qa.axis == QuantAxis::kRow ? qa.state[size_t(i)] : qa.state[0]);
  for (int64_t j = 0; j < qb.rows; ++j)
    scale_b[size_t(j)] = double(qb.axis == QuantAxis::kRow ? qb.state[size_t(j)] : qb.state[0]);
  Matrix y(qa.rows, qb.rows);
  if (qa.cols <= kInt32SafeInner)
    accumulate_int8<int32_t>(qa, qb, y, scale_a, scale_b);
  else
    accumulate_int8<int64_t>(qa, qb, y, scale_a, scale_b);
  return y;
}

}  // namespace

Matrix int8_matmul_dequant(const QuantizedMatrix& qx, const QuantizedMatrix& qw) {
  if (qx.fp8 || qw.fp8) throw std::invalid_argument("int8_matmul_dequant: fp8 operand");
  if (qx.axis != QuantAxis::kRow || qw.axis != QuantAxis::kTensor)
    throw std::invalid_argument("int8_matmul_dequant: need row-wise X and tensor-wise W");
  return int8_product(qx, qw);
}

Matrix matmul_dequant_dual_rowwise(const QuantizedMatrix& qa, const QuantizedMatrix& qb) {
  if (qa.fp8 || qb.fp8) throw std::invalid_argument("matmul_dequant_dual_rowwise: fp8 operand");
  if (qa.axis != QuantAxis::kRow || qb.axis != QuantAxis::kRow)
    throw std::invalid_argument("matmul_dequant_dual_rowwise: both operands must be row-wise");
  return int8_product(qa, qb);
}

namespace {

void check_forward_shapes(const Matrix& x, const Matrix& w) {
  if (x.empty() || w.empty()) throw std::invalid_argument("linear_forward: empty operand");
  if (x.cols() != w.cols())
    throw std::invalid_argument("linear_forward: X is b x n but W is not m x n");
  if (!x.all_finite() || !w.all_finite())
    throw std::invalid_argument("linear_forward: non-finite input");
}

// fp8 simulation: snap operands to the value-set grid, then multiply in
// working precision (fp8 accumulation is not emulated).
Matrix fp8_snap(const Matrix& m, const Fp8Format& fmt, QuantAxis axis) {
  return dequantize(quantize_fp8(m, fmt, axis));
}

QuantAxis fp8_weight_axis(LinearVariant v) {
  // SwitchBackQ keeps per-row weight states; AllQuant's fp8 baseline is
  // tensor-wise on everything; the rest mirror the int8 tensor-wise weight.
  return v == LinearVariant::kSwitchBackQ ? QuantAxis::kRow : QuantAxis::kTensor;
}

QuantAxis fp8_activation_axis(LinearVariant v) {
  return v == LinearVariant::kAllQuant ? QuantAxis::kTensor : QuantAxis::kRow;
}

}  // namespace

Matrix linear_forward(const LinearMode& mode, const Matrix& x, const Matrix& w,
                      LinearContext* ctx) {
  check_forward_shapes(x, w);
  if (ctx) {
    *ctx = LinearContext{};
    ctx->mode = mode;
  }

  if (mode.variant == LinearVariant::kStandard) {
    if (ctx) {
      ctx->x_full = x;
      ctx->w_full = w;
    }
    return matmul(x, w);
  }

  if (mode.format == NumericFormat::kInt8) {
    Matrix y;
    if (mode.variant == LinearVariant::kSwitchBackQ) {
      y = matmul_dequant_dual_rowwise(quantize_rowwise(x), quantize_rowwise(w));
    } else {
      y = int8_matmul_dequant(quantize_rowwise(x), quantize_tensorwise(w));
    }
    if (ctx) {
      if (mode.variant == LinearVariant::kSwitchBackM) {
        ctx->x_quant = quantize_rowwise(x);
        ctx->w_quant = quantize_tensorwise(w);
      } else {
        ctx->x_full = x;
        ctx->w_full = w;
      }
    }
    return y;
  }

  // fp8 path
  const QuantAxis ax = fp8_activation_axis(mode.variant);
  const QuantAxis wx = fp8_weight_axis(mode.variant);
  QuantizedMatrix qx = quantize_fp8(x, mode.fp8_forward, ax);
  QuantizedMatrix qw = quantize_fp8(w, mode.fp8_forward, wx);
  Matrix y = matmul(dequantize(qx), dequantize(qw));
  if (ctx) {
    if (mode.variant == LinearVariant::kSwitchBackM) {
      ctx->x_quant = std::move(qx);
      ctx->w_quant = std::move(qw);
    } else {
      ctx->x_full = x;
      ctx->w_full = w;
    }
  }
  return y;
}

namespace {

// Transpose a tensor-wise quantized payload in place of re-quantizing the
// transposed matrix; the two are identical because the absmax is global.
QuantizedMatrix transpose_tensorwise(const QuantizedMatrix& q) {
  QuantizedMatrix t;
  t.rows = q.cols;
  t.cols = q.rows;
  t.axis = QuantAxis::kTensor;
  t.fp8 = q.fp8;
  t.state = q.state;
  if (q.fp8) {
    t.payload_fp8.resize(size_t(q.size()));
    for (int64_t i = 0; i < q.rows; ++i)
      for (int64_t j = 0; j < q.cols; ++j)
        t.payload_fp8[size_t(j * t.cols + i)] = q.payload_fp8[size_t(i * q.cols + j)];
  } else {
    t.payload_int8.resize(size_t(q.size()));
    for (int64_t i = 0; i < q.rows; ++i)
      for (int64_t j = 0; j < q.cols; ++j)
        t.payload_int8[size_t(j * t.cols + i)] = q.payload_int8[size_t(i * q.cols + j)];
  }
  return t;
}

// w_grad = G^T * X in working precision ("switching back"): the reduction
// runs over the batch dimension.
Matrix wgrad_full_precision(const Matrix& g, const Matrix& x) {
  return matmul(g.transposed(), x.transposed());
}

}  // namespace

std::pair<Matrix, Matrix> linear_backward(const LinearMode& mode, const LinearContext& ctx,
                                          const Matrix& g) {
  if (!(mode == ctx.mode))
    throw std::invalid_argument("linear_backward: context was produced by a different mode");
  const bool quant_saved = ctx.mode.variant == LinearVariant::kSwitchBackM;
  const int64_t b = quant_saved ? ctx.x_quant.rows : ctx.x_full.rows();
  const int64_t n = quant_saved ? ctx.x_quant.cols : ctx.x_full.cols();
  const int64_t m = quant_saved ? ctx.w_quant.rows : ctx.w_full.rows();
  if (g.rows() != b || g.cols() != m)
    throw std::invalid_argument("linear_backward: G must be b x m");

  switch (mode.variant) {
    case LinearVariant::kStandard: {
      Matrix x_grad = matmul(g, ctx.w_full.transposed());  // G * W
      Matrix w_grad = wgrad_full_precision(g, ctx.x_full);
      return {std::move(x_grad), std::move(w_grad)};
    }

    case LinearVariant::kSwitchBack:
    case LinearVariant::kSwitchBackM:
    case LinearVariant::kSwitchBackQ:
    case LinearVariant::kAllQuant:
      break;
  }

  if (mode.format == NumericFormat::kInt8) {
    Matrix x_grad;
    if (mode.variant == LinearVariant::kSwitchBackQ) {
      // column-wise quantize-transpose of W: per-row states of W^T
      x_grad = matmul_dequant_dual_rowwise(quantize_rowwise(g),
                                           quantize_rowwise(ctx.w_full.transposed()));
    } else if (mode.variant == LinearVariant::kSwitchBackM) {
      x_grad = int8_matmul_dequant(quantize_rowwise(g), transpose_tensorwise(ctx.w_quant));
    } else {
      // backward re-quantizes W fresh rather than caching the forward's copy
      x_grad = int8_matmul_dequant(quantize_rowwise(g),
                                   quantize_tensorwise_transpose(ctx.w_full));
    }

    Matrix w_grad;
    if (mode.variant == LinearVariant::kAllQuant) {
      w_grad = matmul_dequant_dual_rowwise(quantize_rowwise(g.transposed()),
                                           quantize_rowwise(ctx.x_full.transposed()));
    } else if (mode.variant == LinearVariant::kSwitchBackM) {
      w_grad = wgrad_full_precision(g, dequantize(ctx.x_quant));
    } else {
      w_grad = wgrad_full_precision(g, ctx.x_full);
    }
    return {std::move(x_grad), std::move(w_grad)};
  }

  // fp8 path: snapped operands, working-precision products
  Matrix w_snap_t;  // snapped W^T, n x m
  if (mode.variant == LinearVariant::kSwitchBackM) {
    w_snap_t = dequantize(ctx.w_quant).transposed();
  } else if (mode.variant == LinearVariant::kSwitchBackQ) {
    // per-column states of W, as in the int8 variant
    w_snap_t = dequantize(quantize_fp8(ctx.w_full.transposed(), mode.fp8_forward,
                                       QuantAxis::kRow));
  } else {
    w_snap_t = dequantize(quantize_fp8(ctx.w_full, mode.fp8_forward,
                                       fp8_weight_axis(mode.variant)))
                   .transposed();
  }
  const QuantAxis gx =
      mode.variant == LinearVariant::kAllQuant ? QuantAxis::kTensor : QuantAxis::kRow;
  Matrix g_snap = fp8_snap(g, mode.fp8_gradient, gx);
  Matrix x_grad = matmul(g_snap, w_snap_t);

  Matrix w_grad;
  if (mode.variant == LinearVariant::kAllQuant) {
    Matrix x_snap = fp8_snap(ctx.x_full, mode.fp8_forward, QuantAxis::kTensor);
    w_grad = wgrad_full_precision(g_snap, x_snap);
  } else if (mode.variant == LinearVariant::kSwitchBackM) {
    w_grad = wgrad_full_precision(g, dequantize(ctx.x_quant));
  } else {
    w_grad = wgrad_full_precision(g, ctx.x_full);
  }
  return {std::move(x_grad), std::move(w_grad)};
}

}  // namespace lowprec
