#include "lowprec/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lowprec {

namespace {

void require_quantizable(const Matrix& x, const char* op) {
  if (x.empty()) throw std::invalid_argument(std::string(op) + ": empty matrix");
  if (!x.all_finite()) throw std::invalid_argument(std::string(op) + ": non-finite input");
}

// round half away from zero, the documented rounding for int8 payloads
int8_t quantize_entry(float x, float absmax) {
  const long v = std::lround(127.0 * double(x) / double(absmax));
  return int8_t(std::clamp(v, -127l, 127l));
}

void validate_format(const Fp8Format& fmt) {
  if (fmt.exponent_bits < 1 || fmt.mantissa_bits < 0 ||
      fmt.exponent_bits + fmt.mantissa_bits != 7)
    throw std::invalid_argument("fp8: invalid bit split (need 1 sign + e + m == 8)");
}

}  // namespace

std::vector<float> fp8_value_set(const Fp8Format& fmt) {
  validate_format(fmt);
  const int emax_field = (1 << fmt.exponent_bits) - 1;
  const int mmax = (1 << fmt.mantissa_bits) - 1;
  std::vector<float> values;
  values.reserve(size_t(2) * (emax_field + 1) * (mmax + 1));
  for (int e = 0; e <= emax_field; ++e) {
    for (int m = 0; m <= mmax; ++m) {
      if (e == emax_field) {
        if (fmt.reserved == Fp8Format::Reserved::kTopExponent) continue;  // Inf/NaN block
        if (m == mmax) continue;                                          // the single NaN
      }
      double v;
      if (e == 0) {
        // denormal: no implicit leading bit
        v = std::ldexp(double(m), 1 - fmt.exponent_bias - fmt.mantissa_bits);
      } else {
        v = std::ldexp(1.0 + double(m) / double(1 << fmt.mantissa_bits), e - fmt.exponent_bias);
      }
      values.push_back(float(v));
      values.push_back(float(-v));
    }
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

double Fp8Format::max_finite() const { return double(fp8_value_set(*this).back()); }

bool operator==(const Fp8Format& a, const Fp8Format& b) {
  return a.exponent_bits == b.exponent_bits && a.mantissa_bits == b.mantissa_bits &&
         a.exponent_bias == b.exponent_bias && a.reserved == b.reserved;
}

float fp8_cast_scalar(float x, const std::vector<float>& sorted_values) {
  auto it = std::lower_bound(sorted_values.begin(), sorted_values.end(), x);
  if (it == sorted_values.end()) return sorted_values.back();
  if (it == sorted_values.begin() || *it == x) return *it;
  const float hi = *it;
  const float lo = *(it - 1);
  const double d_hi = double(hi) - double(x);
  const double d_lo = double(x) - double(lo);
  if (d_lo < d_hi) return lo;
  if (d_hi < d_lo) return hi;
  return std::fabs(lo) <= std::fabs(hi) ? lo : hi;  // tie: smaller magnitude
}

Matrix fp8_cast(const Matrix& x, const Fp8Format& fmt) {
  if (!x.all_finite()) throw std::invalid_argument("fp8_cast: non-finite input");
  const std::vector<float> values = fp8_value_set(fmt);
  Matrix y(x.rows(), x.cols());
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t j = 0; j < x.cols(); ++j) y(i, j) = fp8_cast_scalar(x(i, j), values);
  return y;
}

namespace {

std::vector<float> slice_absmax(const Matrix& x, QuantAxis axis) {
  std::vector<float> state;
  switch (axis) {
    case QuantAxis::kRow:
      state.assign(size_t(x.rows()), 0.0f);
      for (int64_t i = 0; i < x.rows(); ++i)
        for (int64_t j = 0; j < x.cols(); ++j)
          state[size_t(i)] = std::max(state[size_t(i)], std::fabs(x(i, j)));
      break;
    case QuantAxis::kColumn:
      state.assign(size_t(x.cols()), 0.0f);
      for (int64_t i = 0; i < x.rows(); ++i)
        for (int64_t j = 0; j < x.cols(); ++j)
          state[size_t(j)] = std::max(state[size_t(j)], std::fabs(x(i, j)));
      break;
    case QuantAxis::kTensor:
      state.assign(1, x.abs_max());
      break;
  }
  // all-zero slice: sentinel scale 1.0, payload will be all zeros
  for (float& s : state)
    if (s == 0.0f) s = 1.0f;
  return state;
}

}  // namespace

static QuantizedMatrix quantize_int8(const Matrix& x, QuantAxis axis, const char* op) {
  require_quantizable(x, op);
  QuantizedMatrix q;
  q.rows = x.rows();
  q.cols = x.cols();
  q.axis = axis;
  q.fp8 = false;
  q.state = slice_absmax(x, axis);
  q.payload_int8.resize(size_t(x.size()));
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t j = 0; j < x.cols(); ++j)
      q.payload_int8[size_t(i * x.cols() + j)] = quantize_entry(x(i, j), q.state_for(i, j));
  return q;
}

QuantizedMatrix quantize_rowwise(const Matrix& x) {
  return quantize_int8(x, QuantAxis::kRow, "quantize_rowwise");
}

QuantizedMatrix quantize_columnwise(const Matrix& x) {
  return quantize_int8(x, QuantAxis::kColumn, "quantize_columnwise");
}

QuantizedMatrix quantize_tensorwise(const Matrix& x) {
  return quantize_int8(x, QuantAxis::kTensor, "quantize_tensorwise");
}

QuantizedMatrix quantize_tensorwise_transpose(const Matrix& x) {
  require_quantizable(x, "quantize_tensorwise_transpose");
  QuantizedMatrix q;
  q.rows = x.cols();
  q.cols = x.rows();
  q.axis = QuantAxis::kTensor;
  q.fp8 = false;
  float absmax = x.abs_max();
  if (absmax == 0.0f) absmax = 1.0f;
  q.state.assign(1, absmax);
  q.payload_int8.resize(size_t(x.size()));
  // single pass: read x row-major, write the transposed position
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t j = 0; j < x.cols(); ++j)
      q.payload_int8[size_t(j * q.cols + i)] = quantize_entry(x(i, j), absmax);
  return q;
}

QuantizedMatrix quantize_fp8(const Matrix& x, const Fp8Format& fmt, QuantAxis axis) {
  require_quantizable(x, "quantize_fp8");
  const std::vector<float> values = fp8_value_set(fmt);
  QuantizedMatrix q;
  q.rows = x.rows();
  q.cols = x.cols();
  q.axis = axis;
  q.fp8 = true;
  q.state = slice_absmax(x, axis);
  q.payload_fp8.resize(size_t(x.size()));
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t j = 0; j < x.cols(); ++j)
      q.payload_fp8[size_t(i * x.cols() + j)] =
          fp8_cast_scalar(float(double(x(i, j)) / double(q.state_for(i, j))), values);
  return q;
}

Matrix dequantize(const QuantizedMatrix& q) {
  const size_t want = q.axis == QuantAxis::kRow      ? size_t(q.rows)
                      : q.axis == QuantAxis::kColumn ? size_t(q.cols)
                                                     : 1;
  if (q.state.size() != want)
    throw std::invalid_argument("dequantize: state length does not match axis");
  Matrix y(q.rows, q.cols);
  if (q.fp8) {
    for (int64_t i = 0; i < q.rows; ++i)
      for (int64_t j = 0; j < q.cols; ++j)
        y(i, j) = float(double(q.payload_fp8[size_t(i * q.cols + j)]) *
                        double(q.state_for(i, j)));
  } else {
    for (int64_t i = 0; i < q.rows; ++i)
      for (int64_t j = 0; j < q.cols; ++j)
        y(i, j) = float(double(q.payload_int8[size_t(i * q.cols + j)]) *
                        double(q.state_for(i, j)) / 127.0);
  }
  return y;
}

}  // namespace lowprec
