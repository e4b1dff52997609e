#pragma once

#include <cstdint>
#include <vector>

#include "lowprec/matrix.hpp"

namespace lowprec {

enum class QuantAxis { kRow, kColumn, kTensor };

// Bit layout of a simulated 8-bit float: 1 sign bit plus exponent_bits +
// mantissa_bits == 7, an explicit bias, and a convention for which encodings
// are reserved for NaN/Inf (those never appear in the finite value set).
struct Fp8Format {
  // kTopExponent: IEEE-style, the whole top exponent field is non-finite
  // (the E5M2 convention). kTopEncodingOnly: only mantissa-all-ones at the
  // top exponent is NaN, there is no Inf (the extended-range E4M3
  // convention).
  enum class Reserved { kTopExponent, kTopEncodingOnly };

  int exponent_bits = 4;
  int mantissa_bits = 3;
  int exponent_bias = 7;
  Reserved reserved = Reserved::kTopEncodingOnly;

  static Fp8Format e4m3() { return {4, 3, 7, Reserved::kTopEncodingOnly}; }
  static Fp8Format e5m2() { return {5, 2, 15, Reserved::kTopExponent}; }

  double max_finite() const;  // largest member of the value set
};

bool operator==(const Fp8Format& a, const Fp8Format& b);

// Every finite representable value of the format, including denormals and
// both signs, sorted ascending and deduplicated (0 appears once).
std::vector<float> fp8_value_set(const Fp8Format& fmt);

// Snap each entry to the nearest value-set member; ties go to the value of
// smaller magnitude. Idempotent.
Matrix fp8_cast(const Matrix& x, const Fp8Format& fmt);
float fp8_cast_scalar(float x, const std::vector<float>& sorted_values);

// int8 payloads are round(127*x/absmax) per slice, so they stay in
// [-127, 127] (-128 never appears). fp8 payloads are value-set members of
// x/absmax. A slice whose absmax is 0 stores payload 0 with sentinel state
// 1.0 so dequantization returns exact zeros.
struct QuantizedMatrix {
  int64_t rows = 0;
  int64_t cols = 0;
  QuantAxis axis = QuantAxis::kTensor;
  bool fp8 = false;
  std::vector<int8_t> payload_int8;  // int8 path, row-major
  std::vector<float> payload_fp8;    // fp8 path, row-major
  std::vector<float> state;          // absmax per row / column / tensor

  int64_t size() const { return rows * cols; }
  float state_for(int64_t i, int64_t j) const {
    switch (axis) {
      case QuantAxis::kRow: return state[size_t(i)];
      case QuantAxis::kColumn: return state[size_t(j)];
      default: return state[0];
    }
  }
};

QuantizedMatrix quantize_rowwise(const Matrix& x);
QuantizedMatrix quantize_columnwise(const Matrix& x);
QuantizedMatrix quantize_tensorwise(const Matrix& x);
// Equivalent to quantize_tensorwise(x.transposed()), fused into one pass.
QuantizedMatrix quantize_tensorwise_transpose(const Matrix& x);

QuantizedMatrix quantize_fp8(const Matrix& x, const Fp8Format& fmt, QuantAxis axis);

// payload * state/127 (int8) or payload * state (fp8), per slice.
Matrix dequantize(const QuantizedMatrix& q);

}  // namespace lowprec
