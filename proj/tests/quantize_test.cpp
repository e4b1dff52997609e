#include "lowprec/quantize.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "lowprec/matrix.hpp"

namespace lowprec {
namespace {

int8_t payload_at(const QuantizedMatrix& q, int64_t i, int64_t j) {
  return q.payload_int8[size_t(i * q.cols + j)];
}

void expect_payload(const QuantizedMatrix& q, const std::vector<std::vector<int>>& want) {
  ASSERT_EQ(size_t(q.rows), want.size());
  for (int64_t i = 0; i < q.rows; ++i) {
    ASSERT_EQ(size_t(q.cols), want[size_t(i)].size());
    for (int64_t j = 0; j < q.cols; ++j)
      EXPECT_EQ(int(payload_at(q, i, j)), want[size_t(i)][size_t(j)]) << "at " << i << "," << j;
  }
}

// Entries of the form p*state/127 with at least one |p| = 127 per slice, so
// the slice absmax reproduces `state` exactly.
Matrix grid_matrix(int64_t rows, int64_t cols, QuantAxis axis, uint64_t seed) {
  Rng rng(seed);
  Matrix x(rows, cols);
  std::vector<float> scale;
  int64_t slices = axis == QuantAxis::kRow ? rows : axis == QuantAxis::kColumn ? cols : 1;
  for (int64_t s = 0; s < slices; ++s) scale.push_back(0.25f + float(rng.uniform01()) * 4.0f);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) {
      int64_t s = axis == QuantAxis::kRow ? i : axis == QuantAxis::kColumn ? j : 0;
      int64_t p = rng.uniform_int(255) - 127;
      x(i, j) = float(double(p) * double(scale[size_t(s)]) / 127.0);
    }
  // force a full-scale entry per slice
  if (axis == QuantAxis::kRow)
    for (int64_t i = 0; i < rows; ++i) x(i, 0) = scale[size_t(i)];
  else if (axis == QuantAxis::kColumn)
    for (int64_t j = 0; j < cols; ++j) x(0, j) = scale[size_t(j)];
  else
    x(0, 0) = scale[0];
  return x;
}

TEST(QuantizeRowwise, PinnedExample) {
  QuantizedMatrix q = quantize_rowwise(Matrix::from({{1, 4}, {-1.9f, 0.5f}}));
  expect_payload(q, {{32, 127}, {-127, 33}});
  ASSERT_EQ(q.state.size(), 2u);
  EXPECT_EQ(q.state[0], 4.0f);
  EXPECT_EQ(q.state[1], 1.9f);
  EXPECT_EQ(q.axis, QuantAxis::kRow);
}

TEST(QuantizeRowwise, GridAlignedRowUnchanged) {
  QuantizedMatrix q = quantize_rowwise(Matrix::from({{127, -127, 0}}));
  expect_payload(q, {{127, -127, 0}});
  EXPECT_EQ(q.state[0], 127.0f);
}

TEST(QuantizeRowwise, AllZeroRowGetsSentinel) {
  QuantizedMatrix q = quantize_rowwise(Matrix::from({{0, 0}, {3, -3}}));
  expect_payload(q, {{0, 0}, {127, -127}});
  EXPECT_EQ(q.state[0], 1.0f);  // sentinel
  EXPECT_EQ(q.state[1], 3.0f);
  EXPECT_EQ(dequantize(q)(0, 0), 0.0f);
}

TEST(QuantizeRowwise, NonFiniteThrows) {
  Matrix x(1, 2);
  x(0, 0) = std::nanf("");
  EXPECT_THROW(quantize_rowwise(x), std::invalid_argument);
}

TEST(QuantizeColumnwise, PinnedExamples) {
  QuantizedMatrix q1 = quantize_columnwise(Matrix::from({{1}, {4}}));
  expect_payload(q1, {{32}, {127}});
  EXPECT_EQ(q1.state[0], 4.0f);

  QuantizedMatrix q2 = quantize_columnwise(Matrix::from({{1, 0}, {0, 1}}));
  expect_payload(q2, {{127, 0}, {0, 127}});
  EXPECT_EQ(q2.state[0], 1.0f);
  EXPECT_EQ(q2.state[1], 1.0f);

  QuantizedMatrix q3 = quantize_columnwise(Matrix::from({{3, -6}}));
  expect_payload(q3, {{127, -127}});
  EXPECT_EQ(q3.state[0], 3.0f);
  EXPECT_EQ(q3.state[1], 6.0f);
}

TEST(QuantizeTensorwise, PinnedExample) {
  QuantizedMatrix q = quantize_tensorwise(Matrix::from({{1, 4}, {-1.9f, 0.5f}}));
  expect_payload(q, {{32, 127}, {-60, 16}});
  ASSERT_EQ(q.state.size(), 1u);
  EXPECT_EQ(q.state[0], 4.0f);
}

TEST(QuantizeTensorwise, AllZeroSentinel) {
  QuantizedMatrix q = quantize_tensorwise(Matrix(2, 3, 0.0f));
  for (int8_t p : q.payload_int8) EXPECT_EQ(p, 0);
  EXPECT_EQ(q.state[0], 1.0f);
  EXPECT_EQ(dequantize(q), Matrix(2, 3, 0.0f));
}

TEST(QuantizeTensorwise, NegativeScalar) {
  QuantizedMatrix q = quantize_tensorwise(Matrix::from({{-5}}));
  expect_payload(q, {{-127}});
  EXPECT_EQ(q.state[0], 5.0f);
}

TEST(QuantizeTensorwiseTranspose, PinnedExample) {
  QuantizedMatrix q = quantize_tensorwise_transpose(Matrix::from({{1, 2}, {3, 4}}));
  // 1*31.75 -> 32, 3*31.75 -> 95 (95.25), 2*31.75 -> 64 (63.5 half away), 4 -> 127
  expect_payload(q, {{32, 95}, {64, 127}});
  EXPECT_EQ(q.state[0], 4.0f);
}

TEST(QuantizeTensorwiseTranspose, EqualsQuantizeOfTranspose) {
  Matrix w = gaussian_matrix(9, 5, 0.0f, 1.0f, 31);
  QuantizedMatrix fused = quantize_tensorwise_transpose(w);
  QuantizedMatrix explicit_t = quantize_tensorwise(w.transposed());
  ASSERT_EQ(fused.rows, explicit_t.rows);
  ASSERT_EQ(fused.cols, explicit_t.cols);
  EXPECT_EQ(fused.payload_int8, explicit_t.payload_int8);
  EXPECT_EQ(fused.state, explicit_t.state);
}

TEST(QuantizeTensorwiseTranspose, SymmetricMatrixFixedPoint) {
  Matrix w = Matrix::from({{1, 2}, {2, -3}});
  QuantizedMatrix a = quantize_tensorwise_transpose(w);
  QuantizedMatrix b = quantize_tensorwise(w);
  EXPECT_EQ(a.payload_int8, b.payload_int8);
  EXPECT_EQ(a.state, b.state);
}

TEST(QuantizeTensorwiseTranspose, RowVectorBecomesColumn) {
  QuantizedMatrix q = quantize_tensorwise_transpose(Matrix(1, 7, 1.0f));
  EXPECT_EQ(q.rows, 7);
  EXPECT_EQ(q.cols, 1);
}

TEST(Dequantize, GridAlignedRoundTrip) {
  Matrix x = Matrix::from({{127, -127, 0}});
  EXPECT_EQ(dequantize(quantize_tensorwise(x)), x);
}

TEST(Dequantize, FormulaEvaluation) {
  QuantizedMatrix q;
  q.rows = 1;
  q.cols = 1;
  q.axis = QuantAxis::kTensor;
  q.payload_int8 = {32};
  q.state = {4.0f};
  EXPECT_EQ(dequantize(q)(0, 0), float(32.0 * 4.0 / 127.0));
}

TEST(Dequantize, StateLengthMismatchThrows) {
  QuantizedMatrix q;
  q.rows = 2;
  q.cols = 2;
  q.axis = QuantAxis::kRow;
  q.payload_int8 = {1, 2, 3, 4};
  q.state = {1.0f};  // row axis wants 2
  EXPECT_THROW(dequantize(q), std::invalid_argument);
}

TEST(Quantize, GridRoundTripExactAllAxes) {
  for (QuantAxis axis : {QuantAxis::kRow, QuantAxis::kColumn, QuantAxis::kTensor}) {
    Matrix x = grid_matrix(13, 9, axis, 100 + uint64_t(axis));
    QuantizedMatrix q = axis == QuantAxis::kRow      ? quantize_rowwise(x)
                        : axis == QuantAxis::kColumn ? quantize_columnwise(x)
                                                     : quantize_tensorwise(x);
    EXPECT_EQ(dequantize(q), x) << "axis " << int(axis);
  }
}

TEST(Quantize, HalfStepErrorBoundAllAxes) {
  for (QuantAxis axis : {QuantAxis::kRow, QuantAxis::kColumn, QuantAxis::kTensor}) {
    for (uint64_t seed = 0; seed < 20; ++seed) {
      Matrix x = gaussian_matrix(11, 7, 0.0f, 2.0f, 500 + seed);
      QuantizedMatrix q = axis == QuantAxis::kRow      ? quantize_rowwise(x)
                          : axis == QuantAxis::kColumn ? quantize_columnwise(x)
                                                       : quantize_tensorwise(x);
      Matrix y = dequantize(q);
      for (int64_t i = 0; i < x.rows(); ++i)
        for (int64_t j = 0; j < x.cols(); ++j) {
          double bound = double(q.state_for(i, j)) * (1.0 / 254.0 + 1e-6);
          EXPECT_LE(std::fabs(double(x(i, j)) - double(y(i, j))), bound);
        }
    }
  }
}

TEST(Quantize, GridIdempotence) {
  for (QuantAxis axis : {QuantAxis::kRow, QuantAxis::kColumn, QuantAxis::kTensor}) {
    Matrix x = gaussian_matrix(10, 6, 0.0f, 1.5f, 900 + uint64_t(axis));
    auto quant = [&](const Matrix& m) {
      return axis == QuantAxis::kRow      ? quantize_rowwise(m)
             : axis == QuantAxis::kColumn ? quantize_columnwise(m)
                                          : quantize_tensorwise(m);
    };
    QuantizedMatrix q1 = quant(x);
    QuantizedMatrix q2 = quant(dequantize(q1));
    EXPECT_EQ(q1.payload_int8, q2.payload_int8);
    EXPECT_EQ(q1.state, q2.state);
  }
}

TEST(Quantize, ScaleEquivarianceForPowerOfTwo) {
  // exactly representable scaling keeps every payload bit and scales state
  for (QuantAxis axis : {QuantAxis::kRow, QuantAxis::kTensor}) {
    Matrix x = gaussian_matrix(8, 12, 0.0f, 1.0f, 77);
    Matrix cx = x;
    for (int64_t i = 0; i < cx.size(); ++i) cx.data()[i] *= 4.0f;
    QuantizedMatrix q1 = axis == QuantAxis::kRow ? quantize_rowwise(x) : quantize_tensorwise(x);
    QuantizedMatrix q2 = axis == QuantAxis::kRow ? quantize_rowwise(cx) : quantize_tensorwise(cx);
    EXPECT_EQ(q1.payload_int8, q2.payload_int8);
    ASSERT_EQ(q1.state.size(), q2.state.size());
    for (size_t s = 0; s < q1.state.size(); ++s) EXPECT_EQ(q2.state[s], 4.0f * q1.state[s]);
  }
}

TEST(Quantize, PayloadRangeNeverMinus128) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    QuantizedMatrix q = quantize_rowwise(gaussian_matrix(16, 16, 0.0f, 3.0f, 1000 + seed));
    for (int8_t p : q.payload_int8) {
      EXPECT_GE(int(p), -127);
      EXPECT_LE(int(p), 127);
    }
  }
}

TEST(Fp8ValueSet, E4M3Structure) {
  std::vector<float> v = fp8_value_set(Fp8Format::e4m3());
  EXPECT_EQ(v.size(), 253u);  // 2*127 signed values, one zero
  EXPECT_EQ(v.back(), 448.0f);
  EXPECT_EQ(v.front(), -448.0f);
  EXPECT_TRUE(std::binary_search(v.begin(), v.end(), 0.0f));
  EXPECT_TRUE(std::binary_search(v.begin(), v.end(), 1.0f));
  for (size_t i = 0; i < v.size(); ++i)
    EXPECT_EQ(v[i], -v[v.size() - 1 - i]);  // symmetric about 0
}

TEST(Fp8ValueSet, E5M2Structure) {
  std::vector<float> v = fp8_value_set(Fp8Format::e5m2());
  EXPECT_EQ(v.size(), 247u);  // top exponent fully reserved
  EXPECT_EQ(v.back(), 57344.0f);
  EXPECT_TRUE(std::binary_search(v.begin(), v.end(), 0.0f));
  for (size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], -v[v.size() - 1 - i]);
}

TEST(Fp8ValueSet, ZeroMantissaIsPowersOfTwo) {
  Fp8Format fmt{7, 0, 63, Fp8Format::Reserved::kTopExponent};
  for (float v : fp8_value_set(fmt)) {
    if (v == 0.0f) continue;
    int e = 0;
    EXPECT_EQ(std::fabs(std::frexp(v, &e)), 0.5f) << v;  // pure power of two
  }
}

TEST(Fp8ValueSet, InvalidBitSplitThrows) {
  Fp8Format bad{5, 3, 15, Fp8Format::Reserved::kTopExponent};
  EXPECT_THROW(fp8_value_set(bad), std::invalid_argument);
}

TEST(Fp8Cast, NearestToPointNine) {
  Matrix y = fp8_cast(Matrix::from({{0.9f}}), Fp8Format::e4m3());
  EXPECT_EQ(y(0, 0), 0.875f);
}

TEST(Fp8Cast, IdempotentOnRandomInputs) {
  for (const Fp8Format& fmt : {Fp8Format::e4m3(), Fp8Format::e5m2()}) {
    Matrix x = gaussian_matrix(32, 32, 0.0f, 1.0f, 4242);
    Matrix once = fp8_cast(x, fmt);
    EXPECT_EQ(fp8_cast(once, fmt), once);
  }
}

TEST(Fp8Cast, ValueSetMembersFixed) {
  Fp8Format fmt = Fp8Format::e4m3();
  std::vector<float> values = fp8_value_set(fmt);
  Matrix x(1, int64_t(values.size()));
  for (size_t i = 0; i < values.size(); ++i) x(0, int64_t(i)) = values[i];
  EXPECT_EQ(fp8_cast(x, fmt), x);
}

TEST(Fp8Cast, TieGoesToSmallerMagnitude) {
  std::vector<float> values = {-1.0f, 0.0f, 0.5f, 1.0f};
  EXPECT_EQ(fp8_cast_scalar(0.75f, values), 0.5f);    // midpoint, prefer smaller
  EXPECT_EQ(fp8_cast_scalar(-0.25f, values), 0.0f);   // midpoint on negative side
  EXPECT_EQ(fp8_cast_scalar(0.76f, values), 1.0f);    // strictly closer wins
  EXPECT_EQ(fp8_cast_scalar(10.0f, values), 1.0f);    // clamps to the set edge
  EXPECT_EQ(fp8_cast_scalar(-10.0f, values), -1.0f);
}

TEST(QuantizeFp8, PinnedTensorwiseExample) {
  QuantizedMatrix q = quantize_fp8(Matrix::from({{0.9f, 1.0f}}), Fp8Format::e4m3(),
                                   QuantAxis::kTensor);
  ASSERT_TRUE(q.fp8);
  EXPECT_EQ(q.payload_fp8[0], 0.875f);
  EXPECT_EQ(q.payload_fp8[1], 1.0f);
  EXPECT_EQ(q.state[0], 1.0f);
}

TEST(QuantizeFp8, ValueSetTimesAbsmaxRoundTripsExactly) {
  Fp8Format fmt = Fp8Format::e4m3();
  std::vector<float> values = fp8_value_set(fmt);
  // pick members in [-1, 1] and scale by an exactly-representable absmax
  const float absmax = 2.0f;
  Matrix x(1, 9);
  const float picks[9] = {0.0f, 0.875f, -0.875f, 1.0f, -1.0f, 0.5f, 0.25f, -0.0625f, 0.75f};
  for (int64_t j = 0; j < 9; ++j) x(0, j) = picks[j] * absmax;
  QuantizedMatrix q = quantize_fp8(x, fmt, QuantAxis::kTensor);
  EXPECT_EQ(dequantize(q), x);
}

TEST(QuantizeFp8, AllZeroSliceSentinel) {
  QuantizedMatrix q = quantize_fp8(Matrix(2, 2, 0.0f), Fp8Format::e5m2(), QuantAxis::kRow);
  for (float p : q.payload_fp8) EXPECT_EQ(p, 0.0f);
  EXPECT_EQ(q.state[0], 1.0f);
  EXPECT_EQ(q.state[1], 1.0f);
  EXPECT_EQ(dequantize(q), Matrix(2, 2, 0.0f));
}

TEST(QuantizeFp8, PayloadMembership) {
  for (const Fp8Format& fmt : {Fp8Format::e4m3(), Fp8Format::e5m2()}) {
    std::vector<float> values = fp8_value_set(fmt);
    for (QuantAxis axis : {QuantAxis::kRow, QuantAxis::kTensor}) {
      QuantizedMatrix q = quantize_fp8(gaussian_matrix(10, 10, 0.0f, 2.0f, 321), fmt, axis);
      for (float p : q.payload_fp8)
        EXPECT_TRUE(std::binary_search(values.begin(), values.end(), p)) << p;
    }
  }
}

}  // namespace
}  // namespace lowprec
