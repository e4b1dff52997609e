#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <vector>

namespace lowprec {

// Dense row-major float32 matrix. float32 is the working precision of the
// whole library; scalar reductions that feed decisions (losses, norms, RMS
// statistics) accumulate in double.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int64_t rows, int64_t cols, float fill = 0.0f);
  static Matrix from(std::initializer_list<std::initializer_list<float>> rows);

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }
  int64_t size() const { return rows_ * cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  float& operator()(int64_t i, int64_t j) { return data_[i * cols_ + j]; }
  const float& operator()(int64_t i, int64_t j) const { return data_[i * cols_ + j]; }
  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  bool all_finite() const;
  float abs_max() const;  // 0 for an empty matrix
  Matrix transposed() const;

 private:
  int64_t rows_ = 0;
  int64_t cols_ = 0;
  std::vector<float> data_;
};

// Exact float equality, entry for entry (used by bit-identity tests).
bool operator==(const Matrix& a, const Matrix& b);
inline bool operator!=(const Matrix& a, const Matrix& b) { return !(a == b); }

// A (r x k) times B^T where B is given pre-transposed as (c x k); only the
// A*B^T layout is provided, mirroring the kernel convention the quantized
// paths are built around. The inner-dimension reduction is strictly
// sequential per output element so results are bit-reproducible.
Matrix matmul(const Matrix& a, const Matrix& b_transposed);

// Seeded deterministic randomness. The integer stream is std::mt19937_64
// (bit-identical across platforms per the standard); Gaussians use
// Box-Muller on 53-bit uniforms, exactly two engine draws per sample, so
// stream positions are easy to reason about.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  uint64_t next_u64() { return engine_(); }
  // [0, 1), 53-bit resolution.
  double uniform01() { return double(engine_() >> 11) * 0x1.0p-53; }
  double gaussian();
  float gaussian(float mean, float stdev) {
    return float(double(mean) + double(stdev) * gaussian());
  }
  // [0, n); n must be >= 1. Modulo bias is irrelevant at the n used here.
  int64_t uniform_int(int64_t n) { return int64_t(engine_() % uint64_t(n)); }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 mix of (seed, stream) for independent substreams.
uint64_t derive_seed(uint64_t seed, uint64_t stream);

Matrix gaussian_matrix(int64_t rows, int64_t cols, float mean, float stdev, uint64_t seed);

// Central-difference gradient oracle: (f(X+h e_ij) - f(X-h e_ij)) / (2h) per
// entry. The divisor is the achieved float spacing of the two perturbed
// values, which keeps the estimate accurate when h is not representable
// exactly around X[i][j].
Matrix finite_difference_grad(const std::function<double(const Matrix&)>& f,
                              const Matrix& x, double step);

}  // namespace lowprec
