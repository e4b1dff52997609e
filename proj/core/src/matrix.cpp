#include "lowprec/matrix.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace lowprec {

Matrix::Matrix(int64_t rows, int64_t cols, float fill) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("matrix: negative shape");
  data_.assign(size_t(rows) * size_t(cols), fill);
}

Matrix Matrix::from(std::initializer_list<std::initializer_list<float>> rows) {
  Matrix m(int64_t(rows.size()), rows.size() ? int64_t(rows.begin()->size()) : 0);
  int64_t i = 0;
  for (const auto& row : rows) {
    if (int64_t(row.size()) != m.cols_) throw std::invalid_argument("matrix: ragged rows");
    int64_t j = 0;
    for (float v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

bool Matrix::all_finite() const {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

float Matrix::abs_max() const {
  float m = 0.0f;
  for (float v : data_) m = std::max(m, std::fabs(v));
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (int64_t i = 0; i < rows_; ++i)
    for (int64_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool operator==(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t j = 0; j < a.cols(); ++j)
      if (a(i, j) != b(i, j)) return false;
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b_transposed) {
  if (a.cols() != b_transposed.cols())
    throw std::invalid_argument("matmul: inner dimension mismatch");
  const int64_t r = a.rows(), c = b_transposed.rows(), k = a.cols();
  Matrix y(r, c);
  for (int64_t i = 0; i < r; ++i) {
    const float* ai = a.data() + i * k;
    for (int64_t j = 0; j < c; ++j) {
      const float* bj = b_transposed.data() + j * k;
      float acc = 0.0f;  // sequential reduction: fixed order, reproducible
      for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      y(i, j) = acc;
    }
  }
  return y;
}

double Rng::gaussian() {
  // Box-Muller; u1 in (0,1] so the log is finite.
  double u1 = double((engine_() >> 11) + 1) * 0x1.0p-53;
  double u2 = double(engine_() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  // splitmix64 finalizer over the combined words.
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Matrix gaussian_matrix(int64_t rows, int64_t cols, float mean, float stdev, uint64_t seed) {
  if (stdev < 0) throw std::invalid_argument("gaussian_matrix: negative stdev");
  Matrix m(rows, cols);
  Rng rng(seed);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) m(i, j) = rng.gaussian(mean, stdev);
  return m;
}

Matrix finite_difference_grad(const std::function<double(const Matrix&)>& f,
                              const Matrix& x, double step) {
  if (step <= 0) throw std::invalid_argument("finite_difference_grad: step must be > 0");
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (int64_t i = 0; i < x.rows(); ++i) {
    for (int64_t j = 0; j < x.cols(); ++j) {
      const float v = x(i, j);
      const float hi = float(double(v) + step);
      const float lo = float(double(v) - step);
      probe(i, j) = hi;
      const double f_hi = f(probe);
      probe(i, j) = lo;
      const double f_lo = f(probe);
      probe(i, j) = v;
      if (!std::isfinite(f_hi) || !std::isfinite(f_lo))
        throw std::runtime_error("finite_difference_grad: non-finite evaluation");
      g(i, j) = float((f_hi - f_lo) / (double(hi) - double(lo)));
    }
  }
  return g;
}

}  // namespace lowprec
