#include "lowprec/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "lowprec/linear.hpp"
#include "lowprec/quantize.hpp"

namespace lowprec {

namespace {

void check_model(const QuantNoiseModel& m) {
  if (m.k < 1) throw std::invalid_argument("noise model: k must be >= 1");
  if (m.sigma_u < 0 || m.sigma_v < 0 || m.sigma_q < 0)
    throw std::invalid_argument("noise model: stdevs must be >= 0");
}

double unbiased_variance(const std::vector<double>& xs) {
  const size_t n = xs.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / double(n - 1);
}

}  // namespace

double predicted_variance_increase(const QuantNoiseModel& model) {
  check_model(model);
  const double su2 = model.sigma_u * model.sigma_u;
  const double sv2 = model.sigma_v * model.sigma_v;
  const double sq2 = model.sigma_q * model.sigma_q;
  return double(model.k) * sq2 * (su2 + sv2 + sq2);
}

double monte_carlo_variance_increase(const QuantNoiseModel& model, int64_t trials,
                                     uint64_t seed) {
  check_model(model);
  if (trials < 1) throw std::invalid_argument("monte carlo: trials must be >= 1");
  std::vector<double> diffs(static_cast<size_t>(trials));
  for (int64_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, uint64_t(t)));
    // w = <u+eps, v+xi> - <u,v> = <u,xi> + <eps,v> + <eps,xi>
    double w = 0.0;
    for (int64_t i = 0; i < model.k; ++i) {
      const double u = model.sigma_u * rng.gaussian();
      const double v = model.sigma_v * rng.gaussian();
      const double e = model.sigma_q * rng.gaussian();
      const double x = model.sigma_q * rng.gaussian();
      w += u * x + e * v + e * x;
    }
    diffs[size_t(t)] = w;
  }
  return unbiased_variance(diffs);
}

double relative_wgrad_noise_factor(int64_t batch_tokens, int64_t fwd_inner) {
  if (batch_tokens < 1 || fwd_inner < 1)
    throw std::invalid_argument("noise factor: dimensions must be >= 1");
  return double(batch_tokens) / double(fwd_inner);
}

std::vector<NoiseReportRow> noise_report(const std::vector<int64_t>& ks, double sigma_q,
                                         int64_t trials, uint64_t seed) {
  std::vector<NoiseReportRow> rows;
  rows.reserve(ks.size());
  for (size_t i = 0; i < ks.size(); ++i) {
    QuantNoiseModel model{ks[i], 1.0, 1.0, sigma_q};
    NoiseReportRow row;
    row.k = ks[i];
    row.predicted = predicted_variance_increase(model);
    row.empirical = monte_carlo_variance_increase(model, trials, derive_seed(seed, uint64_t(i)));
    row.rel_error = row.predicted != 0.0
                        ? std::abs(row.empirical - row.predicted) / row.predicted
                        : std::abs(row.empirical);
    rows.push_back(row);
  }
  return rows;
}

BridgePoint int8_error_variance_point(int64_t k, int64_t trials, uint64_t seed) {
  if (k < 1 || trials < 1) throw std::invalid_argument("bridge: k and trials must be >= 1");
  constexpr double kInvSqrt12 = 0.28867513459481288;  // 1/sqrt(12)
  std::vector<double> errors(static_cast<size_t>(trials));
  double predicted_sum = 0.0;
  for (int64_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, uint64_t(t)));
    Matrix x(1, k), w(1, k);
    for (int64_t i = 0; i < k; ++i) x(0, i) = float(rng.gaussian());
    for (int64_t i = 0; i < k; ++i) w(0, i) = float(rng.gaussian());
    const Matrix y = int8_matmul_dequant(quantize_rowwise(x), quantize_tensorwise(w));
    double exact = 0.0;
    for (int64_t i = 0; i < k; ++i) exact += double(x(0, i)) * double(w(0, i));
    errors[size_t(t)] = double(y(0, 0)) - exact;
    // half-step model with this trial's actual quantization steps
    const double sqx = double(x.abs_max()) / 127.0 * kInvSqrt12;
    const double sqw = double(w.abs_max()) / 127.0 * kInvSqrt12;
    predicted_sum += double(k) * (sqx * sqx + sqw * sqw + sqx * sqx * sqw * sqw);
  }
  BridgePoint p;
  p.k = k;
  p.empirical = unbiased_variance(errors);
  p.predicted = predicted_sum / double(trials);
  return p;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("least squares: need matching vectors of size >= 2");
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("least squares: degenerate x");
  return sxy / sxx;
}

}  // namespace lowprec
