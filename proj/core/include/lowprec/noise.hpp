#pragma once

#include <cstdint>
#include <vector>

#include "lowprec/matrix.hpp"

namespace lowprec {

// Inner-product quantization-noise model: u, v are k-vectors with i.i.d.
// zero-mean entries of stdev sigma_u / sigma_v; quantization adds i.i.d.
// zero-mean noise of stdev sigma_q to every entry of both operands.
struct QuantNoiseModel {
  int64_t k = 1;
  double sigma_u = 1.0;
  double sigma_v = 1.0;
  double sigma_q = 0.0;
};

// Closed form: Var(<u+eps, v+xi>) - Var(<u,v>) = k * sigma_q^2 *
// (sigma_u^2 + sigma_v^2 + sigma_q^2).
double predicted_variance_increase(const QuantNoiseModel& model);

// Empirical estimate of the same variance increase over `trials` draws.
// Estimated from the paired per-trial difference w = <u+eps,v+xi> - <u,v>,
// whose variance equals Var(<u_hat,v_hat>) - Var(<u,v>) exactly (the cross
// term has zero mean) while sampling noise stays ~20x smaller than the
// difference of two separately estimated variances. Per-trial PRNG streams
// are derived from (seed, trial index), so trial order is immaterial.
double monte_carlo_variance_increase(const QuantNoiseModel& model, int64_t trials,
                                     uint64_t seed);

// batch_tokens / fwd_inner: how much longer the weight-gradient reduction is
// than the forward reduction, i.e. the variance multiplier under equal
// per-element noise.
double relative_wgrad_noise_factor(int64_t batch_tokens, int64_t fwd_inner);

struct NoiseReportRow {
  int64_t k = 0;
  double predicted = 0.0;
  double empirical = 0.0;
  double rel_error = 0.0;  // |empirical - predicted| / predicted; |empirical| when predicted == 0
};

// One row per k, with sigma_u = sigma_v = 1.
std::vector<NoiseReportRow> noise_report(const std::vector<int64_t>& ks, double sigma_q,
                                         int64_t trials, uint64_t seed);

// Bridge from the Gaussian-noise law to the real int8 rounding of the
// quantized product: per trial, draw unit-Gaussian k-vectors x and w, compare
// the quantized product against the exact one, and predict the error variance
// from the half-step model sigma_q = absmax/(127*sqrt(12)) of each actual
// slice. Returns {empirical error variance, mean predicted variance}.
struct BridgePoint {
  int64_t k = 0;
  double empirical = 0.0;
  double predicted = 0.0;
};
BridgePoint int8_error_variance_point(int64_t k, int64_t trials, uint64_t seed);

// Least-squares slope through the origin-free fit of y against x.
double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lowprec
