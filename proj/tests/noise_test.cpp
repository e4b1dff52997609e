#include "lowprec/noise.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace lowprec {
namespace {

QuantNoiseModel model_of(int64_t k, double su, double sv, double sq) {
  QuantNoiseModel m;
  m.k = k;
  m.sigma_u = su;
  m.sigma_v = sv;
  m.sigma_q = sq;
  return m;
}

TEST(PredictedVariance, PinnedValues) {
  EXPECT_EQ(predicted_variance_increase(model_of(1024, 1.0, 1.0, 0.0)), 0.0);
  EXPECT_DOUBLE_EQ(predicted_variance_increase(model_of(1, 1.0, 1.0, 1.0)), 3.0);
  EXPECT_DOUBLE_EQ(predicted_variance_increase(model_of(1024, 1.0, 1.0, 0.05)), 5.1264);
}

TEST(PredictedVariance, MatchesClosedFormForAsymmetricStdevs) {
  const int64_t k = 37;
  const double su = 0.7, sv = 1.3, sq = 0.11;
  const double want = double(k) * sq * sq * (su * su + sv * sv + sq * sq);
  EXPECT_DOUBLE_EQ(predicted_variance_increase(model_of(k, su, sv, sq)), want);
}

TEST(PredictedVariance, LinearInK) {
  const double v1 = predicted_variance_increase(model_of(1024, 1.0, 1.0, 0.05));
  const double v2 = predicted_variance_increase(model_of(2048, 1.0, 1.0, 0.05));
  EXPECT_DOUBLE_EQ(v2, 2.0 * v1);
}

TEST(PredictedVariance, InvalidModelThrows) {
  EXPECT_THROW(predicted_variance_increase(model_of(0, 1.0, 1.0, 0.1)), std::invalid_argument);
  EXPECT_THROW(predicted_variance_increase(model_of(8, -1.0, 1.0, 0.1)), std::invalid_argument);
}

TEST(MonteCarlo, ZeroQuantNoiseGivesExactZero) {
  EXPECT_EQ(monte_carlo_variance_increase(model_of(256, 1.0, 1.0, 0.0), 100, 3), 0.0);
}

TEST(MonteCarlo, MatchesPredictionWithinFivePercent) {
  for (int64_t k : {64, 1024}) {
    QuantNoiseModel m = model_of(k, 1.0, 1.0, 0.05);
    const double pred = predicted_variance_increase(m);
    const double emp = monte_carlo_variance_increase(m, 20000, 7);
    EXPECT_NEAR(emp, pred, 0.05 * pred) << "k = " << k;
  }
}

TEST(MonteCarlo, DeterministicPerSeed) {
  QuantNoiseModel m = model_of(64, 1.0, 1.0, 0.05);
  EXPECT_EQ(monte_carlo_variance_increase(m, 500, 11),
            monte_carlo_variance_increase(m, 500, 11));
  EXPECT_NE(monte_carlo_variance_increase(m, 500, 11),
            monte_carlo_variance_increase(m, 500, 12));
}

TEST(MonteCarlo, InvalidTrialsThrows) {
  EXPECT_THROW(monte_carlo_variance_increase(model_of(8, 1.0, 1.0, 0.1), 0, 1),
               std::invalid_argument);
}

TEST(WgradNoiseFactor, PinnedRatios) {
  EXPECT_DOUBLE_EQ(relative_wgrad_noise_factor(65536, 1280), 51.2);
  EXPECT_DOUBLE_EQ(relative_wgrad_noise_factor(65536, 5120), 12.8);
  EXPECT_DOUBLE_EQ(relative_wgrad_noise_factor(4096, 4096), 1.0);
  EXPECT_THROW(relative_wgrad_noise_factor(0, 10), std::invalid_argument);
}

TEST(NoiseReport, RowsAreSelfConsistent) {
  std::vector<int64_t> ks{64, 256};
  auto rows = noise_report(ks, 0.05, 10000, 5);
  ASSERT_EQ(rows.size(), ks.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].k, ks[i]);
    EXPECT_DOUBLE_EQ(rows[i].predicted,
                     predicted_variance_increase(model_of(ks[i], 1.0, 1.0, 0.05)));
    EXPECT_DOUBLE_EQ(rows[i].rel_error,
                     std::abs(rows[i].empirical - rows[i].predicted) / rows[i].predicted);
    EXPECT_LT(rows[i].rel_error, 0.05);
  }
}

TEST(Int8Bridge, HalfStepModelPredictsErrorVariance) {
  // slope of empirical error variance against the half-step prediction
  // across inner dimensions should be ~1
  std::vector<double> pred, emp;
  for (int64_t k : {64, 256, 1024}) {
    BridgePoint p = int8_error_variance_point(k, 2000, 17);
    EXPECT_EQ(p.k, k);
    EXPECT_GT(p.empirical, 0.0);
    EXPECT_NEAR(p.empirical / p.predicted, 1.0, 0.15) << "k = " << k;
    pred.push_back(p.predicted);
    emp.push_back(p.empirical);
  }
  EXPECT_GT(emp.back(), emp.front());  // longer reductions accumulate more noise
  EXPECT_NEAR(least_squares_slope(pred, emp), 1.0, 0.10);
}

TEST(LeastSquaresSlope, ExactOnSyntheticLine) {
  std::vector<double> x{1.0, 2.0, 3.0, 5.0};
  std::vector<double> y;
  for (double xi : x) y.push_back(3.0 * xi + 7.0);
  EXPECT_DOUBLE_EQ(least_squares_slope(x, y), 3.0);
}

TEST(LeastSquaresSlope, DegenerateInputsThrow) {
  EXPECT_THROW(least_squares_slope({1.0}, {2.0}), std::invalid_argument);
  EXPECT_THROW(least_squares_slope({1.0, 2.0}, {1.0, 2.0, 3.0}), std::invalid_argument);
  EXPECT_THROW(least_squares_slope({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

}  // namespace
}  // namespace lowprec
