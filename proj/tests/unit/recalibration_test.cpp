#include "calibcusum/recalibration.hpp"

#include <gsl/gsl_cdf.h>
#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <numeric>
#include <cmath>
#include <random>

#include "../support/generators.hpp"

namespace calibcusum {
namespace {

using testing::generate_dataset;

// Central finite-difference gradient of the log-likelihood in (log delta, gamma).
std::array<double, 2> fd_gradient(const CalibrationDataset& data, const LloParams& at) {
  const double h = 1e-5;
  const double a = std::log(at.delta);
  return {(recalibration_loglik(data, a + h, at.gamma) -
           recalibration_loglik(data, a - h, at.gamma)) / (2 * h),
          (recalibration_loglik(data, a, at.gamma + h) -
           recalibration_loglik(data, a, at.gamma - h)) / (2 * h)};
}

TEST(FitMle, CalibratedDataRecoversIdentity) {
  const auto data = generate_dataset(50000, 1.0, 1.0, 101);
  const auto fit = fit_mle(data);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.params_hat.delta, 1.0, 0.05);
  EXPECT_NEAR(fit.params_hat.gamma, 1.0, 0.05);
  EXPECT_GE(fit.loglik_at_mle, fit.loglik_at_identity - 1e-8);
}

TEST(FitMle, ShiftedDataRecoversShift) {
  const auto data = generate_dataset(50000, 2.0, 1.0, 102);
  const auto fit = fit_mle(data);
  EXPECT_NEAR(fit.params_hat.delta, 2.0, 0.1);
  EXPECT_NEAR(fit.params_hat.gamma, 1.0, 0.05);
}

TEST(FitMle, GradientVanishesAtOptimum) {
  const auto data = generate_dataset(20000, 0.6, 1.7, 103);
  const auto fit = fit_mle(data);
  const auto g = fd_gradient(data, fit.params_hat);
  const double norm = std::hypot(g[0], g[1]);
  EXPECT_LT(norm / std::max(1.0, std::abs(fit.loglik_at_mle)), 1e-4);
}

TEST(FitMle, LabelFlipInvertsDelta) {
  auto data = generate_dataset(20000, 1.6, 0.7, 104);
  const auto fit = fit_mle(data);
  CalibrationDataset flipped;
  for (std::size_t i = 0; i < data.size(); ++i) {
    flipped.predictions.push_back(1.0 - data.predictions[i]);
    flipped.outcomes.push_back(1 - data.outcomes[i]);
  }
  const auto flip_fit = fit_mle(flipped);
  EXPECT_NEAR(flip_fit.params_hat.delta, 1.0 / fit.params_hat.delta, 1e-4);
  EXPECT_NEAR(flip_fit.params_hat.gamma, fit.params_hat.gamma, 1e-4);
}

TEST(FitMle, PermutationDoesNotChangeTheTest) {
  auto data = generate_dataset(5000, 1.3, 1.2, 105);
  const auto fit = fit_mle(data);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(5));
  CalibrationDataset shuffled;
  for (std::size_t i : order) {
    shuffled.predictions.push_back(data.predictions[i]);
    shuffled.outcomes.push_back(data.outcomes[i]);
  }
  const auto fit2 = fit_mle(shuffled);
  EXPECT_NEAR(fit.lrt_statistic, fit2.lrt_statistic, 1e-6 * std::max(1.0, fit.lrt_statistic));
}

TEST(FitMle, DegenerateOutcomesAreRejected) {
  CalibrationDataset zeros{{0.2, 0.4, 0.9}, {0, 0, 0}};
  CalibrationDataset ones{{0.2, 0.4, 0.9}, {1, 1, 1}};
  EXPECT_THROW(fit_mle(zeros), DegenerateDataError);
  EXPECT_THROW(fit_mle(ones), DegenerateDataError);
}

TEST(FitMle, InvalidDatasetsAreInputErrors) {
  EXPECT_THROW(fit_mle(CalibrationDataset{}), InputError);
  EXPECT_THROW(fit_mle(CalibrationDataset{{0.2, 0.3}, {1}}), InputError);
  EXPECT_THROW(fit_mle(CalibrationDataset{{0.2, 1.3}, {1, 0}}), InputError);
}

TEST(FitMle, IterationCapRaisesWithBestSoFar) {
  const auto data = generate_dataset(2000, 3.0, 0.5, 106);
  try {
    fit_mle(data, FitOptions{2, 1e-10});
    FAIL() << "expected FitError";
  } catch (const FitError& e) {
    EXPECT_FALSE(e.best_so_far().converged);
    EXPECT_EQ(e.best_so_far().iterations, 2);
    EXPECT_GT(e.best_so_far().params_hat.delta, 0.0);
  }
}

TEST(ApplyFit, Examples) {
  RecalibrationFit identity;
  identity.converged = true;
  EXPECT_EQ(apply_fit(std::vector<double>{0.42}, identity)[0], 0.42);

  RecalibrationFit cifar;
  cifar.converged = true;
  cifar.params_hat = {0.89, 0.17};
  EXPECT_NEAR(apply_fit(std::vector<double>{0.9}, cifar)[0], 0.5638972963709079, 1e-14);

  RecalibrationFit shift;
  shift.converged = true;
  shift.params_hat = {2.0, 1.0};
  EXPECT_NEAR(apply_fit(std::vector<double>{0.5}, shift)[0], 2.0 / 3.0, 1e-15);

  RecalibrationFit failed;
  EXPECT_THROW(apply_fit(std::vector<double>{0.5}, failed), ParameterError);
}

TEST(CalibrationTest, RecalibratedDataIsAFixedPoint) {
  auto data = generate_dataset(20000, 0.89, 0.17, 107);
  const auto fit = calibration_test(data);
  EXPECT_LT(fit.p_value, 1e-4);
  CalibrationDataset recal{apply_fit(data.predictions, fit), data.outcomes};
  const auto refit = calibration_test(recal);
  EXPECT_NEAR(refit.params_hat.delta, 1.0, 1e-5);
  EXPECT_NEAR(refit.params_hat.gamma, 1.0, 1e-5);
  EXPECT_LT(refit.lrt_statistic, 1e-6);
}

TEST(CalibrationTest, ChiSquareTailMatchesGsl) {
  for (double stat : {0.0, 0.1, 1.0, 5.991464547107979, 13.8, 40.0}) {
    EXPECT_NEAR(chi_square2_upper_tail(stat), gsl_cdf_chisq_Q(stat, 2.0), 1e-14);
  }
  EXPECT_EQ(chi_square2_upper_tail(-1e-12), 1.0);
}

TEST(CalibrationTest, NullRejectionRateNearLevel) {
  int rejections = 0;
  const int sims = 200;
  for (int s = 0; s < sims; ++s) {
    const auto fit = calibration_test(generate_dataset(2000, 1.0, 1.0, 1000 + s));
    if (fit.p_value < 0.05) ++rejections;
  }
  // Binomial(200, 0.05): mean 10, sd ~3.1.
  EXPECT_GE(rejections, 2);
  EXPECT_LE(rejections, 22);
}

}  // namespace
}  // namespace calibcusum
