#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "calibcusum/errors.hpp"
#include "calibcusum/probability.hpp"

namespace calibcusum {

/// Predictions x and binary outcomes y used to fit or test calibration.
struct CalibrationDataset {
  std::vector<double> predictions;
  std::vector<std::uint8_t> outcomes;

  std::size_t size() const noexcept { return predictions.size(); }
  void validate() const;
};

struct RecalibrationFit {
  LloParams params_hat;
  double loglik_at_mle = 0.0;
  double loglik_at_identity = 0.0;
  double lrt_statistic = 0.0;
  double p_value = 1.0;
  bool converged = false;
  int iterations = 0;
};

/// Outcomes are all 0 or all 1; the likelihood has no interior maximum.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// The optimizer hit its iteration cap. Carries the best point found.
class FitError : public Error {
 public:
  FitError(const std::string& what, RecalibrationFit best)
      : Error(what), best_(best) {}
  const RecalibrationFit& best_so_far() const noexcept { return best_; }

 private:
  RecalibrationFit best_;
};

struct FitOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-10;
};

/// Log-likelihood of the dataset under g(x; exp(log_delta), gamma).
double recalibration_loglik(const CalibrationDataset& data, double log_delta, double gamma);

/// Maximum-likelihood (delta, gamma). A simplex search over (log delta, gamma)
/// from the identity, polished by Newton steps on the analytic derivatives.
/// Also fills the likelihood-ratio statistic and its chi-square(2) p-value.
RecalibrationFit fit_mle(const CalibrationDataset& data, const FitOptions& options = {});

/// Likelihood-ratio test of H0: delta = gamma = 1.
RecalibrationFit calibration_test(const CalibrationDataset& data,
                                  const FitOptions& options = {});

/// Recalibrated predictions g(x_i; delta_hat, gamma_hat).
std::vector<double> apply_fit(std::span<const double> predictions, const RecalibrationFit& fit);

/// Upper tail of the chi-square distribution with two degrees of freedom.
double chi_square2_upper_tail(double statistic) noexcept;

}  // namespace calibcusum
