#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace calibcusum {

/// Every probability is clamped to [kProbabilityEpsilon, 1 - kProbabilityEpsilon]
/// before it enters a log or log-odds transform.
inline constexpr double kProbabilityEpsilon = 1e-12;

double clamp_probability(double p) noexcept;

/// log(p / (1 - p)) of the clamped probability.
double logit(double p) noexcept;
double inverse_logit(double z) noexcept;

/// Shift/scale pair of the linear-log-odds adjustment.
struct LloParams {
  double delta = 1.0;  // odds multiplier, must be > 0
  double gamma = 1.0;  // log-odds slope, any real

  bool is_identity() const noexcept { return delta == 1.0 && gamma == 1.0; }
  void validate() const;

  friend bool operator==(const LloParams&, const LloParams&) = default;
};

/// g(x; delta, gamma) = delta x^gamma / (delta x^gamma + (1-x)^gamma),
/// evaluated as inverse_logit(gamma * logit(x) + log(delta)).
/// The identity parameters return the clamped input unchanged.
double llo_adjust(double x, const LloParams& params);

/// Log-probability of a single Bernoulli outcome under clamped p.
double bernoulli_log_pmf(double p, std::uint8_t y) noexcept;

/// The n_t >= 1 predictions and binary outcomes observed at one time point.
struct TimeBatch {
  std::int64_t time_index = 1;
  std::vector<double> predictions;
  std::vector<std::uint8_t> outcomes;

  std::size_t size() const noexcept { return predictions.size(); }
  void validate() const;
};

/// Sum of Bernoulli log-probabilities with the predictions taken as calibrated.
double loglik_calibrated(std::span<const double> predictions,
                         std::span<const std::uint8_t> outcomes);
double loglik_calibrated(const TimeBatch& batch);

/// Same sum with every prediction replaced by llo_adjust(p, params).
double loglik_uncalibrated(std::span<const double> predictions,
                           std::span<const std::uint8_t> outcomes,
                           const LloParams& params);
double loglik_uncalibrated(const TimeBatch& batch, const LloParams& params);

}  // namespace calibcusum
