#include "calibcusum/probability.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calibcusum/errors.hpp"

namespace calibcusum {

double clamp_probability(double p) noexcept {
  return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

double logit(double p) noexcept {
  const double c = clamp_probability(p);
  return std::log(c) - std::log1p(-c);
}

double inverse_logit(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void LloParams::validate() const {
  if (!std::isfinite(delta) || !std::isfinite(gamma)) {
    throw ParameterError("LLO parameters must be finite");
  }
  if (delta <= 0.0) {
    throw ParameterError("LLO delta must be positive, got " + std::to_string(delta));
  }
}

double llo_adjust(double x, const LloParams& params) {
  if (!std::isfinite(x)) throw ParameterError("llo_adjust: non-finite probability");
  params.validate();
  if (params.is_identity()) return clamp_probability(x);
  return inverse_logit(params.gamma * logit(x) + std::log(params.delta));
}

double bernoulli_log_pmf(double p, std::uint8_t y) noexcept {
  const double c = clamp_probability(p);
  return y != 0 ? std::log(c) : std::log1p(-c);
}

void TimeBatch::validate() const {
  if (predictions.size() != outcomes.size()) {
    throw InputError("batch at t=" + std::to_string(time_index) +
                     ": predictions and outcomes differ in length");
  }
  if (predictions.empty()) {
    throw InputError("batch at t=" + std::to_string(time_index) + " is empty");
  }
}

namespace {

void check_lengths(std::span<const double> p, std::span<const std::uint8_t> y) {
  if (p.size() != y.size()) {
    throw InputError("predictions and outcomes differ in length (" +
                     std::to_string(p.size()) + " vs " + std::to_string(y.size()) + ")");
  }
}

}  // namespace

double loglik_calibrated(std::span<const double> predictions,
                         std::span<const std::uint8_t> outcomes) {
  check_lengths(predictions, outcomes);
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += bernoulli_log_pmf(predictions[i], outcomes[i]);
  }
  return total;
}

double loglik_calibrated(const TimeBatch& batch) {
  batch.validate();
  return loglik_calibrated(batch.predictions, batch.outcomes);
}

double loglik_uncalibrated(std::span<const double> predictions,
                           std::span<const std::uint8_t> outcomes,
                           const LloParams& params) {
  check_lengths(predictions, outcomes);
  params.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += bernoulli_log_pmf(llo_adjust(predictions[i], params), outcomes[i]);
  }
  return total;
}

double loglik_uncalibrated(const TimeBatch& batch, const LloParams& params) {
  batch.validate();
  return loglik_uncalibrated(batch.predictions, batch.outcomes, params);
}

}  // namespace calibcusum
