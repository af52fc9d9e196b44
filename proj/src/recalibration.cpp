#include "calibcusum/recalibration.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace calibcusum {

void CalibrationDataset::validate() const {
  if (predictions.size() != outcomes.size()) {
    throw InputError("calibration dataset: predictions and outcomes differ in length");
  }
  if (predictions.empty()) throw InputError("calibration dataset is empty");
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = predictions[i];
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw InputError("calibration dataset: prediction " + std::to_string(i) +
                       " outside [0,1]");
    }
    if (outcomes[i] > 1) {
      throw InputError("calibration dataset: outcome " + std::to_string(i) + " not binary");
    }
  }
}

double chi_square2_upper_tail(double statistic) noexcept {
  if (statistic <= 0.0) return 1.0;
  return std::exp(-0.5 * statistic);
}

namespace {

// Log-odds of the predictions are fixed across likelihood evaluations.
struct Problem {
  std::vector<double> log_odds;
  std::span<const std::uint8_t> outcomes;

  double loglik(double a, double gamma) const {
    double total = 0.0;
    for (std::size_t i = 0; i < log_odds.size(); ++i) {
      total += bernoulli_log_pmf(inverse_logit(a + gamma * log_odds[i]), outcomes[i]);
    }
    return total;
  }

  // Gradient and negated Hessian of the log-likelihood in (a, gamma).
  void derivatives(double a, double gamma, double grad[2], double info[3]) const {
    grad[0] = grad[1] = 0.0;
    info[0] = info[1] = info[2] = 0.0;
    for (std::size_t i = 0; i < log_odds.size(); ++i) {
      const double l = log_odds[i];
      const double g = inverse_logit(a + gamma * l);
      const double r = static_cast<double>(outcomes[i]) - g;
      const double w = g * (1.0 - g);
      grad[0] += r;
      grad[1] += r * l;
      info[0] += w;
      info[1] += w * l;
      info[2] += w * l * l;
    }
  }
};

Problem make_problem(const CalibrationDataset& data) {
  Problem problem;
  problem.log_odds.reserve(data.size());
  for (double x : data.predictions) problem.log_odds.push_back(logit(x));
  problem.outcomes = data.outcomes;
  return problem;
}

double negative_loglik(const gsl_vector* v, void* raw) {
  const auto* problem = static_cast<const Problem*>(raw);
  const double value = problem->loglik(gsl_vector_get(v, 0), gsl_vector_get(v, 1));
  return std::isfinite(value) ? -value : GSL_POSINF;
}

struct SimplexDeleter {
  void operator()(gsl_multimin_fminimizer* s) const { gsl_multimin_fminimizer_free(s); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

void fill_test(RecalibrationFit& fit) {
  double stat = 2.0 * (fit.loglik_at_mle - fit.loglik_at_identity);
  // Tiny negative values are optimizer noise around an identity optimum.
  if (stat < 0.0) stat = 0.0;
  fit.lrt_statistic = stat;
  fit.p_value = chi_square2_upper_tail(stat);
}

}  // namespace

double recalibration_loglik(const CalibrationDataset& data, double log_delta, double gamma) {
  return make_problem(data).loglik(log_delta, gamma);
}

RecalibrationFit fit_mle(const CalibrationDataset& data, const FitOptions& options) {
  data.validate();
  const auto ones = std::count(data.outcomes.begin(), data.outcomes.end(), std::uint8_t{1});
  if (ones == 0 || static_cast<std::size_t>(ones) == data.size()) {
    throw DegenerateDataError(
        "outcomes are all " + std::string(ones == 0 ? "0" : "1") +
        "; the likelihood is maximized on the boundary of the parameter space");
  }

  gsl_set_error_handler_off();
  const Problem problem = make_problem(data);

  RecalibrationFit fit;
  fit.loglik_at_identity = loglik_calibrated(data.predictions, data.outcomes);

  // Phase 1: Nelder-Mead from the identity (log delta = 0, gamma = 1).
  std::unique_ptr<gsl_vector, VectorDeleter> start(gsl_vector_alloc(2));
  std::unique_ptr<gsl_vector, VectorDeleter> step(gsl_vector_alloc(2));
  gsl_vector_set(start.get(), 0, 0.0);
  gsl_vector_set(start.get(), 1, 1.0);
  gsl_vector_set_all(step.get(), 0.5);

  gsl_multimin_function objective{&negative_loglik, 2, const_cast<Problem*>(&problem)};
  std::unique_ptr<gsl_multimin_fminimizer, SimplexDeleter> simplex(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2));
  gsl_multimin_fminimizer_set(simplex.get(), &objective, start.get(), step.get());

  int iter = 0;
  while (iter < options.max_iterations) {
    ++iter;
    if (gsl_multimin_fminimizer_iterate(simplex.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(simplex.get()), 1e-6) ==
        GSL_SUCCESS) {
      break;
    }
  }
  double a = gsl_vector_get(simplex->x, 0);
  double gamma = gsl_vector_get(simplex->x, 1);
  double current = -simplex->fval;

  // Phase 2: Newton polish; the log-likelihood is concave in (a, gamma).
  bool converged = false;
  while (iter < options.max_iterations) {
    ++iter;
    double grad[2];
    double info[3];
    problem.derivatives(a, gamma, grad, info);
    const double det = info[0] * info[2] - info[1] * info[1];
    if (!(det > 0.0) || !std::isfinite(det)) break;
    double da = (info[2] * grad[0] - info[1] * grad[1]) / det;
    double dg = (info[0] * grad[1] - info[1] * grad[0]) / det;

    // Backtrack until the likelihood does not decrease.
    double next = problem.loglik(a + da, gamma + dg);
    int halvings = 0;
    while (!(next >= current) && halvings < 30) {
      da *= 0.5;
      dg *= 0.5;
      next = problem.loglik(a + da, gamma + dg);
      ++halvings;
    }
    if (!(next >= current)) {
      converged = std::abs(da) + std::abs(dg) < 1e-12;
      break;
    }
    const double change = std::abs(next - current) / std::max(1.0, std::abs(current));
    a += da;
    gamma += dg;
    current = next;
    if (change < options.relative_tolerance && std::abs(da) + std::abs(dg) < 1e-6) {
      converged = true;
      break;
    }
  }

  fit.params_hat = LloParams{std::exp(a), gamma};
  fit.loglik_at_mle = current;
  fit.iterations = iter;
  fit.converged = converged;
  fill_test(fit);
  if (!converged) {
    throw FitError("MLE did not converge within " + std::to_string(options.max_iterations) +
                       " iterations",
                   fit);
  }
  return fit;
}

RecalibrationFit calibration_test(const CalibrationDataset& data, const FitOptions& options) {
  return fit_mle(data, options);
}

std::vector<double> apply_fit(std::span<const double> predictions, const RecalibrationFit& fit) {
  if (!fit.converged) throw ParameterError("apply_fit: fit did not converge");
  std::vector<double> out;
  out.reserve(predictions.size());
  for (double x : predictions) out.push_back(llo_adjust(x, fit.params_hat));
  return out;
}

}  // namespace calibcusum
