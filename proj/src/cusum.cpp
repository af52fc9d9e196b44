#include "calibcusum/cusum.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calibcusum/errors.hpp"

namespace calibcusum {

std::string_view to_string(ChartLabel label) noexcept {
  switch (label) {
    case ChartLabel::kShiftDown: return "shift-down";
    case ChartLabel::kShiftUp: return "shift-up";
    case ChartLabel::kScaleDown: return "scale-down";
    case ChartLabel::kScaleUp: return "scale-up";
    case ChartLabel::kCustom: return "custom";
  }
  return "custom";
}

ChartLabel parse_chart_label(std::string_view text) {
  for (ChartLabel l : {ChartLabel::kShiftDown, ChartLabel::kShiftUp, ChartLabel::kScaleDown,
                       ChartLabel::kScaleUp, ChartLabel::kCustom}) {
    if (text == to_string(l)) return l;
  }
  throw ConfigError("unknown chart label '" + std::string(text) + "'");
}

void ChartSpec::validate() const {
  alternative().validate();
  if (delta_a == 1.0 && gamma_a == 1.0) {
    throw ConfigError("chart alternative must differ from calibration (delta_a = gamma_a = 1)");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  bool consistent = true;
  switch (label) {
    case ChartLabel::kShiftDown: consistent = delta_a < 1.0 && gamma_a == 1.0; break;
    case ChartLabel::kShiftUp: consistent = delta_a > 1.0 && gamma_a == 1.0; break;
    case ChartLabel::kScaleDown: consistent = delta_a == 1.0 && gamma_a < 1.0; break;
    case ChartLabel::kScaleUp: consistent = delta_a == 1.0 && gamma_a > 1.0; break;
    case ChartLabel::kCustom: break;
  }
  if (!consistent) {
    throw ConfigError("chart label " + std::string(to_string(label)) +
                      " does not match delta_a=" + std::to_string(delta_a) +
                      ", gamma_a=" + std::to_string(gamma_a));
  }
}

ChartSpec ChartSpec::named(ChartLabel label, double magnitude, double alpha,
                           std::size_t replicates, std::uint64_t seed) {
  if (!(magnitude > 1.0) || !std::isfinite(magnitude)) {
    throw ConfigError("chart magnitude must be a finite value > 1");
  }
  ChartSpec spec;
  spec.alpha = alpha;
  spec.replicates = replicates;
  spec.seed = seed;
  spec.label = label;
  switch (label) {
    case ChartLabel::kShiftDown: spec.delta_a = 1.0 / magnitude; break;
    case ChartLabel::kShiftUp: spec.delta_a = magnitude; break;
    case ChartLabel::kScaleDown: spec.gamma_a = 1.0 / magnitude; break;
    case ChartLabel::kScaleUp: spec.gamma_a = magnitude; break;
    case ChartLabel::kCustom:
      throw ConfigError("custom charts take explicit (delta_a, gamma_a)");
  }
  spec.validate();
  return spec;
}

ChartSpec ChartSpec::custom(double delta_a, double gamma_a, double alpha,
                            std::size_t replicates, std::uint64_t seed) {
  ChartSpec spec{delta_a, gamma_a, alpha, replicates, seed, ChartLabel::kCustom};
  spec.validate();
  return spec;
}

double increment(const TimeBatch& batch, const ChartSpec& spec) {
  return loglik_uncalibrated(batch, spec.alternative()) - loglik_calibrated(batch);
}

CusumValue step(const CusumValue& prev, const TimeBatch& batch, const ChartSpec& spec) {
  if (batch.time_index <= prev.time_index) {
    throw SequencingError("time index " + std::to_string(batch.time_index) +
                          " does not follow " + std::to_string(prev.time_index));
  }
  const double w = increment(batch, spec);
  return CusumValue{batch.time_index, w, std::max(0.0, prev.s + w)};
}

IncrementTable::IncrementTable(std::span<const double> predictions,
                               const LloParams& alternative) {
  alternative.validate();
  if_event.reserve(predictions.size());
  if_nonevent.reserve(predictions.size());
  for (double p : predictions) {
    const double g = llo_adjust(p, alternative);
    if_event.push_back(bernoulli_log_pmf(g, 1) - bernoulli_log_pmf(p, 1));
    if_nonevent.push_back(bernoulli_log_pmf(g, 0) - bernoulli_log_pmf(p, 0));
  }
}

double IncrementTable::score(std::span<const std::uint8_t> outcomes) const noexcept {
  double w = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const double terms[2] = {if_nonevent[i], if_event[i]};
    w += terms[outcomes[i] != 0];
  }
  return w;
}

ChartTrace run_chart(std::span<const TimeBatch> batches, const ChartSpec& spec,
                     std::span<const double> limits) {
  if (batches.size() != limits.size()) {
    throw InputError("run_chart: " + std::to_string(batches.size()) + " batches but " +
                     std::to_string(limits.size()) + " limits");
  }
  ChartTrace trace;
  trace.rows.reserve(batches.size());
  CusumValue value;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    value = step(value, batches[i], spec);
    if (!trace.signal_time && value.s > limits[i]) trace.signal_time = value.time_index;
    trace.rows.push_back(TraceRow{value.time_index, batches[i].size(), value.w, value.s,
                                  limits[i], trace.signal_time.has_value()});
  }
  return trace;
}

}  // namespace calibcusum
