#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calibcusum/probability.hpp"

namespace calibcusum {

enum class ChartLabel { kShiftDown, kShiftUp, kScaleDown, kScaleUp, kCustom };

std::string_view to_string(ChartLabel label) noexcept;
ChartLabel parse_chart_label(std::string_view text);

/// One one-sided calibration CUSUM chart: the alternative (delta_a, gamma_a)
/// it is tuned to detect plus the control-limit settings.
struct ChartSpec {
  double delta_a = 1.0;
  double gamma_a = 1.0;
  double alpha = 0.005;          // conditional false alarm rate
  std::size_t replicates = 5000;  // Monte Carlo ensemble size M
  std::uint64_t seed = 0;
  ChartLabel label = ChartLabel::kCustom;

  LloParams alternative() const noexcept { return {delta_a, gamma_a}; }
  /// Checks the alternative differs from calibration, alpha in (0,1), and
  /// that a named label agrees with the parameters.
  void validate() const;

  /// `magnitude` > 1 is the departure size: shift charts use delta = m or 1/m,
  /// scale charts gamma = m or 1/m.
  static ChartSpec named(ChartLabel label, double magnitude, double alpha,
                         std::size_t replicates, std::uint64_t seed);
  static ChartSpec custom(double delta_a, double gamma_a, double alpha,
                          std::size_t replicates, std::uint64_t seed);
};

/// Chart statistic after consuming the batch with the given time index.
struct CusumValue {
  std::int64_t time_index = 0;
  double w = 0.0;
  double s = 0.0;
};

/// W_t = log f_u(y_t; delta_a, gamma_a) - log f_c(y_t).
double increment(const TimeBatch& batch, const ChartSpec& spec);

/// S_t = max(0, S_{t-1} + W_t). Throws SequencingError if the batch's time
/// index does not exceed prev.time_index.
CusumValue step(const CusumValue& prev, const TimeBatch& batch, const ChartSpec& spec);

/// Per-trial log-likelihood-ratio contributions for a fixed prediction vector:
/// W = sum_i (y_i ? if_event[i] : if_nonevent[i]). Used wherever many outcome
/// vectors are scored against the same predictions.
struct IncrementTable {
  std::vector<double> if_event;
  std::vector<double> if_nonevent;

  IncrementTable() = default;
  IncrementTable(std::span<const double> predictions, const LloParams& alternative);

  std::size_t size() const noexcept { return if_event.size(); }
  double score(std::span<const std::uint8_t> outcomes) const noexcept;
};

struct TraceRow {
  std::int64_t time_index = 0;
  std::size_t batch_size = 0;
  double w = 0.0;
  double s = 0.0;
  double limit = 0.0;
  bool signaled = false;  // at or after the first crossing
};

struct ChartTrace {
  std::vector<TraceRow> rows;
  std::optional<std::int64_t> signal_time;
};

/// Runs the chart over a stream against precomputed limits (one per batch).
/// The first t with S_t > limit_t is the signal time; rows after it are kept
/// and flagged as post-signal.
ChartTrace run_chart(std::span<const TimeBatch> batches, const ChartSpec& spec,
                     std::span<const double> limits);

}  // namespace calibcusum
