#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calibcusum/cusum.hpp"
#include "calibcusum/dpcl.hpp"
#include "calibcusum/probability.hpp"
#include "calibcusum/rng.hpp"

namespace calibcusum {

/// Number of trials per time point: fixed n, or 1 + Poisson(lambda).
struct BatchSizeModel {
  enum class Kind { kFixed, kShiftedPoisson };
  Kind kind = Kind::kFixed;
  std::size_t n = 1;
  double lambda = 1.0;

  static BatchSizeModel fixed(std::size_t n);
  static BatchSizeModel shifted_poisson(double lambda);
  void validate() const;
  std::size_t draw(CounterRng& rng) const;
  std::string describe() const;  // "Fixed n=1", "lPoisson lambda=3"
};

/// A regime switch in the generated stream: from step `after_step + 1` on,
/// predictions are g(u; prediction_distortion) with u ~ uniform(0,1) and
/// outcomes follow Bernoulli(g(p; truth)).
struct ChangePoint {
  std::size_t after_step = 0;
  LloParams truth;
  LloParams prediction_distortion;
};

/// Synthetic monitoring stream: uniform(0,1) predictions, outcomes drawn from
/// Bernoulli(g(p; truth)). Identity truth is the in-control scenario.
struct GeneratorSpec {
  LloParams truth;
  BatchSizeModel batch;
  std::size_t horizon_cap = 20000;
  std::optional<ChangePoint> change;

  bool in_control() const noexcept { return truth.is_identity() && !change; }
  void validate() const;
};

struct RunResult {
  std::size_t length = 0;  // first t with S_t > limit_t, or the cap when truncated
  bool truncated = false;
};

inline constexpr std::array<double, 5> kSummaryPercentiles{10, 25, 50, 75, 90};

struct RunLengthSummary {
  double arl = 0.0;
  double sdrl = 0.0;
  std::array<double, 5> quantiles{};  // at kSummaryPercentiles
  std::size_t replications = 0;
  std::size_t truncated = 0;
};

/// Quantile of sorted data by linear interpolation between order statistics
/// (position (n - 1) q, zero-based).
double interpolated_quantile(std::span<const double> sorted, double q);

/// Mean, sample standard deviation, and interpolated quantiles over the
/// non-truncated runs. Throws InputError when no run finished.
RunLengthSummary summarize(std::span<const RunResult> runs);

/// Run-length distribution of a chart whose per-step false alarm rate is
/// exactly alpha: geometric with mean 1/alpha. Quantiles count the failures
/// before the first success.
RunLengthSummary geometric_reference(double alpha);

/// One synthetic prediction stream with its DPCLs, shared by many outcome
/// replications. Steps are generated lazily and deterministically from the seed.
class CellSimulator {
 public:
  CellSimulator(GeneratorSpec gen, ChartSpec spec, std::uint64_t seed, std::size_t threads = 1);

  /// Zero-state run of outcome replication r.
  RunResult run(std::uint64_t replication);
  /// Replications 0..count-1, evaluated in lockstep so the shared stream and
  /// limits only grow as far as the longest surviving run needs.
  std::vector<RunResult> run_many(std::size_t count);

  /// Extends the stream and limits to at least `steps` time points.
  void ensure(std::size_t steps);
  std::size_t steps() const noexcept { return limits_.size(); }
  std::span<const double> limits() const noexcept { return limits_; }
  std::span<const double> predictions(std::size_t t) const { return predictions_.at(t - 1); }

 private:
  struct Step {
    IncrementTable table;
    std::vector<double> event_prob;
  };
  double observe(std::uint64_t replication, std::size_t t) const;

  GeneratorSpec gen_;
  ChartSpec spec_;
  std::uint64_t seed_;
  std::size_t threads_;
  DpclEngine engine_;
  std::vector<std::vector<double>> predictions_;
  std::vector<Step> steps_;
  std::vector<double> limits_;
};

/// Single run from a fresh stream: deterministic in (gen, spec, seed).
RunResult simulate_run(const GeneratorSpec& gen, const ChartSpec& spec, std::uint64_t seed);

struct StudyCell {
  ChartSpec chart;
  GeneratorSpec generator;
};

struct StudyOptions {
  std::size_t replications = 1000;
  std::uint64_t seed = 1;
  bool fresh_streams = false;  // new prediction stream + DPCLs per replication
  std::size_t threads = 1;
};

struct StudyRow {
  StudyCell cell;
  RunLengthSummary summary;
  std::vector<RunResult> runs;
};

/// One summary per cell. Cell i draws from the stream keyed (seed, i).
std::vector<StudyRow> run_study(std::span<const StudyCell> cells, const StudyOptions& options);

/// The in-control grid: shift-up (2,1) and scale-up (1,2) alternatives across
/// Fixed n=1, Fixed n=3, lPoisson 1, lPoisson 3.
std::vector<StudyCell> in_control_cells(double alpha, std::size_t replicates);
/// The out-of-control grid: truths (2,1), (1,2), (1/2,1), (1,1/2) with matched
/// alternatives across the same four batch models.
std::vector<StudyCell> out_of_control_cells(double alpha, std::size_t replicates);

/// CSV with columns Alternatives/Parameters, Distribution, ARL, SDRL, 10th..90th.
/// A geometric reference row follows when any cell is in control.
void write_study_csv(std::ostream& out, std::span<const StudyRow> rows);

}  // namespace calibcusum
