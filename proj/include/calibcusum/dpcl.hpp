#pragma once

#include <cstddef>
#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "calibcusum/cusum.hpp"
#include "calibcusum/errors.hpp"
#include "calibcusum/parallel.hpp"
#include "calibcusum/rng.hpp"

namespace calibcusum {

/// The M simulated in-control CUSUM paths that define the dynamic
/// probability control limit at the current step.
struct ReplicateEnsemble {
  std::vector<double> statistics;
  std::size_t time_index = 0;          // number of steps taken
  std::optional<double> limit;         // unset before the first step
  std::vector<std::uint32_t> survivors;  // replicates with statistic <= limit

  std::size_t size() const noexcept { return statistics.size(); }
  /// Share of replicate statistics strictly above the limit.
  double fraction_above_limit() const noexcept;
};

/// Rank k (1-based) of the order statistic used as the limit: ceil((1 - alpha) M).
std::size_t limit_rank(double alpha, std::size_t replicates);

/// M replicates at zero. Throws ConfigError when M < 2.
ReplicateEnsemble init_ensemble(const ChartSpec& spec);

namespace detail {

/// The previous step's statistics a replicate may continue from. Before the
/// first step every replicate starts at zero.
inline std::vector<double> resampling_pool(const ReplicateEnsemble& prev) {
  if (prev.time_index == 0) return std::vector<double>(prev.size(), 0.0);
  std::vector<double> pool;
  pool.reserve(prev.survivors.size());
  for (std::uint32_t i : prev.survivors) pool.push_back(prev.statistics[i]);
  return pool;
}

/// k-th smallest value (1-based).
double order_statistic(std::span<const double> values, std::size_t k);

void finish_step(ReplicateEnsemble& next, double alpha);

}  // namespace detail

/// One step of the replicate recursion with caller-supplied randomness.
/// `draw(q, pool_size, outcomes)` fills the simulated outcomes of replicate q
/// and returns the pool position it resumes from.
template <class DrawFn>
ReplicateEnsemble advance_with(const ReplicateEnsemble& prev, const IncrementTable& table,
                               double alpha, DrawFn&& draw, std::size_t threads = 1) {
  if (table.size() == 0) throw InputError("advance: empty prediction vector");
  const std::vector<double> pool = detail::resampling_pool(prev);
  if (pool.empty()) throw ConfigError("advance: empty resampling pool");

  ReplicateEnsemble next;
  next.time_index = prev.time_index + 1;
  next.statistics.resize(prev.size());
  parallel_for(prev.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint8_t> outcomes(table.size());
    for (std::size_t q = begin; q < end; ++q) {
      const std::size_t pick = draw(q, pool.size(), std::span<std::uint8_t>(outcomes));
      next.statistics[q] = std::max(0.0, pool[pick] + table.score(outcomes));
    }
  });
  detail::finish_step(next, alpha);
  return next;
}

/// One step of the DPCL algorithm: each replicate resumes from a statistic
/// drawn with replacement from the previous survivors, simulates calibrated
/// outcomes y ~ Bernoulli(p_t), adds its log-likelihood ratio, and floors at
/// zero. The new limit is the ceil((1 - alpha) M)-th order statistic.
///
/// Draws for replicate q at step t come from the counter stream
/// (spec.seed, t, q), so results do not depend on `threads`.
ReplicateEnsemble advance(const ReplicateEnsemble& prev, std::span<const double> predictions,
                          const ChartSpec& spec, std::size_t threads = 1);
ReplicateEnsemble advance(const ReplicateEnsemble& prev, const IncrementTable& table,
                          std::span<const double> predictions, const ChartSpec& spec,
                          std::size_t threads = 1);

/// Stateful wrapper that owns one chart's ensemble.
class DpclEngine {
 public:
  explicit DpclEngine(ChartSpec spec, std::size_t threads = 1);
  DpclEngine(ChartSpec spec, ReplicateEnsemble restored, std::size_t threads = 1);

  /// Advances one time step and returns the new control limit.
  double advance(std::span<const double> predictions);
  double advance(std::span<const double> predictions, const IncrementTable& table);

  const ReplicateEnsemble& ensemble() const noexcept { return ensemble_; }
  const ChartSpec& spec() const noexcept { return spec_; }

 private:
  ChartSpec spec_;
  std::size_t threads_;
  ReplicateEnsemble ensemble_;
};

/// One limit per batch; outcomes are ignored.
std::vector<double> limits_for_stream(std::span<const TimeBatch> batches, const ChartSpec& spec,
                                      std::size_t threads = 1);

}  // namespace calibcusum
