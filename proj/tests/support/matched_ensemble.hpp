#pragma once

// Drives the engine's step recursion with deterministic draws so that the
// replicate multiset reproduces the exact conditional outcome distribution at
// every step. M grows until every value class and outcome split is an
// integer number of replicates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "calibcusum/dpcl.hpp"

namespace calibcusum::oracle {

struct MatchedRun {
  std::size_t replicates = 0;
  std::vector<double> limits;
};

namespace detail_matched {

struct Draw {
  std::uint32_t pick;
  std::uint8_t y;
};

// Returns the factor M must grow by, or 1 when the schedule is exact.
inline std::uint64_t build_schedule(const std::vector<double>& pool, std::size_t m, double p,
                                    std::vector<Draw>& schedule) {
  std::vector<std::uint32_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0U);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pool[a] < pool[b]; });
  schedule.clear();
  const std::uint64_t total = pool.size();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && pool[order[j]] == pool[order[i]]) ++j;
    const std::uint64_t count = j - i;
    const std::uint64_t scaled = m * count;
    if (scaled % total != 0) return total / std::gcd(scaled, total);
    const std::uint64_t children = scaled / total;
    const double ones = static_cast<double>(children) * p;
    if (ones != std::floor(ones)) return 2;
    for (std::uint64_t c = 0; c < children; ++c) {
      schedule.push_back({order[i], static_cast<std::uint8_t>(c < static_cast<std::uint64_t>(ones))});
    }
    i = j;
  }
  return 1;
}

}  // namespace detail_matched

/// Limits of a single-trial stream from an exactly matched ensemble, or
/// nullopt when no M up to `max_replicates` represents every step exactly.
inline std::optional<MatchedRun> matched_limits(const std::vector<double>& predictions,
                                                ChartSpec spec,
                                                std::size_t max_replicates = 1U << 22) {
  std::size_t m = 2;
  while (m <= max_replicates) {
    spec.replicates = m;
    ReplicateEnsemble e = init_ensemble(spec);
    MatchedRun run{m, {}};
    std::uint64_t grow = 1;
    std::vector<detail_matched::Draw> schedule;
    for (double p : predictions) {
      grow = detail_matched::build_schedule(detail::resampling_pool(e), m, p, schedule);
      if (grow != 1) break;
      const IncrementTable table(std::vector<double>{p}, spec.alternative());
      e = advance_with(e, table, spec.alpha,
                       [&](std::size_t q, std::size_t, std::span<std::uint8_t> y) {
                         y[0] = schedule[q].y;
                         return static_cast<std::size_t>(schedule[q].pick);
                       });
      run.limits.push_back(*e.limit);
    }
    if (grow == 1) return run;
    m *= grow;
  }
  return std::nullopt;
}

}  // namespace calibcusum::oracle
