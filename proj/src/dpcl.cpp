#include "calibcusum/dpcl.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace calibcusum {

double ReplicateEnsemble::fraction_above_limit() const noexcept {
  if (!limit || statistics.empty()) return 0.0;
  const auto above = std::count_if(statistics.begin(), statistics.end(),
                                   [&](double s) { return s > *limit; });
  return static_cast<double>(above) / static_cast<double>(statistics.size());
}

std::size_t limit_rank(double alpha, std::size_t replicates) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (replicates == 0) throw ConfigError("ensemble needs at least one replicate");
  // Guard against (1 - alpha) * M landing a hair above an integer.
  const double target = (1.0 - alpha) * static_cast<double>(replicates);
  auto k = static_cast<std::size_t>(std::ceil(target - 1e-9 * static_cast<double>(replicates)));
  return std::clamp<std::size_t>(k, 1, replicates);
}

ReplicateEnsemble init_ensemble(const ChartSpec& spec) {
  spec.validate();
  if (spec.replicates < 2) {
    throw ConfigError("DPCL ensemble needs M >= 2 replicates, got " +
                      std::to_string(spec.replicates));
  }
  ReplicateEnsemble ensemble;
  ensemble.statistics.assign(spec.replicates, 0.0);
  return ensemble;
}

namespace detail {

double order_statistic(std::span<const double> values, std::size_t k) {
  const std::size_t from_top = values.size() - k + 1;
  if (from_top <= 64) {
    // Keep the `from_top` largest values in a min-heap; its root is the answer.
    std::vector<double> heap(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(from_top));
    std::make_heap(heap.begin(), heap.end(), std::greater<>{});
    for (std::size_t i = from_top; i < values.size(); ++i) {
      if (values[i] > heap.front()) {
        std::pop_heap(heap.begin(), heap.end(), std::greater<>{});
        heap.back() = values[i];
        std::push_heap(heap.begin(), heap.end(), std::greater<>{});
      }
    }
    return heap.front();
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   sorted.end());
  return sorted[k - 1];
}

void finish_step(ReplicateEnsemble& next, double alpha) {
  const double limit = order_statistic(next.statistics, limit_rank(alpha, next.size()));
  next.limit = limit;
  next.survivors.clear();
  next.survivors.reserve(next.size());
  for (std::size_t q = 0; q < next.size(); ++q) {
    if (next.statistics[q] <= limit) next.survivors.push_back(static_cast<std::uint32_t>(q));
  }
}

}  // namespace detail

ReplicateEnsemble advance(const ReplicateEnsemble& prev, const IncrementTable& table,
                          std::span<const double> predictions, const ChartSpec& spec,
                          std::size_t threads) {
  if (predictions.size() != table.size()) {
    throw InputError("advance: increment table does not match predictions");
  }
  std::vector<double> event_prob(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!std::isfinite(predictions[i])) throw ParameterError("advance: non-finite prediction");
    event_prob[i] = clamp_probability(predictions[i]);
  }
  const std::uint64_t t = prev.time_index + 1;
  const std::uint64_t step_key = derive_key(spec.seed, {t});
  auto draw = [&](std::size_t q, std::size_t pool_size, std::span<std::uint8_t> outcomes) {
    CounterRng rng(mix64(step_key ^ (static_cast<std::uint64_t>(q) * 0xd1b54a32d192ed03ULL)));
    const auto pick = static_cast<std::size_t>(rng.below(pool_size));
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      outcomes[i] = static_cast<std::uint8_t>(rng.uniform() < event_prob[i]);
    }
    return pick;
  };
  return advance_with(prev, table, spec.alpha, draw, threads);
}

ReplicateEnsemble advance(const ReplicateEnsemble& prev, std::span<const double> predictions,
                          const ChartSpec& spec, std::size_t threads) {
  const IncrementTable table(predictions, spec.alternative());
  return advance(prev, table, predictions, spec, threads);
}

DpclEngine::DpclEngine(ChartSpec spec, std::size_t threads)
    : spec_(spec), threads_(threads), ensemble_(init_ensemble(spec)) {}

DpclEngine::DpclEngine(ChartSpec spec, ReplicateEnsemble restored, std::size_t threads)
    : spec_(spec), threads_(threads), ensemble_(std::move(restored)) {
  spec_.validate();
  if (ensemble_.size() != spec_.replicates) {
    throw SnapshotMismatchError("restored ensemble has " + std::to_string(ensemble_.size()) +
                                " replicates, chart expects " +
                                std::to_string(spec_.replicates));
  }
}

double DpclEngine::advance(std::span<const double> predictions) {
  const IncrementTable table(predictions, spec_.alternative());
  return advance(predictions, table);
}

double DpclEngine::advance(std::span<const double> predictions, const IncrementTable& table) {
  ensemble_ = calibcusum::advance(ensemble_, table, predictions, spec_, threads_);
  return *ensemble_.limit;
}

std::vector<double> limits_for_stream(std::span<const TimeBatch> batches, const ChartSpec& spec,
                                      std::size_t threads) {
  if (batches.empty()) throw InputError("limits_for_stream: empty stream");
  DpclEngine engine(spec, threads);
  std::vector<double> limits;
  limits.reserve(batches.size());
  for (const TimeBatch& batch : batches) limits.push_back(engine.advance(batch.predictions));
  return limits;
}

}  // namespace calibcusum
