#include "calibcusum/runlength.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "calibcusum/errors.hpp"
#include "calibcusum/parallel.hpp"

namespace calibcusum {

namespace {

constexpr std::uint64_t kStreamTag = 0x5354524541ULL;   // prediction stream
constexpr std::uint64_t kOutcomeTag = 0x4f5554434fULL;  // outcome replications
constexpr std::uint64_t kDpclTag = 0x4450434cULL;       // DPCL ensemble
constexpr std::uint64_t kFreshTag = 0x4652455348ULL;    // fresh-stream replications

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

BatchSizeModel BatchSizeModel::fixed(std::size_t n) {
  BatchSizeModel m;
  m.kind = Kind::kFixed;
  m.n = n;
  m.validate();
  return m;
}

BatchSizeModel BatchSizeModel::shifted_poisson(double lambda) {
  BatchSizeModel m;
  m.kind = Kind::kShiftedPoisson;
  m.lambda = lambda;
  m.validate();
  return m;
}

void BatchSizeModel::validate() const {
  if (kind == Kind::kFixed && n < 1) throw ConfigError("fixed batch size must be >= 1");
  if (kind == Kind::kShiftedPoisson && !(lambda > 0.0 && std::isfinite(lambda))) {
    throw ConfigError("shifted-Poisson lambda must be positive");
  }
}

std::size_t BatchSizeModel::draw(CounterRng& rng) const {
  if (kind == Kind::kFixed) return n;
  std::poisson_distribution<std::size_t> poisson(lambda);
  return 1 + poisson(rng);
}

std::string BatchSizeModel::describe() const {
  if (kind == Kind::kFixed) return "Fixed n=" + std::to_string(n);
  return "lPoisson lambda=" + format_number(lambda);
}

void GeneratorSpec::validate() const {
  truth.validate();
  batch.validate();
  if (horizon_cap < 1) throw ConfigError("horizon cap must be >= 1");
  if (change) {
    change->truth.validate();
    change->prediction_distortion.validate();
  }
}

double interpolated_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InputError("quantile of an empty sample");
  const double pos = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

RunLengthSummary summarize(std::span<const RunResult> runs) {
  RunLengthSummary summary;
  std::vector<double> lengths;
  for (const RunResult& r : runs) {
    if (r.truncated) {
      ++summary.truncated;
    } else {
      lengths.push_back(static_cast<double>(r.length));
    }
  }
  summary.replications = runs.size();
  if (lengths.empty()) throw InputError("summarize: no run signaled before truncation");

  const double n = static_cast<double>(lengths.size());
  summary.arl = std::accumulate(lengths.begin(), lengths.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : lengths) ss += (v - summary.arl) * (v - summary.arl);
  summary.sdrl = lengths.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;

  std::sort(lengths.begin(), lengths.end());
  for (std::size_t i = 0; i < kSummaryPercentiles.size(); ++i) {
    summary.quantiles[i] = interpolated_quantile(lengths, kSummaryPercentiles[i] / 100.0);
  }
  return summary;
}

RunLengthSummary geometric_reference(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  RunLengthSummary ref;
  ref.arl = 1.0 / alpha;
  ref.sdrl = std::sqrt(1.0 - alpha) / alpha;
  for (std::size_t i = 0; i < kSummaryPercentiles.size(); ++i) {
    const double q = kSummaryPercentiles[i] / 100.0;
    ref.quantiles[i] = std::ceil(std::log1p(-q) / std::log1p(-alpha)) - 1.0;
  }
  return ref;
}

CellSimulator::CellSimulator(GeneratorSpec gen, ChartSpec spec, std::uint64_t seed,
                             std::size_t threads)
    : gen_(std::move(gen)),
      spec_([&] {
        spec.seed = derive_key(seed, {kDpclTag});
        return spec;
      }()),
      seed_(seed),
      threads_(threads),
      engine_(spec_, threads) {
  gen_.validate();
}

void CellSimulator::ensure(std::size_t steps) {
  while (limits_.size() < steps) {
    const std::uint64_t t = limits_.size() + 1;
    CounterRng rng(derive_key(seed_, {kStreamTag, t}));
    const bool changed = gen_.change && t > gen_.change->after_step;
    const LloParams& truth = changed ? gen_.change->truth : gen_.truth;

    const std::size_t n = gen_.batch.draw(rng);
    std::vector<double> p(n);
    for (double& v : p) {
      v = rng.uniform();
      if (changed) v = llo_adjust(v, gen_.change->prediction_distortion);
    }
    Step step{IncrementTable(p, spec_.alternative()), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) step.event_prob[i] = llo_adjust(p[i], truth);

    limits_.push_back(engine_.advance(p, step.table));
    predictions_.push_back(std::move(p));
    steps_.push_back(std::move(step));
  }
}

double CellSimulator::observe(std::uint64_t replication, std::size_t t) const {
  const Step& step = steps_[t - 1];
  CounterRng rng(derive_key(seed_, {kOutcomeTag, replication, t}));
  double w = 0.0;
  for (std::size_t i = 0; i < step.event_prob.size(); ++i) {
    w += rng.uniform() < step.event_prob[i] ? step.table.if_event[i] : step.table.if_nonevent[i];
  }
  return w;
}

RunResult CellSimulator::run(std::uint64_t replication) {
  double s = 0.0;
  for (std::size_t t = 1; t <= gen_.horizon_cap; ++t) {
    ensure(t);
    s = std::max(0.0, s + observe(replication, t));
    if (s > limits_[t - 1]) return RunResult{t, false};
  }
  return RunResult{gen_.horizon_cap, true};
}

std::vector<RunResult> CellSimulator::run_many(std::size_t count) {
  std::vector<RunResult> results(count);
  std::vector<double> stat(count, 0.0);
  std::vector<std::size_t> position(count, 0);
  std::vector<char> done(count, 0);

  std::size_t horizon = std::min<std::size_t>(gen_.horizon_cap, 128);
  while (true) {
    ensure(horizon);
    parallel_for(count, threads_, [&](std::size_t begin, std::size_t end) {
      for (std::size_t r = begin; r < end; ++r) {
        if (done[r]) continue;
        for (std::size_t t = position[r] + 1; t <= horizon; ++t) {
          stat[r] = std::max(0.0, stat[r] + observe(r, t));
          if (stat[r] > limits_[t - 1]) {
            results[r] = RunResult{t, false};
            done[r] = 1;
            break;
          }
        }
        position[r] = horizon;
      }
    });
    const bool all_done = std::all_of(done.begin(), done.end(), [](char d) { return d != 0; });
    if (all_done) break;
    if (horizon == gen_.horizon_cap) {
      for (std::size_t r = 0; r < count; ++r) {
        if (!done[r]) results[r] = RunResult{gen_.horizon_cap, true};
      }
      break;
    }
    horizon = std::min(gen_.horizon_cap, 2 * horizon);
  }
  return results;
}

RunResult simulate_run(const GeneratorSpec& gen, const ChartSpec& spec, std::uint64_t seed) {
  CellSimulator sim(gen, spec, seed);
  return sim.run(0);
}

std::vector<StudyRow> run_study(std::span<const StudyCell> cells, const StudyOptions& options) {
  std::vector<StudyRow> rows;
  rows.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const StudyCell& cell = cells[i];
    cell.chart.validate();
    const std::uint64_t cell_seed = derive_key(options.seed, {i});
    StudyRow row{cell, {}, {}};
    if (options.fresh_streams) {
      row.runs.resize(options.replications);
      parallel_for(options.replications, options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
          row.runs[r] = simulate_run(cell.generator, cell.chart,
                                     derive_key(cell_seed, {kFreshTag, r}));
        }
      });
    } else {
      CellSimulator sim(cell.generator, cell.chart, cell_seed, options.threads);
      row.runs = sim.run_many(options.replications);
    }
    row.summary = summarize(row.runs);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::vector<BatchSizeModel> study_batch_models() {
  return {BatchSizeModel::fixed(1), BatchSizeModel::fixed(3), BatchSizeModel::shifted_poisson(1),
          BatchSizeModel::shifted_poisson(3)};
}

}  // namespace

std::vector<StudyCell> in_control_cells(double alpha, std::size_t replicates) {
  std::vector<StudyCell> cells;
  for (const BatchSizeModel& batch : study_batch_models()) {
    for (ChartLabel label : {ChartLabel::kShiftUp, ChartLabel::kScaleUp}) {
      StudyCell cell;
      cell.chart = ChartSpec::named(label, 2.0, alpha, replicates, 0);
      cell.generator.batch = batch;
      cells.push_back(cell);
    }
  }
  return cells;
}

std::vector<StudyCell> out_of_control_cells(double alpha, std::size_t replicates) {
  const std::array<std::pair<LloParams, ChartLabel>, 4> truths{{
      {{2.0, 1.0}, ChartLabel::kShiftUp},
      {{1.0, 2.0}, ChartLabel::kScaleUp},
      {{0.5, 1.0}, ChartLabel::kShiftDown},
      {{1.0, 0.5}, ChartLabel::kScaleDown},
  }};
  std::vector<StudyCell> cells;
  for (const auto& [truth, label] : truths) {
    for (const BatchSizeModel& batch : study_batch_models()) {
      StudyCell cell;
      cell.chart = ChartSpec::named(label, 2.0, alpha, replicates, 0);
      cell.generator.truth = truth;
      cell.generator.batch = batch;
      cells.push_back(cell);
    }
  }
  return cells;
}

namespace {

std::string param_text(double v) {
  if (v == 0.5) return "1/2";
  return format_number(v);
}

void write_row(std::ostream& out, const std::string& params, const std::string& distribution,
               const RunLengthSummary& s) {
  out << '"' << params << "\"," << distribution << std::fixed << std::setprecision(2) << ','
      << s.arl << ',' << s.sdrl;
  for (double q : s.quantiles) out << ',' << q;
  out << std::defaultfloat << '\n';
}

}  // namespace

void write_study_csv(std::ostream& out, std::span<const StudyRow> rows) {
  out << "Alternatives/Parameters,Distribution,ARL,SDRL,10th,25th,50th,75th,90th\n";
  std::optional<double> reference_alpha;
  for (const StudyRow& row : rows) {
    const GeneratorSpec& gen = row.cell.generator;
    std::string params;
    if (gen.in_control()) {
      params = "delta_a=" + param_text(row.cell.chart.delta_a) +
               ",gamma_a=" + param_text(row.cell.chart.gamma_a);
      reference_alpha = row.cell.chart.alpha;
    } else {
      params = "delta=" + param_text(gen.truth.delta) + ",gamma=" + param_text(gen.truth.gamma);
    }
    write_row(out, params, gen.batch.describe(), row.summary);
  }
  if (reference_alpha) {
    write_row(out, "", "Geometric(probability=alpha=" + format_number(*reference_alpha) + ")",
              geometric_reference(*reference_alpha));
  }
}

}  // namespace calibcusum
