#include "calibcusum/monitor.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "calibcusum/config.hpp"

namespace calibcusum {
namespace {

std::vector<TimeBatch> random_stream(std::size_t steps, std::uint64_t seed, std::size_t change = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::poisson_distribution<int> extra(2.0);
  std::vector<TimeBatch> out;
  for (std::size_t t = 1; t <= steps; ++t) {
    TimeBatch b;
    b.time_index = static_cast<std::int64_t>(t);
    const int n = 1 + extra(rng);
    for (int i = 0; i < n; ++i) {
      const double truth = u(rng);
      // After the change the model overstates its confidence.
      const double p = change && t > change ? llo_adjust(truth, LloParams{1.0, 2.0}) : truth;
      b.predictions.push_back(p);
      b.outcomes.push_back(u(rng) < truth ? 1 : 0);
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<ChartSpec> four_charts(std::size_t m = 400, double alpha = 0.01) {
  std::vector<ChartSpec> charts;
  for (auto label : {ChartLabel::kShiftDown, ChartLabel::kShiftUp, ChartLabel::kScaleDown,
                     ChartLabel::kScaleUp}) {
    charts.push_back(ChartSpec::named(label, 2.0, alpha, m, 17));
  }
  return charts;
}

std::string render(const std::vector<ChartRow>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) {
    out << r.chart << ' ' << r.row.time_index << ' ' << format_double(r.row.s) << ' '
        << format_double(r.row.limit) << ' ' << r.row.signaled << ' ' << r.first_signal << '\n';
  }
  return out.str();
}

TEST(Monitor, ResumeFromEverySnapshotMatchesUninterruptedRun) {
  const auto stream = random_stream(25, 3);
  const auto charts = four_charts(200, 0.05);
  Monitor full(charts);
  std::vector<std::string> expected;
  for (const auto& b : stream) expected.push_back(render(full.process(b)));

  for (std::size_t cut = 0; cut <= stream.size(); ++cut) {
    Monitor first(charts);
    for (std::size_t t = 0; t < cut; ++t) first.process(stream[t]);
    const auto snap = MonitorSnapshot::from_json(first.snapshot().to_json());
    Monitor resumed(charts, snap);
    for (std::size_t t = 0; t < stream.size(); ++t) {
      if (resumed.already_processed(stream[t])) {
        EXPECT_LT(t, cut);
        continue;
      }
      ASSERT_EQ(render(resumed.process(stream[t])), expected[t]) << "cut=" << cut << " t=" << t;
    }
  }
}

TEST(Monitor, SnapshotFileRoundTrip) {
  const auto charts = four_charts(100);
  Monitor m(charts);
  for (const auto& b : random_stream(5, 1)) m.process(b);
  const auto path = (std::filesystem::temp_directory_path() / "calibcusum_snapshot_test.json").string();
  m.snapshot().save(path);
  const auto loaded = MonitorSnapshot::load(path);
  EXPECT_EQ(loaded.to_json(), m.snapshot().to_json());
  EXPECT_EQ(loaded.stream_position, 5);
  std::filesystem::remove(path);
}

TEST(Monitor, RefusesMismatchedSnapshot) {
  Monitor m(four_charts(100));
  const auto snap = m.snapshot();
  auto other = four_charts(100);
  other[0].seed = 99;
  EXPECT_THROW(Monitor(other, snap), SnapshotMismatchError);
  other = four_charts(100, 0.02);
  EXPECT_THROW(Monitor(other, snap), SnapshotMismatchError);
  EXPECT_NE(config_hash(four_charts(100)), config_hash(four_charts(101)));
  EXPECT_EQ(config_hash(four_charts(100)), config_hash(four_charts(100)));
}

TEST(Monitor, RejectsOutOfOrderBatches) {
  Monitor m(four_charts(100));
  const auto stream = random_stream(3, 2);
  m.process(stream[1]);
  EXPECT_THROW(m.process(stream[0]), SequencingError);
  EXPECT_THROW(Monitor(std::vector<ChartSpec>{}), ConfigError);
}

TEST(Monitor, SeveralChartsEqualTheUnionOfSingleCharts) {
  const auto stream = random_stream(60, 8, 20);
  const auto charts = four_charts(300);
  Monitor joint(charts, false, 3);
  std::vector<Monitor> singles;
  for (const auto& c : charts) singles.emplace_back(std::vector<ChartSpec>{c});
  for (const auto& b : stream) {
    const auto rows = joint.process(b);
    ASSERT_EQ(rows.size(), charts.size());
    for (std::size_t i = 0; i < charts.size(); ++i) {
      auto single = singles[i].process(b);
      ASSERT_EQ(single.size(), 1u);
      single[0].chart = i;
      EXPECT_EQ(render({rows[i]}), render(single));
    }
  }
}

TEST(Monitor, HaltOnSignalStopsTheChart) {
  const auto stream = random_stream(200, 4, 1);
  const std::vector<ChartSpec> chart{ChartSpec::named(ChartLabel::kScaleDown, 2.0, 0.05, 200, 1)};
  Monitor keep(chart);
  Monitor halt(chart, true);
  std::size_t halted_rows = 0;
  for (const auto& b : stream) {
    for (const auto& r : keep.process(b)) {
      if (keep.signal_time(0)) EXPECT_TRUE(r.row.signaled);
    }
    halted_rows += halt.process(b).size();
    if (halt.finished()) break;
  }
  ASSERT_TRUE(keep.signal_time(0));
  EXPECT_EQ(halt.signal_time(0), keep.signal_time(0));
  EXPECT_TRUE(halt.finished());
  EXPECT_FALSE(keep.finished());
  EXPECT_EQ(static_cast<std::int64_t>(halted_rows), *halt.signal_time(0));
}

TEST(Monitor, DetectsOverconfidenceAfterACalibratedSegment) {
  const std::size_t change = 300;
  int quiet = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto stream = random_stream(change + 150, 100 + seed, change);
    const std::vector<ChartSpec> chart{
        ChartSpec::named(ChartLabel::kScaleDown, 2.0, 0.0005, 4000, seed)};
    Monitor m(chart, true);
    for (const auto& b : stream) {
      m.process(b);
      if (m.finished()) break;
    }
    ASSERT_TRUE(m.signal_time(0)) << "seed " << seed;
    if (*m.signal_time(0) > static_cast<std::int64_t>(change)) {
      ++quiet;
      EXPECT_LE(*m.signal_time(0), static_cast<std::int64_t>(change + 100));
    }
  }
  EXPECT_GE(quiet, 4);
}

TEST(RunMonitor, WritesTraceAndEvents) {
  std::ostringstream input;
  for (const auto& b : random_stream(30, 9, 1)) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      input << "{\"t\":" << b.time_index << ",\"p\":" << format_double(b.predictions[i])
            << ",\"y\":" << int(b.outcomes[i]) << "}\n";
    }
  }
  std::istringstream in(input.str());
  BatchReader reader(in, RecordFormat::kJsonl);
  std::ostringstream trace_out, events;
  TraceWriter trace(trace_out, RecordFormat::kCsv);
  Monitor m({ChartSpec::named(ChartLabel::kScaleDown, 2.0, 0.1, 200, 2)});
  const auto result = run_monitor(m, reader, trace, events);
  EXPECT_EQ(result.batches, 30u);
  std::istringstream lines(trace_out.str());
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) ++count;
  EXPECT_EQ(count, 31u);
  if (result.signaled()) {
    EXPECT_EQ(events.str().rfind("signal chart=scale-down t=", 0), 0u) << events.str();
  } else {
    EXPECT_TRUE(events.str().empty());
  }
}

TEST(Config, ChartEntries) {
  const auto a = ChartEntry::parse("shift-up");
  EXPECT_EQ(a.label, ChartLabel::kShiftUp);
  EXPECT_FALSE(a.magnitude);
  const auto b = ChartEntry::parse("scale-down:3");
  EXPECT_EQ(b.label, ChartLabel::kScaleDown);
  EXPECT_EQ(*b.magnitude, 3.0);
  const auto c = ChartEntry::parse("custom:1.5,0.8");
  EXPECT_EQ(c.label, ChartLabel::kCustom);
  EXPECT_EQ(c.delta, 1.5);
  EXPECT_EQ(c.gamma, 0.8);
  EXPECT_THROW(ChartEntry::parse("custom:1.5"), ConfigError);
  EXPECT_THROW(ChartEntry::parse("sideways"), ConfigError);
  EXPECT_EQ(infer_chart_label(0.5, 1.0), ChartLabel::kShiftDown);
  EXPECT_EQ(infer_chart_label(1.0, 2.0), ChartLabel::kScaleUp);
  EXPECT_EQ(infer_chart_label(1.3, 2.0), ChartLabel::kCustom);
}

TEST(Config, ParsesDeclarativeFile) {
  const auto cfg = AppConfig::parse(R"({
    "alpha": 0.01, "replicates": 300, "seed": 4, "charts": ["scale-down", {"delta": 1.5, "gamma": 0.8}],
    "halt_on_signal": true, "format": "csv",
    "cells": [{"alternative": {"delta": 2}, "truth": {"delta": 2}, "batch": {"kind": "lpoisson", "lambda": 3}}]
  })");
  const auto specs = cfg.chart_specs();
  ASSERT_EQ(specs.size(), 2u);
  EXPECT_EQ(specs[0].gamma_a, 0.5);
  EXPECT_EQ(specs[0].replicates, 300u);
  EXPECT_EQ(specs[1].label, ChartLabel::kCustom);
  EXPECT_EQ(specs[1].delta_a, 1.5);
  EXPECT_EQ(specs[0].alpha, 0.01);
  EXPECT_TRUE(cfg.halt_on_signal);
  EXPECT_EQ(cfg.input_format(), RecordFormat::kCsv);
  const auto cells = cfg.study_cells();
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0].generator.batch.kind, BatchSizeModel::Kind::kShiftedPoisson);
  EXPECT_EQ(cells[0].generator.truth.delta, 2.0);
  EXPECT_THROW(AppConfig::parse("{\"alpha\": \"x\"}"), ConfigError);
  EXPECT_THROW(AppConfig::parse("not json"), ConfigError);
}

TEST(Config, DefaultsToTheFourNamedCharts) {
  AppConfig cfg;
  const auto specs = cfg.chart_specs();
  ASSERT_EQ(specs.size(), 4u);
  EXPECT_EQ(specs[0].replicates, 5000u);
  cfg.preset = "all";
  EXPECT_EQ(cfg.study_cells().size(), 24u);
  cfg.preset = "bogus";
  EXPECT_THROW(cfg.study_cells(), ConfigError);
}

}  // namespace
}  // namespace calibcusum
