#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "calibcusum/cusum.hpp"
#include "calibcusum/dpcl.hpp"
#include "calibcusum/records.hpp"

namespace calibcusum {

/// Label used in trace rows: the named alternative, or "custom:delta,gamma".
std::string chart_display_name(const ChartSpec& spec);

/// Stable 64-bit digest of everything that determines a monitor's output:
/// alpha, M, seed, and each chart's alternative, in order.
std::string config_hash(const std::vector<ChartSpec>& charts);

/// Resumable state of every chart after the last processed batch. The RNG
/// position is implied by each ensemble's step count.
struct MonitorSnapshot {
  struct Chart {
    ChartSpec spec;
    CusumValue cusum;
    std::optional<std::int64_t> signal_time;
    bool halted = false;
    ReplicateEnsemble ensemble;
  };
  std::string config_hash;
  std::optional<std::int64_t> stream_position;  // last processed time index
  std::vector<Chart> charts;

  std::string to_json() const;
  static MonitorSnapshot from_json(const std::string& text);
  /// Writes to `path` via a temporary file and rename.
  void save(const std::string& path) const;
  static MonitorSnapshot load(const std::string& path);
};

struct ChartRow {
  std::size_t chart = 0;  // index into the configured charts
  TraceRow row;
  bool first_signal = false;
};

/// Runs one or more one-sided charts over a stream: for each batch and chart,
/// advance the DPCL ensemble, step the CUSUM, compare against the new limit.
class Monitor {
 public:
  Monitor(std::vector<ChartSpec> charts, bool halt_on_signal = false, std::size_t threads = 1);
  /// Throws SnapshotMismatchError when the snapshot was taken under a
  /// different configuration.
  Monitor(std::vector<ChartSpec> charts, const MonitorSnapshot& snapshot,
          bool halt_on_signal = false, std::size_t threads = 1);

  /// Rows for every chart still running, in chart order.
  std::vector<ChartRow> process(const TimeBatch& batch);

  /// True when the batch precedes the resume point and must be skipped.
  bool already_processed(const TimeBatch& batch) const noexcept;
  /// Every chart has halted after signaling (only with halt_on_signal).
  bool finished() const noexcept;
  bool any_signal() const noexcept;

  const std::vector<ChartSpec>& charts() const noexcept { return specs_; }
  std::optional<std::int64_t> signal_time(std::size_t chart) const { return states_.at(chart).signal_time; }
  MonitorSnapshot snapshot() const;

 private:
  struct ChartState {
    DpclEngine engine;
    CusumValue cusum;
    std::optional<std::int64_t> signal_time;
    bool halted = false;
  };

  std::vector<ChartSpec> specs_;
  std::vector<ChartState> states_;
  std::string hash_;
  std::optional<std::int64_t> position_;
  bool halt_on_signal_;
  std::size_t threads_;
};

struct MonitorRunResult {
  std::size_t batches = 0;
  std::vector<std::optional<std::int64_t>> signal_times;
  bool signaled() const noexcept;
};

/// Streams batches from `in` through the monitor, writing trace rows and one
/// "signal" line per chart to `events` at its first crossing.
MonitorRunResult run_monitor(Monitor& monitor, BatchReader& in, TraceWriter& trace,
                             std::ostream& events);

}  // namespace calibcusum
