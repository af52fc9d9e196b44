#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "calibcusum/cusum.hpp"
#include "calibcusum/records.hpp"
#include "calibcusum/runlength.hpp"

namespace calibcusum {

/// A chart as written in a config file or on the command line:
/// "shift-up", "scale-down:3", "custom:1.5,0.8".
struct ChartEntry {
  ChartLabel label = ChartLabel::kCustom;
  std::optional<double> magnitude;
  double delta = 1.0;
  double gamma = 1.0;

  static ChartEntry parse(std::string_view text);
};

/// Named label matching (delta, gamma), or custom.
ChartLabel infer_chart_label(double delta, double gamma) noexcept;

/// Declarative settings shared by the CLI subcommands. Values from the config
/// file are loaded first; command-line flags override them.
struct AppConfig {
  double alpha = 0.005;
  std::optional<std::size_t> replicates;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  // monitor / dpcl
  std::vector<ChartEntry> charts;
  double shift_magnitude = 2.0;
  double scale_magnitude = 2.0;
  std::optional<std::string> input;
  std::optional<RecordFormat> format;
  std::optional<std::string> output;
  std::optional<std::string> snapshot_in;
  std::optional<std::string> snapshot_out;
  bool halt_on_signal = false;

  // test
  double level = 0.05;

  // simulate
  std::string preset;  // "in-control", "out-of-control", "all", or empty
  std::vector<StudyCell> cells;
  std::size_t replications = 1000;
  std::size_t horizon_cap = 20000;
  bool fresh_streams = false;

  static AppConfig load(const std::string& path);
  static AppConfig parse(const std::string& json_text);

  RecordFormat input_format() const;
  /// The configured charts; the four named alternatives when none are listed.
  std::vector<ChartSpec> chart_specs(std::size_t default_replicates = 5000) const;
  /// The configured or preset simulation cells with alpha and M applied.
  std::vector<StudyCell> study_cells(std::size_t default_replicates = 2000) const;
};

}  // namespace calibcusum
