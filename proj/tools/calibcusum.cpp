// calibcusum: monitor probability predictions for loss of calibration.
//
//   calibcusum recalibrate --input data.jsonl [--output recalibrated.jsonl]
//   calibcusum test        --input data.jsonl [--level 0.05]
//   calibcusum monitor     --input stream.jsonl [--chart scale-down:2 ...] [--snapshot-out s.json]
//   calibcusum dpcl        --input stream.jsonl --chart shift-up:2
//   calibcusum simulate    --preset in-control [--replications 1000]
//
// Exit codes: 0 no signal, 2 at least one chart signaled, 1 error.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "calibcusum/config.hpp"
#include "calibcusum/dpcl.hpp"
#include "calibcusum/monitor.hpp"
#include "calibcusum/recalibration.hpp"
#include "calibcusum/records.hpp"
#include "calibcusum/runlength.hpp"
#include "json.hpp"

namespace {

using namespace calibcusum;

constexpr int kExitNoSignal = 0;
constexpr int kExitError = 1;
constexpr int kExitSignal = 2;

// Raw flag values; applied on top of the config file once parsing is done.
struct Flags {
  std::string config;
  std::optional<std::string> input, format, output, snapshot_in, snapshot_out, preset;
  std::optional<double> alpha, level, shift_magnitude, scale_magnitude;
  std::optional<std::size_t> replicates, threads, replications, horizon_cap;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> charts;
  bool halt_on_signal = false;
  bool fresh_streams = false;
};

AppConfig resolve(const Flags& f) {
  AppConfig cfg = f.config.empty() ? AppConfig{} : AppConfig::load(f.config);
  if (f.input) cfg.input = *f.input;
  if (f.format) cfg.format = parse_record_format(*f.format);
  if (f.output) cfg.output = *f.output;
  if (f.snapshot_in) cfg.snapshot_in = *f.snapshot_in;
  if (f.snapshot_out) cfg.snapshot_out = *f.snapshot_out;
  if (f.preset) cfg.preset = *f.preset;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (f.level) cfg.level = *f.level;
  if (f.shift_magnitude) cfg.shift_magnitude = *f.shift_magnitude;
  if (f.scale_magnitude) cfg.scale_magnitude = *f.scale_magnitude;
  if (f.replicates) cfg.replicates = *f.replicates;
  if (f.threads) cfg.threads = *f.threads;
  if (f.replications) cfg.replications = *f.replications;
  if (f.horizon_cap) cfg.horizon_cap = *f.horizon_cap;
  if (f.seed) cfg.seed = *f.seed;
  if (!f.charts.empty()) {
    cfg.charts.clear();
    for (const std::string& c : f.charts) cfg.charts.push_back(ChartEntry::parse(c));
  }
  if (f.halt_on_signal) cfg.halt_on_signal = true;
  if (f.fresh_streams) cfg.fresh_streams = true;
  return cfg;
}

// Reads from --input, or stdin when absent or "-".
class InputStream {
 public:
  explicit InputStream(const AppConfig& cfg) {
    if (cfg.input && *cfg.input != "-") {
      file_ = std::make_unique<std::ifstream>(*cfg.input);
      if (!*file_) throw InputError("cannot open " + *cfg.input);
    }
  }
  std::istream& get() { return file_ ? *file_ : std::cin; }

 private:
  std::unique_ptr<std::ifstream> file_;
};

class OutputStream {
 public:
  explicit OutputStream(const std::optional<std::string>& path) {
    if (path && *path != "-") {
      file_ = std::make_unique<std::ofstream>(*path, std::ios::trunc);
      if (!*file_) throw InputError("cannot write " + *path);
    }
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

nlohmann::json fit_to_json(const RecalibrationFit& fit, std::size_t n) {
  return {{"n", n},
          {"delta_hat", fit.params_hat.delta},
          {"gamma_hat", fit.params_hat.gamma},
          {"loglik_at_mle", fit.loglik_at_mle},
          {"loglik_at_identity", fit.loglik_at_identity},
          {"lrt_statistic", fit.lrt_statistic},
          {"p_value", fit.p_value},
          {"converged", fit.converged},
          {"iterations", fit.iterations}};
}

int cmd_recalibrate(const AppConfig& cfg) {
  InputStream in(cfg);
  const CalibrationDataset data = read_dataset(in.get(), cfg.input_format());
  const RecalibrationFit fit = fit_mle(data);
  std::cout << fit_to_json(fit, data.size()).dump() << '\n';
  if (cfg.output) {
    OutputStream out(cfg.output);
    const auto adjusted = apply_fit(data.predictions, fit);
    for (std::size_t i = 0; i < adjusted.size(); ++i) {
      out.get() << "{\"t\":" << i + 1 << ",\"p\":" << format_double(adjusted[i])
                << ",\"y\":" << int{data.outcomes[i]}
                << ",\"x\":" << format_double(data.predictions[i]) << "}\n";
    }
  }
  return kExitNoSignal;
}

int cmd_test(const AppConfig& cfg) {
  InputStream in(cfg);
  const CalibrationDataset data = read_dataset(in.get(), cfg.input_format());
  const RecalibrationFit fit = calibration_test(data);
  auto j = fit_to_json(fit, data.size());
  j["level"] = cfg.level;
  j["reject_calibration"] = fit.p_value < cfg.level;
  std::cout << j.dump() << '\n';
  return kExitNoSignal;
}

int cmd_monitor(const AppConfig& cfg) {
  const auto specs = cfg.chart_specs();
  std::unique_ptr<Monitor> monitor;
  if (cfg.snapshot_in) {
    monitor = std::make_unique<Monitor>(specs, MonitorSnapshot::load(*cfg.snapshot_in),
                                        cfg.halt_on_signal, cfg.threads);
  } else {
    monitor = std::make_unique<Monitor>(specs, cfg.halt_on_signal, cfg.threads);
  }
  InputStream in(cfg);
  OutputStream out(cfg.output);
  BatchReader reader(in.get(), cfg.input_format());
  const RecordFormat trace_format =
      cfg.output && cfg.output->ends_with(".jsonl") ? RecordFormat::kJsonl : RecordFormat::kCsv;
  TraceWriter trace(out.get(), trace_format);
  const MonitorRunResult result = run_monitor(*monitor, reader, trace, std::cerr);
  out.get().flush();
  if (cfg.snapshot_out) monitor->snapshot().save(*cfg.snapshot_out);
  return result.signaled() ? kExitSignal : kExitNoSignal;
}

int cmd_dpcl(const AppConfig& cfg) {
  const auto specs = cfg.chart_specs();
  InputStream in(cfg);
  OutputStream out(cfg.output);
  BatchReader reader(in.get(), cfg.input_format());
  std::vector<DpclEngine> engines;
  for (const ChartSpec& spec : specs) engines.emplace_back(spec, cfg.threads);
  out.get() << "chart_label,t,n_t,limit\n";
  while (auto batch = reader.next()) {
    for (std::size_t i = 0; i < engines.size(); ++i) {
      const double limit = engines[i].advance(batch->predictions);
      out.get() << csv_field(chart_display_name(specs[i])) << ',' << batch->time_index << ','
                << batch->size() << ',' << format_double(limit) << '\n';
    }
  }
  return kExitNoSignal;
}

int cmd_simulate(const AppConfig& cfg) {
  const auto cells = cfg.study_cells();
  if (cells.empty()) throw ConfigError("simulate: no cells (use --preset or a config with cells)");
  StudyOptions options;
  options.replications = cfg.replications;
  options.seed = cfg.seed;
  options.fresh_streams = cfg.fresh_streams;
  options.threads = cfg.threads;
  const auto rows = run_study(cells, options);
  OutputStream out(cfg.output);
  write_study_csv(out.get(), rows);
  for (const StudyRow& row : rows) {
    if (row.summary.truncated > 0) {
      std::cerr << "warning: " << row.summary.truncated << " of " << row.summary.replications
                << " runs reached the horizon cap (" << row.cell.generator.batch.describe()
                << ") and are excluded from the summary\n";
    }
  }
  return kExitNoSignal;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file; flags override its values");
  sub->add_option("--input", f.input, "Record file (JSONL or CSV); stdin when omitted");
  sub->add_option("--format", f.format, "Record format: jsonl or csv")
      ->check(CLI::IsMember({"jsonl", "json", "csv"}));
  sub->add_option("--output", f.output, "Output file; stdout when omitted");
  sub->add_option("--seed", f.seed, "Master RNG seed");
  sub->add_option("--threads", f.threads, "Worker threads");
}

void add_chart_options(CLI::App* sub, Flags& f) {
  sub->add_option("--alpha", f.alpha, "Conditional false alarm rate")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--replicates", f.replicates, "Monte Carlo replicates M per chart");
  sub->add_option("--chart", f.charts,
                  "Chart: shift-down|shift-up|scale-down|scale-up[:MAG] or custom:DELTA,GAMMA");
  sub->add_option("--shift-magnitude", f.shift_magnitude, "Default magnitude for shift charts");
  sub->add_option("--scale-magnitude", f.scale_magnitude, "Default magnitude for scale charts");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibration CUSUM monitoring with dynamic probability control limits"};
  app.require_subcommand(1);
  Flags flags;

  auto* recal = app.add_subcommand("recalibrate", "Fit the LLO recalibration map by maximum likelihood");
  add_common(recal, flags);

  auto* test = app.add_subcommand("test", "Likelihood-ratio test of calibration");
  add_common(test, flags);
  test->add_option("--level", flags.level, "Rejection level");

  auto* monitor = app.add_subcommand("monitor", "Run calibration CUSUM charts over a record stream");
  add_common(monitor, flags);
  add_chart_options(monitor, flags);
  monitor->add_option("--snapshot-in", flags.snapshot_in, "Resume from this snapshot");
  monitor->add_option("--snapshot-out", flags.snapshot_out, "Write a snapshot after the last batch");
  monitor->add_flag("--halt-on-signal", flags.halt_on_signal, "Stop each chart at its first signal");

  auto* dpcl = app.add_subcommand("dpcl", "Emit dynamic probability control limits for a stream");
  add_common(dpcl, flags);
  add_chart_options(dpcl, flags);

  auto* simulate = app.add_subcommand("simulate", "Run-length simulation study");
  add_common(simulate, flags);
  simulate->add_option("--alpha", flags.alpha, "Conditional false alarm rate")
      ->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--replicates", flags.replicates, "Monte Carlo replicates M (default 2000)");
  simulate->add_option("--preset", flags.preset, "in-control, out-of-control, or all")
      ->check(CLI::IsMember({"in-control", "out-of-control", "all"}));
  simulate->add_option("--replications", flags.replications, "Outcome replications per cell");
  simulate->add_option("--horizon-cap", flags.horizon_cap, "Maximum run length before truncation");
  simulate->add_flag("--fresh-streams", flags.fresh_streams,
                     "New prediction stream and limits for every replication");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    const AppConfig cfg = resolve(flags);
    if (*recal) return cmd_recalibrate(cfg);
    if (*test) return cmd_test(cfg);
    if (*monitor) return cmd_monitor(cfg);
    if (*dpcl) return cmd_dpcl(cfg);
    if (*simulate) return cmd_simulate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
