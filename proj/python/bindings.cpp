#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "calibcusum/dpcl.hpp"
#include "calibcusum/monitor.hpp"
#include "calibcusum/recalibration.hpp"
#include "calibcusum/runlength.hpp"

namespace py = pybind11;
using namespace calibcusum;

namespace {

CalibrationDataset dataset(std::vector<double> p, std::vector<std::uint8_t> y) {
  CalibrationDataset d{std::move(p), std::move(y)};
  d.validate();
  return d;
}

TimeBatch batch(std::int64_t t, std::vector<double> p, std::vector<std::uint8_t> y) {
  TimeBatch b{t, std::move(p), std::move(y)};
  b.validate();
  return b;
}

py::dict row_dict(const std::string& chart, const TraceRow& r) {
  py::dict d;
  d["chart"] = chart;
  d["t"] = r.time_index;
  d["n"] = r.batch_size;
  d["w"] = r.w;
  d["s"] = r.s;
  d["limit"] = r.limit;
  d["signaled"] = r.signaled;
  return d;
}

}  // namespace

PYBIND11_MODULE(_calibcusum, m) {
  m.doc() = "Calibration CUSUM charts with dynamic probability control limits";
  m.attr("__version__") = "0.1.0";

  py::register_exception<Error>(m, "CalibcusumError", PyExc_ValueError);

  py::class_<LloParams>(m, "LloParams")
      .def(py::init<double, double>(), py::arg("delta") = 1.0, py::arg("gamma") = 1.0)
      .def_readwrite("delta", &LloParams::delta)
      .def_readwrite("gamma", &LloParams::gamma)
      .def("__repr__", [](const LloParams& p) {
        return "LloParams(delta=" + format_double(p.delta) + ", gamma=" + format_double(p.gamma) + ")";
      });

  m.def("llo_adjust", [](double x, double delta, double gamma) { return llo_adjust(x, {delta, gamma}); },
        py::arg("x"), py::arg("delta"), py::arg("gamma"));
  m.def("llo_adjust", [](const std::vector<double>& x, double delta, double gamma) {
        std::vector<double> out;
        out.reserve(x.size());
        for (double v : x) out.push_back(llo_adjust(v, {delta, gamma}));
        return out;
      },
      py::arg("x"), py::arg("delta"), py::arg("gamma"));
  m.def("loglik_calibrated",
        [](const std::vector<double>& p, const std::vector<std::uint8_t>& y) { return loglik_calibrated(p, y); },
        py::arg("p"), py::arg("y"));
  m.def("loglik_uncalibrated",
        [](const std::vector<double>& p, const std::vector<std::uint8_t>& y, double delta, double gamma) {
          return loglik_uncalibrated(p, y, {delta, gamma});
        },
        py::arg("p"), py::arg("y"), py::arg("delta"), py::arg("gamma"));

  py::class_<RecalibrationFit>(m, "RecalibrationFit")
      .def_readonly("params", &RecalibrationFit::params_hat)
      .def_property_readonly("delta", [](const RecalibrationFit& f) { return f.params_hat.delta; })
      .def_property_readonly("gamma", [](const RecalibrationFit& f) { return f.params_hat.gamma; })
      .def_readonly("loglik_at_mle", &RecalibrationFit::loglik_at_mle)
      .def_readonly("loglik_at_identity", &RecalibrationFit::loglik_at_identity)
      .def_readonly("lrt_statistic", &RecalibrationFit::lrt_statistic)
      .def_readonly("p_value", &RecalibrationFit::p_value)
      .def_readonly("converged", &RecalibrationFit::converged)
      .def_readonly("iterations", &RecalibrationFit::iterations);

  m.def("fit_mle", [](std::vector<double> p, std::vector<std::uint8_t> y) {
        return fit_mle(dataset(std::move(p), std::move(y)));
      },
      py::arg("p"), py::arg("y"));
  m.def("calibration_test", [](std::vector<double> p, std::vector<std::uint8_t> y) {
        return calibration_test(dataset(std::move(p), std::move(y)));
      },
      py::arg("p"), py::arg("y"));
  m.def("apply_fit", [](const std::vector<double>& p, const RecalibrationFit& fit) { return apply_fit(p, fit); },
        py::arg("p"), py::arg("fit"));

  py::class_<ChartSpec>(m, "ChartSpec")
      .def(py::init([](const std::string& label, double magnitude, double alpha, std::size_t replicates,
                       std::uint64_t seed) {
             return ChartSpec::named(parse_chart_label(label), magnitude, alpha, replicates, seed);
           }),
           py::arg("label"), py::arg("magnitude") = 2.0, py::arg("alpha") = 0.005,
           py::arg("replicates") = 5000, py::arg("seed") = 0)
      .def_static("custom", &ChartSpec::custom, py::arg("delta_a"), py::arg("gamma_a"),
                  py::arg("alpha") = 0.005, py::arg("replicates") = 5000, py::arg("seed") = 0)
      .def_readonly("delta_a", &ChartSpec::delta_a)
      .def_readonly("gamma_a", &ChartSpec::gamma_a)
      .def_readonly("alpha", &ChartSpec::alpha)
      .def_readonly("replicates", &ChartSpec::replicates)
      .def_readonly("seed", &ChartSpec::seed)
      .def_property_readonly("name", &chart_display_name);

  m.def("increment", [](const std::vector<double>& p, const std::vector<std::uint8_t>& y, const ChartSpec& spec) {
        return increment(batch(1, p, y), spec);
      },
      py::arg("p"), py::arg("y"), py::arg("spec"));

  py::class_<DpclEngine>(m, "DpclEngine")
      .def(py::init<ChartSpec, std::size_t>(), py::arg("spec"), py::arg("threads") = 1)
      .def("advance", [](DpclEngine& e, const std::vector<double>& p) { return e.advance(p); },
           py::arg("p"), py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("steps", [](const DpclEngine& e) { return e.ensemble().time_index; })
      .def_property_readonly("statistics", [](const DpclEngine& e) { return e.ensemble().statistics; });

  m.def("dpcl_limits", [](const std::vector<std::vector<double>>& stream, const ChartSpec& spec, std::size_t threads) {
        std::vector<TimeBatch> batches;
        std::int64_t t = 0;
        for (const auto& p : stream) batches.push_back(TimeBatch{++t, p, std::vector<std::uint8_t>(p.size(), 0)});
        py::gil_scoped_release release;
        return limits_for_stream(batches, spec, threads);
      },
      py::arg("stream"), py::arg("spec"), py::arg("threads") = 1);

  py::class_<RunLengthSummary>(m, "RunLengthSummary")
      .def_readonly("arl", &RunLengthSummary::arl)
      .def_readonly("sdrl", &RunLengthSummary::sdrl)
      .def_readonly("quantiles", &RunLengthSummary::quantiles)
      .def_readonly("replications", &RunLengthSummary::replications)
      .def_readonly("truncated", &RunLengthSummary::truncated);

  m.def("summarize", [](const std::vector<std::size_t>& lengths) {
        std::vector<RunResult> runs;
        for (auto n : lengths) runs.push_back({n, false});
        return summarize(runs);
      },
      py::arg("lengths"));
  m.def("geometric_reference", &geometric_reference, py::arg("alpha"));

  m.def("simulate_study",
        [](const std::string& preset, double alpha, std::size_t replicates, std::size_t replications,
           std::uint64_t seed, std::size_t horizon_cap, std::size_t threads) {
          std::vector<StudyCell> cells;
          if (preset == "in-control" || preset == "all") cells = in_control_cells(alpha, replicates);
          if (preset == "out-of-control" || preset == "all") {
            for (auto& c : out_of_control_cells(alpha, replicates)) cells.push_back(c);
          }
          if (cells.empty()) throw ConfigError("unknown preset '" + preset + "'");
          for (auto& c : cells) c.generator.horizon_cap = horizon_cap;
          StudyOptions opt;
          opt.replications = replications;
          opt.seed = seed;
          opt.threads = threads;
          std::ostringstream csv;
          {
            py::gil_scoped_release release;
            write_study_csv(csv, run_study(cells, opt));
          }
          return csv.str();
        },
        py::arg("preset") = "in-control", py::arg("alpha") = 0.005, py::arg("replicates") = 2000,
        py::arg("replications") = 1000, py::arg("seed") = 1, py::arg("horizon_cap") = 20000,
        py::arg("threads") = 1);

  py::class_<Monitor>(m, "Monitor")
      .def(py::init<std::vector<ChartSpec>, bool, std::size_t>(), py::arg("charts"),
           py::arg("halt_on_signal") = false, py::arg("threads") = 1)
      .def(py::init([](std::vector<ChartSpec> charts, const std::string& snapshot, bool halt, std::size_t threads) {
             return Monitor(std::move(charts), MonitorSnapshot::from_json(snapshot), halt, threads);
           }),
           py::arg("charts"), py::arg("snapshot"), py::arg("halt_on_signal") = false, py::arg("threads") = 1)
      .def("process",
           [](Monitor& mon, std::int64_t t, std::vector<double> p, std::vector<std::uint8_t> y) {
             py::list rows;
             for (const ChartRow& r : mon.process(batch(t, std::move(p), std::move(y)))) {
               rows.append(row_dict(chart_display_name(mon.charts()[r.chart]), r.row));
             }
             return rows;
           },
           py::arg("t"), py::arg("p"), py::arg("y"))
      .def("signal_time", &Monitor::signal_time, py::arg("chart"))
      .def_property_readonly("any_signal", &Monitor::any_signal)
      .def("snapshot", [](const Monitor& mon) { return mon.snapshot().to_json(); });
}
