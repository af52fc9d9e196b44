#include "calibcusum/monitor.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "calibcusum/parallel.hpp"
#include "json.hpp"

namespace calibcusum {

using nlohmann::json;

std::string chart_display_name(const ChartSpec& spec) {
  if (spec.label != ChartLabel::kCustom) return std::string(to_string(spec.label));
  return "custom:" + format_double(spec.delta_a) + "," + format_double(spec.gamma_a);
}

std::string config_hash(const std::vector<ChartSpec>& charts) {
  std::string canon;
  for (const ChartSpec& c : charts) {
    canon += chart_display_name(c) + "|" + format_double(c.delta_a) + "|" +
             format_double(c.gamma_a) + "|" + format_double(c.alpha) + "|" +
             std::to_string(c.replicates) + "|" + std::to_string(c.seed) + ";";
  }
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

json chart_to_json(const MonitorSnapshot::Chart& c) {
  json j;
  j["label"] = std::string(to_string(c.spec.label));
  j["delta_a"] = c.spec.delta_a;
  j["gamma_a"] = c.spec.gamma_a;
  j["alpha"] = c.spec.alpha;
  j["replicates"] = c.spec.replicates;
  j["seed"] = c.spec.seed;
  j["cusum"] = {{"t", c.cusum.time_index}, {"w", c.cusum.w}, {"s", c.cusum.s}};
  j["signal_time"] = c.signal_time ? json(*c.signal_time) : json(nullptr);
  j["halted"] = c.halted;
  j["ensemble"] = {{"time_index", c.ensemble.time_index},
                   {"limit", c.ensemble.limit ? json(*c.ensemble.limit) : json(nullptr)},
                   {"statistics", c.ensemble.statistics}};
  return j;
}

MonitorSnapshot::Chart chart_from_json(const json& j) {
  MonitorSnapshot::Chart c;
  c.spec.label = parse_chart_label(j.at("label").get<std::string>());
  c.spec.delta_a = j.at("delta_a").get<double>();
  c.spec.gamma_a = j.at("gamma_a").get<double>();
  c.spec.alpha = j.at("alpha").get<double>();
  c.spec.replicates = j.at("replicates").get<std::size_t>();
  c.spec.seed = j.at("seed").get<std::uint64_t>();
  const json& cu = j.at("cusum");
  c.cusum = CusumValue{cu.at("t").get<std::int64_t>(), cu.at("w").get<double>(),
                       cu.at("s").get<double>()};
  if (!j.at("signal_time").is_null()) c.signal_time = j.at("signal_time").get<std::int64_t>();
  c.halted = j.at("halted").get<bool>();
  const json& en = j.at("ensemble");
  c.ensemble.time_index = en.at("time_index").get<std::size_t>();
  c.ensemble.statistics = en.at("statistics").get<std::vector<double>>();
  if (!en.at("limit").is_null()) {
    const double limit = en.at("limit").get<double>();
    c.ensemble.limit = limit;
    for (std::size_t q = 0; q < c.ensemble.statistics.size(); ++q) {
      if (c.ensemble.statistics[q] <= limit) {
        c.ensemble.survivors.push_back(static_cast<std::uint32_t>(q));
      }
    }
  }
  return c;
}

}  // namespace

std::string MonitorSnapshot::to_json() const {
  json j;
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["stream_position"] = stream_position ? json(*stream_position) : json(nullptr);
  j["charts"] = json::array();
  for (const Chart& c : charts) j["charts"].push_back(chart_to_json(c));
  return j.dump();
}

MonitorSnapshot MonitorSnapshot::from_json(const std::string& text) {
  MonitorSnapshot snap;
  try {
    const json j = json::parse(text);
    if (j.at("version").get<int>() != 1) throw InputError("unsupported snapshot version");
    snap.config_hash = j.at("config_hash").get<std::string>();
    if (!j.at("stream_position").is_null()) {
      snap.stream_position = j.at("stream_position").get<std::int64_t>();
    }
    for (const json& c : j.at("charts")) snap.charts.push_back(chart_from_json(c));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed snapshot: ") + e.what());
  }
  return snap;
}

void MonitorSnapshot::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InputError("cannot write snapshot " + tmp);
    out << to_json() << '\n';
    out.flush();
    if (!out) throw InputError("failed writing snapshot " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

MonitorSnapshot MonitorSnapshot::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open snapshot " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

Monitor::Monitor(std::vector<ChartSpec> charts, bool halt_on_signal, std::size_t threads)
    : specs_(std::move(charts)), halt_on_signal_(halt_on_signal), threads_(threads) {
  if (specs_.empty()) throw ConfigError("monitor needs at least one chart");
  for (const ChartSpec& spec : specs_) states_.push_back(ChartState{DpclEngine(spec), {}, {}, false});
  hash_ = config_hash(specs_);
}

Monitor::Monitor(std::vector<ChartSpec> charts, const MonitorSnapshot& snapshot,
                 bool halt_on_signal, std::size_t threads)
    : specs_(std::move(charts)), halt_on_signal_(halt_on_signal), threads_(threads) {
  if (specs_.empty()) throw ConfigError("monitor needs at least one chart");
  hash_ = config_hash(specs_);
  if (snapshot.config_hash != hash_ || snapshot.charts.size() != specs_.size()) {
    throw SnapshotMismatchError("snapshot was taken under config " + snapshot.config_hash +
                                ", current config is " + hash_);
  }
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& c = snapshot.charts[i];
    states_.push_back(
        ChartState{DpclEngine(specs_[i], c.ensemble), c.cusum, c.signal_time, c.halted});
  }
  position_ = snapshot.stream_position;
}

bool Monitor::already_processed(const TimeBatch& batch) const noexcept {
  return position_ && batch.time_index <= *position_;
}

bool Monitor::finished() const noexcept {
  return std::all_of(states_.begin(), states_.end(), [](const ChartState& s) { return s.halted; });
}

bool Monitor::any_signal() const noexcept {
  return std::any_of(states_.begin(), states_.end(),
                     [](const ChartState& s) { return s.signal_time.has_value(); });
}

std::vector<ChartRow> Monitor::process(const TimeBatch& batch) {
  batch.validate();
  if (position_ && batch.time_index <= *position_) {
    throw SequencingError("time index " + std::to_string(batch.time_index) +
                          " does not follow " + std::to_string(*position_));
  }
  std::vector<std::optional<ChartRow>> rows(specs_.size());
  parallel_for(specs_.size(), threads_, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      ChartState& state = states_[i];
      if (state.halted) continue;
      const IncrementTable table(batch.predictions, specs_[i].alternative());
      const double limit = state.engine.advance(batch.predictions, table);
      state.cusum = step(state.cusum, batch, specs_[i]);
      ChartRow row;
      row.chart = i;
      if (!state.signal_time && state.cusum.s > limit) {
        state.signal_time = batch.time_index;
        row.first_signal = true;
      }
      row.row = TraceRow{batch.time_index, batch.size(), state.cusum.w, state.cusum.s, limit,
                         state.signal_time.has_value()};
      if (halt_on_signal_ && state.signal_time) state.halted = true;
      rows[i] = row;
    }
  });
  position_ = batch.time_index;
  std::vector<ChartRow> out;
  for (auto& r : rows) {
    if (r) out.push_back(*r);
  }
  return out;
}

MonitorSnapshot Monitor::snapshot() const {
  MonitorSnapshot snap;
  snap.config_hash = hash_;
  snap.stream_position = position_;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const ChartState& s = states_[i];
    snap.charts.push_back(
        MonitorSnapshot::Chart{specs_[i], s.cusum, s.signal_time, s.halted, s.engine.ensemble()});
  }
  return snap;
}

bool MonitorRunResult::signaled() const noexcept {
  return std::any_of(signal_times.begin(), signal_times.end(),
                     [](const auto& t) { return t.has_value(); });
}

MonitorRunResult run_monitor(Monitor& monitor, BatchReader& in, TraceWriter& trace,
                             std::ostream& events) {
  MonitorRunResult result;
  while (!monitor.finished()) {
    auto batch = in.next();
    if (!batch) break;
    if (monitor.already_processed(*batch)) continue;
    for (const ChartRow& r : monitor.process(*batch)) {
      const std::string name = chart_display_name(monitor.charts()[r.chart]);
      trace.write(name, r.row);
      if (r.first_signal) {
        events << "signal chart=" << name << " t=" << r.row.time_index
               << " S=" << format_double(r.row.s) << " limit=" << format_double(r.row.limit)
               << '\n';
      }
    }
    ++result.batches;
  }
  for (std::size_t i = 0; i < monitor.charts().size(); ++i) {
    result.signal_times.push_back(monitor.signal_time(i));
  }
  return result;
}

}  // namespace calibcusum
