#include "calibcusum/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace calibcusum {

using nlohmann::json;

namespace {

double parse_number(std::string_view text, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

ChartLabel infer_chart_label(double delta, double gamma) noexcept {
  if (gamma == 1.0 && delta < 1.0) return ChartLabel::kShiftDown;
  if (gamma == 1.0 && delta > 1.0) return ChartLabel::kShiftUp;
  if (delta == 1.0 && gamma < 1.0) return ChartLabel::kScaleDown;
  if (delta == 1.0 && gamma > 1.0) return ChartLabel::kScaleUp;
  return ChartLabel::kCustom;
}

ChartEntry ChartEntry::parse(std::string_view text) {
  ChartEntry entry;
  const auto colon = text.find(':');
  entry.label = parse_chart_label(text.substr(0, colon));
  const std::string_view rest = colon == std::string_view::npos ? "" : text.substr(colon + 1);
  if (entry.label == ChartLabel::kCustom) {
    const auto comma = rest.find(',');
    if (comma == std::string_view::npos) {
      throw ConfigError("custom chart needs 'custom:DELTA,GAMMA', got '" + std::string(text) + "'");
    }
    entry.delta = parse_number(rest.substr(0, comma), "delta");
    entry.gamma = parse_number(rest.substr(comma + 1), "gamma");
  } else if (!rest.empty()) {
    entry.magnitude = parse_number(rest, "chart magnitude");
  }
  return entry;
}

namespace {

LloParams params_from(const json& j) {
  return LloParams{j.value("delta", 1.0), j.value("gamma", 1.0)};
}

BatchSizeModel batch_from(const json& j) {
  const std::string kind = j.value("kind", std::string("fixed"));
  if (kind == "fixed") return BatchSizeModel::fixed(j.value("n", std::size_t{1}));
  if (kind == "shifted-poisson" || kind == "lpoisson") {
    return BatchSizeModel::shifted_poisson(j.value("lambda", 1.0));
  }
  throw ConfigError("unknown batch kind '" + kind + "'");
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

AppConfig AppConfig::parse(const std::string& json_text) {
  AppConfig cfg;
  try {
    const json j = json::parse(json_text);
    cfg.alpha = j.value("alpha", cfg.alpha);
    read_optional(j, "replicates", cfg.replicates);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.shift_magnitude = j.value("shift_magnitude", cfg.shift_magnitude);
    cfg.scale_magnitude = j.value("scale_magnitude", cfg.scale_magnitude);
    read_optional(j, "input", cfg.input);
    if (j.contains("format")) cfg.format = parse_record_format(j.at("format").get<std::string>());
    read_optional(j, "output", cfg.output);
    read_optional(j, "snapshot_in", cfg.snapshot_in);
    read_optional(j, "snapshot_out", cfg.snapshot_out);
    cfg.halt_on_signal = j.value("halt_on_signal", cfg.halt_on_signal);
    cfg.level = j.value("level", cfg.level);
    cfg.preset = j.value("preset", cfg.preset);
    cfg.replications = j.value("replications", cfg.replications);
    cfg.horizon_cap = j.value("horizon_cap", cfg.horizon_cap);
    cfg.fresh_streams = j.value("fresh_streams", cfg.fresh_streams);

    for (const json& c : j.value("charts", json::array())) {
      if (c.is_string()) {
        cfg.charts.push_back(ChartEntry::parse(c.get<std::string>()));
        continue;
      }
      ChartEntry entry;
      if (c.contains("label")) {
        entry.label = parse_chart_label(c.at("label").get<std::string>());
      } else {
        entry.label = ChartLabel::kCustom;
      }
      read_optional(c, "magnitude", entry.magnitude);
      entry.delta = c.value("delta", 1.0);
      entry.gamma = c.value("gamma", 1.0);
      cfg.charts.push_back(entry);
    }
    for (const json& c : j.value("cells", json::array())) {
      StudyCell cell;
      const LloParams alt = params_from(c.at("alternative"));
      cell.chart.delta_a = alt.delta;
      cell.chart.gamma_a = alt.gamma;
      cell.chart.label = infer_chart_label(alt.delta, alt.gamma);
      if (c.contains("truth")) cell.generator.truth = params_from(c.at("truth"));
      if (c.contains("batch")) cell.generator.batch = batch_from(c.at("batch"));
      cfg.cells.push_back(cell);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

AppConfig AppConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

RecordFormat AppConfig::input_format() const {
  if (format) return *format;
  return input ? guess_record_format(*input) : RecordFormat::kJsonl;
}

std::vector<ChartSpec> AppConfig::chart_specs(std::size_t default_replicates) const {
  const std::size_t m = replicates.value_or(default_replicates);
  std::vector<ChartSpec> specs;
  if (charts.empty()) {
    specs.push_back(ChartSpec::named(ChartLabel::kShiftDown, shift_magnitude, alpha, m, seed));
    specs.push_back(ChartSpec::named(ChartLabel::kShiftUp, shift_magnitude, alpha, m, seed));
    specs.push_back(ChartSpec::named(ChartLabel::kScaleDown, scale_magnitude, alpha, m, seed));
    specs.push_back(ChartSpec::named(ChartLabel::kScaleUp, scale_magnitude, alpha, m, seed));
    return specs;
  }
  for (const ChartEntry& e : charts) {
    if (e.label == ChartLabel::kCustom) {
      specs.push_back(ChartSpec::custom(e.delta, e.gamma, alpha, m, seed));
      continue;
    }
    const bool is_shift = e.label == ChartLabel::kShiftDown || e.label == ChartLabel::kShiftUp;
    const double magnitude = e.magnitude.value_or(is_shift ? shift_magnitude : scale_magnitude);
    specs.push_back(ChartSpec::named(e.label, magnitude, alpha, m, seed));
  }
  return specs;
}

std::vector<StudyCell> AppConfig::study_cells(std::size_t default_replicates) const {
  const std::size_t m = replicates.value_or(default_replicates);
  std::vector<StudyCell> cells;
  if (preset == "in-control" || preset == "all") {
    auto ic = in_control_cells(alpha, m);
    cells.insert(cells.end(), ic.begin(), ic.end());
  }
  if (preset == "out-of-control" || preset == "all") {
    auto oc = out_of_control_cells(alpha, m);
    cells.insert(cells.end(), oc.begin(), oc.end());
  }
  if (!preset.empty() && cells.empty()) throw ConfigError("unknown preset '" + preset + "'");
  for (StudyCell cell : this->cells) {
    cell.chart.alpha = alpha;
    cell.chart.replicates = m;
    cells.push_back(cell);
  }
  for (StudyCell& cell : cells) {
    cell.generator.horizon_cap = horizon_cap;
    cell.chart.validate();
  }
  return cells;
}

}  // namespace calibcusum
