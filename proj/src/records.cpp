#include "calibcusum/records.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include "json.hpp"

namespace calibcusum {

using nlohmann::json;

RecordFormat parse_record_format(std::string_view text) {
  if (text == "jsonl" || text == "json") return RecordFormat::kJsonl;
  if (text == "csv") return RecordFormat::kCsv;
  throw ConfigError("unknown record format '" + std::string(text) + "' (expected jsonl or csv)");
}

RecordFormat guess_record_format(std::string_view path) {
  return path.ends_with(".csv") ? RecordFormat::kCsv : RecordFormat::kJsonl;
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

RecordReader::RecordReader(std::istream& in, RecordFormat format, bool require_time)
    : in_(in), format_(format), require_time_(require_time) {}

void RecordReader::fail(const std::string& what) const {
  throw InputError("line " + std::to_string(line_) + ": " + what);
}

std::optional<MonitorRecord> RecordReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (blank(line)) continue;
    if (format_ == RecordFormat::kCsv && header_.empty()) {
      for (std::string& h : split_csv(line)) header_.push_back(trim(h));
      for (std::size_t i = 0; i < header_.size(); ++i) {
        if (header_[i] == "t") col_t_ = static_cast<int>(i);
        if (header_[i] == "p") col_p_ = static_cast<int>(i);
        if (header_[i] == "y") col_y_ = static_cast<int>(i);
      }
      if (col_p_ < 0 || col_y_ < 0 || (require_time_ && col_t_ < 0)) {
        fail(std::string("CSV header must name columns ") + (require_time_ ? "t, p, y" : "p, y"));
      }
      continue;
    }
    return format_ == RecordFormat::kJsonl ? parse_json(line) : parse_csv(line);
  }
  return std::nullopt;
}

namespace {

void check_prediction(double p, std::size_t line) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
    throw ValidationError("line " + std::to_string(line) + ": prediction " + format_double(p) +
                          " outside [0,1]");
  }
}

}  // namespace

MonitorRecord RecordReader::parse_json(const std::string& line) const {
  json row;
  try {
    row = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed JSON: ") + e.what());
  }
  if (!row.is_object()) fail("record is not a JSON object");

  MonitorRecord rec;
  if (auto it = row.find("t"); it != row.end()) {
    if (!it->is_number_integer()) fail("field t must be an integer");
    rec.time_index = it->get<std::int64_t>();
  } else if (require_time_) {
    fail("missing field t");
  }
  auto p = row.find("p");
  if (p == row.end() || !p->is_number()) fail("field p missing or not a number");
  rec.prediction = p->get<double>();
  check_prediction(rec.prediction, line_);

  auto y = row.find("y");
  if (y == row.end()) fail("missing field y");
  if (y->is_boolean()) {
    rec.outcome = y->get<bool>() ? 1 : 0;
  } else if (y->is_number_integer() && (y->get<std::int64_t>() == 0 || y->get<std::int64_t>() == 1)) {
    rec.outcome = static_cast<std::uint8_t>(y->get<std::int64_t>());
  } else {
    throw ValidationError("line " + std::to_string(line_) + ": outcome must be 0 or 1");
  }
  for (const auto& [key, value] : row.items()) {
    if (key == "t" || key == "p" || key == "y") continue;
    rec.tags[key] = value.is_string() ? value.get<std::string>() : value.dump();
  }
  return rec;
}

MonitorRecord RecordReader::parse_csv(const std::string& line) const {
  const auto fields = split_csv(line);
  if (fields.size() != header_.size()) {
    fail("expected " + std::to_string(header_.size()) + " fields, got " +
         std::to_string(fields.size()));
  }
  auto number = [&](int col, const char* name) {
    const std::string text = trim(fields[static_cast<std::size_t>(col)]);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
      fail(std::string("field ") + name + " is not a number: '" + text + "'");
    }
    return v;
  };

  MonitorRecord rec;
  if (col_t_ >= 0) {
    const double t = number(col_t_, "t");
    if (t != std::floor(t)) fail("field t must be an integer");
    rec.time_index = static_cast<std::int64_t>(t);
  }
  rec.prediction = number(col_p_, "p");
  check_prediction(rec.prediction, line_);
  const double y = number(col_y_, "y");
  if (y != 0.0 && y != 1.0) {
    throw ValidationError("line " + std::to_string(line_) + ": outcome must be 0 or 1");
  }
  rec.outcome = static_cast<std::uint8_t>(y);
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (static_cast<int>(i) == col_t_ || static_cast<int>(i) == col_p_ ||
        static_cast<int>(i) == col_y_) {
      continue;
    }
    rec.tags[header_[i]] = fields[i];
  }
  return rec;
}

BatchReader::BatchReader(std::istream& in, RecordFormat format) : records_(in, format, true) {}

std::optional<TimeBatch> BatchReader::next() {
  if (!pending_) {
    pending_ = records_.next();
    pending_line_ = records_.line_number();
  }
  if (!pending_) return std::nullopt;

  TimeBatch batch;
  batch.time_index = *pending_->time_index;
  if (last_time_ && batch.time_index <= *last_time_) {
    throw SequencingError("line " + std::to_string(pending_line_) + ": time index " +
                          std::to_string(batch.time_index) + " after " +
                          std::to_string(*last_time_));
  }
  while (pending_ && *pending_->time_index == batch.time_index) {
    batch.predictions.push_back(pending_->prediction);
    batch.outcomes.push_back(pending_->outcome);
    pending_ = records_.next();
    pending_line_ = records_.line_number();
  }
  if (pending_ && *pending_->time_index < batch.time_index) {
    throw SequencingError("line " + std::to_string(pending_line_) + ": time index " +
                          std::to_string(*pending_->time_index) + " after " +
                          std::to_string(batch.time_index));
  }
  last_time_ = batch.time_index;
  return batch;
}

std::vector<TimeBatch> ingest(std::istream& in, RecordFormat format) {
  BatchReader reader(in, format);
  std::vector<TimeBatch> batches;
  while (auto batch = reader.next()) batches.push_back(std::move(*batch));
  return batches;
}

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

}  // namespace

std::vector<TimeBatch> ingest_file(const std::string& path, RecordFormat format) {
  auto in = open_input(path);
  return ingest(in, format);
}

CalibrationDataset read_dataset(std::istream& in, RecordFormat format) {
  RecordReader reader(in, format, false);
  CalibrationDataset data;
  while (auto rec = reader.next()) {
    data.predictions.push_back(rec->prediction);
    data.outcomes.push_back(rec->outcome);
  }
  return data;
}

CalibrationDataset read_dataset_file(const std::string& path, RecordFormat format) {
  auto in = open_input(path);
  return read_dataset(in, format);
}

TraceWriter::TraceWriter(std::ostream& out, RecordFormat format) : out_(out), format_(format) {}

void TraceWriter::write(std::string_view chart_label, const TraceRow& row) {
  if (format_ == RecordFormat::kCsv) {
    if (!header_written_) {
      out_ << "chart_label,t,n_t,W,S,limit,signaled\n";
      header_written_ = true;
    }
    out_ << csv_field(chart_label) << ',' << row.time_index << ',' << row.batch_size << ','
         << format_double(row.w) << ',' << format_double(row.s) << ','
         << format_double(row.limit) << ',' << (row.signaled ? 1 : 0) << '\n';
    return;
  }
  out_ << "{\"chart_label\":\"" << chart_label << "\",\"t\":" << row.time_index
       << ",\"n_t\":" << row.batch_size << ",\"W\":" << format_double(row.w)
       << ",\"S\":" << format_double(row.s) << ",\"limit\":" << format_double(row.limit)
       << ",\"signaled\":" << (row.signaled ? "true" : "false") << "}\n";
}

}  // namespace calibcusum
