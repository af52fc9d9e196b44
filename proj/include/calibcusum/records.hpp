#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "calibcusum/cusum.hpp"
#include "calibcusum/errors.hpp"
#include "calibcusum/probability.hpp"
#include "calibcusum/recalibration.hpp"

namespace calibcusum {

/// A record failed a range or type check.
class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

enum class RecordFormat { kJsonl, kCsv };

RecordFormat parse_record_format(std::string_view text);
/// Picks the format from the file extension (.csv, otherwise JSONL).
RecordFormat guess_record_format(std::string_view path);

/// One prediction/outcome observation. JSONL rows carry {"t", "p", "y"};
/// any other fields are kept as string tags.
struct MonitorRecord {
  std::optional<std::int64_t> time_index;
  double prediction = 0.0;
  std::uint8_t outcome = 0;
  std::map<std::string, std::string> tags;
};

/// Reads records one at a time from JSONL or headed CSV.
class RecordReader {
 public:
  RecordReader(std::istream& in, RecordFormat format, bool require_time = true);

  std::optional<MonitorRecord> next();
  std::size_t line_number() const noexcept { return line_; }

 private:
  MonitorRecord parse_json(const std::string& line) const;
  MonitorRecord parse_csv(const std::string& line) const;
  [[noreturn]] void fail(const std::string& what) const;

  std::istream& in_;
  RecordFormat format_;
  bool require_time_;
  std::size_t line_ = 0;
  std::vector<std::string> header_;
  int col_t_ = -1, col_p_ = -1, col_y_ = -1;
};

/// Groups consecutive records with equal time index into batches. Time
/// indices must be nondecreasing.
class BatchReader {
 public:
  BatchReader(std::istream& in, RecordFormat format);
  std::optional<TimeBatch> next();

 private:
  RecordReader records_;
  std::optional<MonitorRecord> pending_;
  std::size_t pending_line_ = 0;
  std::optional<std::int64_t> last_time_;
};

std::vector<TimeBatch> ingest(std::istream& in, RecordFormat format);
std::vector<TimeBatch> ingest_file(const std::string& path, RecordFormat format);

/// Reads (p, y) pairs; the time index is optional here.
CalibrationDataset read_dataset(std::istream& in, RecordFormat format);
CalibrationDataset read_dataset_file(const std::string& path, RecordFormat format);

/// Trace rows as CSV (chart_label,t,n_t,W,S,limit,signaled) or JSON lines.
class TraceWriter {
 public:
  TraceWriter(std::ostream& out, RecordFormat format);
  void write(std::string_view chart_label, const TraceRow& row);

 private:
  std::ostream& out_;
  RecordFormat format_;
  bool header_written_ = false;
};

/// Shortest decimal text that round-trips the double.
std::string format_double(double v);

/// The text as one CSV field, quoted when it holds a comma or quote.
std::string csv_field(std::string_view text);

}  // namespace calibcusum
