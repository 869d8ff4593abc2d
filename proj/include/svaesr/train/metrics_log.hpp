#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace svaesr::train {

struct MetricRecord {
  std::uint64_t iter = 0;
  std::string name;
  double value = 0.0;

  bool operator==(const MetricRecord&) const = default;
};

/// Append-only `iter,name,value` lines; values are written with enough
/// digits to parse back to the same double.
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(const std::string& path);

  void append(const MetricRecord& record);
  void flush();
  bool is_open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
};

std::string format_record(const MetricRecord& record);
MetricRecord parse_record(const std::string& line);
std::vector<MetricRecord> read_metrics(const std::string& path);

/// Drops every record with iter > last_iter; used when resuming a run whose
/// log ran ahead of its last checkpoint.
void truncate_metrics(const std::string& path, std::uint64_t last_iter);

}  // namespace svaesr::train
