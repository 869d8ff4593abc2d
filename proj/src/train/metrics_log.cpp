#include "svaesr/train/metrics_log.hpp"

#include <charconv>
#include <filesystem>

#include "svaesr/core/error.hpp"

namespace svaesr::train {

MetricsLog::MetricsLog(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw IoError("cannot open metrics log '" + path + "'");
}

void MetricsLog::append(const MetricRecord& record) { out_ << format_record(record) << '\n'; }

void MetricsLog::flush() { out_.flush(); }

std::string format_record(const MetricRecord& record) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), record.value);
  return std::to_string(record.iter) + "," + record.name + "," + std::string(buf, res.ptr);
}

MetricRecord parse_record(const std::string& line) {
  const auto a = line.find(',');
  const auto b = line.rfind(',');
  if (a == std::string::npos || a == b) throw FormatError("metrics: malformed line '" + line + "'");
  MetricRecord r;
  const char* first = line.data();
  if (std::from_chars(first, first + a, r.iter).ec != std::errc())
    throw FormatError("metrics: bad iteration in '" + line + "'");
  r.name = line.substr(a + 1, b - a - 1);
  const auto res = std::from_chars(first + b + 1, first + line.size(), r.value);
  if (res.ec != std::errc() || res.ptr != first + line.size())
    throw FormatError("metrics: bad value in '" + line + "'");
  return r;
}

std::vector<MetricRecord> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics log '" + path + "'");
  std::vector<MetricRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(parse_record(line));
  return out;
}

void truncate_metrics(const std::string& path, std::uint64_t last_iter) {
  if (!std::filesystem::exists(path)) return;
  std::vector<MetricRecord> keep;
  for (auto& r : read_metrics(path))
    if (r.iter <= last_iter) keep.push_back(std::move(r));
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot rewrite metrics log '" + path + "'");
  for (const auto& r : keep) out << format_record(r) << '\n';
}

}  // namespace svaesr::train
