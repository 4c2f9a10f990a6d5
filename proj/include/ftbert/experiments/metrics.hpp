#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace ftbert {

/// error_rate = 100 * (1 - accuracy).
struct MetricsRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::string task;
  std::string split;
  double loss = 0.0;
  double error_rate = 0.0;
  double learning_rate = 0.0;
  double wall_clock = 0.0;

  nlohmann::json to_json() const;
  static MetricsRecord from_json(const nlohmann::json& j);
};

/// Collects records and optionally appends them as JSON lines to a file.
/// In strict mode wall_clock is always written as 0 so that runs compare
/// byte for byte.
class MetricsLog {
 public:
  explicit MetricsLog(bool strict = false);
  MetricsLog(const std::filesystem::path& path, bool strict);

  void add(MetricsRecord record);
  const std::vector<MetricsRecord>& records() const { return records_; }
  bool strict() const { return strict_; }
  /// Seconds since construction (0 in strict mode).
  double elapsed() const;

 private:
  bool strict_;
  std::chrono::steady_clock::time_point start_;
  std::ofstream out_;
  std::vector<MetricsRecord> records_;
};

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

}  // namespace ftbert
