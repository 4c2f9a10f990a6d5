#include "ftbert/experiments/metrics.hpp"

#include "ftbert/core/error.hpp"

namespace ftbert {

nlohmann::json MetricsRecord::to_json() const {
  return {{"step", step},   {"epoch", epoch},           {"task", task},
          {"split", split}, {"loss", loss},             {"error_rate", error_rate},
          {"learning_rate", learning_rate}, {"wall_clock", wall_clock}};
}

MetricsRecord MetricsRecord::from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.step = j.at("step").get<std::size_t>();
  r.epoch = j.at("epoch").get<std::size_t>();
  r.task = j.at("task").get<std::string>();
  r.split = j.at("split").get<std::string>();
  r.loss = j.at("loss").get<double>();
  r.error_rate = j.at("error_rate").get<double>();
  r.learning_rate = j.at("learning_rate").get<double>();
  r.wall_clock = j.at("wall_clock").get<double>();
  return r;
}

MetricsLog::MetricsLog(bool strict) : strict_(strict), start_(std::chrono::steady_clock::now()) {}

MetricsLog::MetricsLog(const std::filesystem::path& path, bool strict) : MetricsLog(strict) {
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error("cannot write metrics '" + path.string() + "'");
}

double MetricsLog::elapsed() const {
  if (strict_) return 0.0;
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

void MetricsLog::add(MetricsRecord record) {
  record.wall_clock = elapsed();
  if (out_.is_open()) {
    out_ << record.to_json().dump() << '\n';
    out_.flush();
  }
  records_.push_back(std::move(record));
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read metrics '" + path.string() + "'");
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(MetricsRecord::from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace ftbert
