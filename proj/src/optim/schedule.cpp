#include "ftbert/optim/schedule.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "ftbert/core/error.hpp"
#include "ftbert/core/log.hpp"

namespace ftbert {

std::size_t parameter_depth(std::string_view name, std::size_t num_layers) {
  constexpr std::string_view kEmbeddings = "embeddings.";
  constexpr std::string_view kLayer = "encoder.layer.";
  if (name.substr(0, kEmbeddings.size()) == kEmbeddings) return 0;
  if (name.substr(0, kLayer.size()) == kLayer) {
    const auto rest = name.substr(kLayer.size());
    std::size_t index = 0;
    const auto [end, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), index);
    if (ec != std::errc{} || end == rest.data() || index >= num_layers) {
      throw ConfigError("parameter '" + std::string(name) + "' has no valid block index for " +
                        std::to_string(num_layers) + " layers");
    }
    return index + 1;
  }
  return num_layers + 1;
}

void LayerwiseLrSchedule::validate() const {
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay_factor must lie in (0, 1]");
  if (!(base_rate >= 0.0) || !std::isfinite(base_rate)) throw ConfigError("base_lr must be finite and >= 0");
}

double LayerwiseLrSchedule::multiplier(std::size_t depth) const {
  if (depth > num_layers + 1) throw ConfigError("depth " + std::to_string(depth) + " above the top group");
  double m = 1.0;
  for (std::size_t d = num_layers + 1; d > depth; --d) m *= decay;
  return m;
}

std::vector<double> LayerwiseLrSchedule::multipliers() const {
  std::vector<double> m(num_layers + 2, 1.0);
  for (std::size_t d = num_layers + 1; d > 0; --d) m[d - 1] = m[d] * decay;
  return m;
}

template <typename T>
std::vector<ParameterGroup<T>> group_parameters(const std::vector<Parameter<T>*>& params,
                                                const LayerwiseLrSchedule& schedule) {
  schedule.validate();
  const auto multipliers = schedule.multipliers();
  std::vector<ParameterGroup<T>> groups(schedule.num_layers + 2);
  for (std::size_t d = 0; d < groups.size(); ++d) {
    groups[d].depth = d;
    groups[d].multiplier = multipliers[d];
  }
  for (auto* p : params) groups[parameter_depth(p->name, schedule.num_layers)].members.push_back(p);
  return groups;
}

template <typename T>
std::vector<ParameterGroup<T>> single_group(const std::vector<Parameter<T>*>& params) {
  return {ParameterGroup<T>{0, params, 1.0}};
}

void StlrSchedule::validate() const {
  if (total_steps < 1) throw ConfigError("train_steps must be >= 1");
  if (!(warmup_proportion > 0.0 && warmup_proportion < 1.0)) {
    throw ConfigError("warmup_proportion must lie in (0, 1)");
  }
}

double StlrSchedule::rate(std::size_t step) const {
  if (step > total_steps) {
    log_warning("stlr: step " + std::to_string(step) + " past total " + std::to_string(total_steps) +
                "; rate clamped to 0");
    return 0.0;
  }
  const double s = static_cast<double>(step);
  const double t = static_cast<double>(total_steps);
  const double warmup = warmup_proportion * t;
  if (s <= warmup) return peak * (s / warmup);
  return peak * ((t - s) / ((1.0 - warmup_proportion) * t));
}

double stlr(std::size_t step, std::size_t total_steps, double warmup_proportion, double peak) {
  StlrSchedule s{total_steps, warmup_proportion, peak};
  s.validate();
  return s.rate(step);
}

template std::vector<ParameterGroup<float>> group_parameters(const std::vector<Parameter<float>*>&,
                                                             const LayerwiseLrSchedule&);
template std::vector<ParameterGroup<double>> group_parameters(const std::vector<Parameter<double>*>&,
                                                              const LayerwiseLrSchedule&);
template std::vector<ParameterGroup<float>> single_group(const std::vector<Parameter<float>*>&);
template std::vector<ParameterGroup<double>> single_group(const std::vector<Parameter<double>*>&);

}  // namespace ftbert
