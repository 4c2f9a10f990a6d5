#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "ftbert/core/tape.hpp"

namespace ftbert {

/// Parameters sharing one depth. Depth 0 holds the embeddings, depth l in
/// 1..L block l, depth L+1 every head and pooling parameter.
template <typename T>
struct ParameterGroup {
  std::size_t depth = 0;
  std::vector<Parameter<T>*> members;
  double multiplier = 1.0;
};

/// Depth of a parameter from its name: "embeddings.*" -> 0,
/// "encoder.layer.<i>.*" -> i+1, anything else -> num_layers+1.
/// Throws ConfigError for a block index >= num_layers.
std::size_t parameter_depth(std::string_view name, std::size_t num_layers);

/// Per-depth rates eta^{k-1} = decay * eta^k, with the base rate at depth L+1.
struct LayerwiseLrSchedule {
  double base_rate = 2e-5;
  double decay = 1.0;
  std::size_t num_layers = 2;

  /// decay^(L+1-depth), built by repeated multiplication from the top so that
  /// adjacent multipliers differ by exactly one rounding of a product with decay.
  double multiplier(std::size_t depth) const;
  std::vector<double> multipliers() const;
  void validate() const;
};

/// Always returns num_layers+2 groups indexed by depth (some may be empty).
/// Every parameter lands in exactly one group.
template <typename T>
std::vector<ParameterGroup<T>> group_parameters(const std::vector<Parameter<T>*>& params,
                                                const LayerwiseLrSchedule& schedule);

/// One group at multiplier 1; plain (non layer-wise) Adam.
template <typename T>
std::vector<ParameterGroup<T>> single_group(const std::vector<Parameter<T>*>& params);

/// Slanted triangular schedule: linear 0 -> peak over [0, wT], then linear
/// peak -> 0 over [wT, T].
struct StlrSchedule {
  std::size_t total_steps = 1;
  double warmup_proportion = 0.1;
  double peak = 2e-5;

  /// Steps past total_steps give 0 and log a warning.
  double rate(std::size_t step) const;
  void validate() const;

  /// Schedule for `steps` optimizer updates numbered 1..steps: the horizon is
  /// steps + 1, so no update lands on a zero-rate endpoint.
  static StlrSchedule for_updates(std::size_t steps, double warmup_proportion, double peak) {
    return {steps + 1, warmup_proportion, peak};
  }
};

double stlr(std::size_t step, std::size_t total_steps, double warmup_proportion, double peak);

/// stlr(step) scaled by the group's multiplier.
template <typename T>
double effective_rate(const ParameterGroup<T>& group, const StlrSchedule& schedule, std::size_t step) {
  return schedule.rate(step) * group.multiplier;
}

}  // namespace ftbert
