#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "ftbert/optim/schedule.hpp"

namespace ftbert {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clipping threshold over the tensors of one step;
  /// 0 disables clipping.
  double clip_norm = 0.0;
};

/// Moment buffers keyed by parameter name. Each tensor keeps its own step
/// counter, so tensors that sit out a step (another task's head) are neither
/// moved nor have their bias correction advanced.
template <typename T>
class AdamState {
 public:
  struct Slot {
    Tensor<T> m;
    Tensor<T> v;
    std::uint64_t step = 0;
  };

  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  Slot& slot(const Parameter<T>& p);
  const Slot* find(const std::string& name) const;
  std::size_t size() const { return slots_.size(); }

 private:
  AdamConfig config_;
  std::map<std::string, Slot> slots_;
};

/// One Adam update with bias correction over every member of `groups`; group g
/// moves at rates[g]. All gradients are checked before anything is written:
/// a non-finite gradient throws NumericError naming the tensor and leaves
/// parameters and state untouched. Gradients are not cleared.
/// Returns the global gradient norm before clipping.
template <typename T>
double adam_step(std::span<const ParameterGroup<T>> groups, std::span<const double> rates,
                 AdamState<T>& state);

template <typename T>
void zero_grads(std::span<const ParameterGroup<T>> groups);

}  // namespace ftbert
