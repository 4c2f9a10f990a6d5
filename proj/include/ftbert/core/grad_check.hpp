#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ftbert/core/tape.hpp"

namespace ftbert {

struct GradCheckOptions {
  /// Central-difference step.
  double step = 1e-3;
  /// Coordinates sampled per tensor; smaller tensors are checked exhaustively.
  std::size_t samples_per_tensor = 200;
  /// Lower bound on the relative-error denominator. Coordinates whose
  /// gradient is below the floor (including analytically zero ones, where the
  /// central difference is pure round-off) are judged on an absolute scale.
  double denominator_floor = 1e-3;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

/// Compares the gradients already stored in each parameter's `grad` against
/// central differences (f(theta + h) - f(theta - h)) / 2h of `loss`.
/// `loss` must be deterministic and must read the parameters' current values.
template <typename T>
GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<Parameter<T>* const> params,
                           const GradCheckOptions& options = {});

}  // namespace ftbert
