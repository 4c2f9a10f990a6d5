#include "ftbert/core/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ftbert/core/rng.hpp"

namespace ftbert {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

template <typename T>
GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<Parameter<T>* const> params,
                           const GradCheckOptions& options) {
  GradCheckResult result;
  Rng rng(options.seed);
  for (Parameter<T>* p : params) {
    const Tensor<T> analytic = p->grad;
    std::vector<std::size_t> coords(p->value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.samples_per_tensor) {
      rng.shuffle(coords);
      coords.resize(options.samples_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      const T original = p->value[idx];
      p->value[idx] = static_cast<T>(original + options.step);
      const double plus = loss();
      p->value[idx] = static_cast<T>(original - options.step);
      const double minus = loss();
      p->value[idx] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = static_cast<double>(analytic[idx]);
      const double err = relative_error(a, numeric, options.denominator_floor);
      ++result.coordinates_checked;
      if (err > result.max_relative_error || result.coordinates_checked == 1) {
        result.max_relative_error = err;
        result.worst_parameter = p->name;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

template GradCheckResult grad_check<float>(const std::function<double()>&,
                                           std::span<Parameter<float>* const>,
                                           const GradCheckOptions&);
template GradCheckResult grad_check<double>(const std::function<double()>&,
                                            std::span<Parameter<double>* const>,
                                            const GradCheckOptions&);

}  // namespace ftbert
