#include "ftbert/optim/adam.hpp"

#include <cmath>

#include "ftbert/core/error.hpp"

namespace ftbert {

template <typename T>
typename AdamState<T>::Slot& AdamState<T>::slot(const Parameter<T>& p) {
  auto it = slots_.find(p.name);
  if (it == slots_.end()) {
    it = slots_.emplace(p.name, Slot{Tensor<T>(p.value.shape()), Tensor<T>(p.value.shape()), 0}).first;
  } else if (it->second.m.shape() != p.value.shape()) {
    throw ShapeError("adam: state for '" + p.name + "' has shape " + shape_string(it->second.m.shape()) +
                     ", parameter has " + shape_string(p.value.shape()));
  }
  return it->second;
}

template <typename T>
const typename AdamState<T>::Slot* AdamState<T>::find(const std::string& name) const {
  const auto it = slots_.find(name);
  return it == slots_.end() ? nullptr : &it->second;
}

template <typename T>
double adam_step(std::span<const ParameterGroup<T>> groups, std::span<const double> rates,
                 AdamState<T>& state) {
  if (groups.size() != rates.size()) throw ShapeError("adam_step: one rate per group required");
  double sq = 0.0;
  for (const auto& g : groups) {
    for (const auto* p : g.members) {
      for (const T x : p->grad.data()) {
        if (!std::isfinite(x)) throw NumericError("adam_step: non-finite gradient in '" + p->name + "'");
        sq += static_cast<double>(x) * static_cast<double>(x);
      }
    }
  }
  const double norm = std::sqrt(sq);
  const AdamConfig& c = state.config();
  const double clip = (c.clip_norm > 0.0 && norm > c.clip_norm) ? c.clip_norm / norm : 1.0;

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double rate = rates[gi];
    for (auto* p : groups[gi].members) {
      auto& s = state.slot(*p);
      ++s.step;
      const double t = static_cast<double>(s.step);
      const double bc1 = 1.0 - std::pow(c.beta1, t);
      const double bc2 = 1.0 - std::pow(c.beta2, t);
      auto value = p->value.data();
      const auto grad = p->grad.data();
      auto m = s.m.data();
      auto v = s.v.data();
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = static_cast<double>(grad[i]) * clip;
        const double mi = c.beta1 * static_cast<double>(m[i]) + (1.0 - c.beta1) * g;
        const double vi = c.beta2 * static_cast<double>(v[i]) + (1.0 - c.beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double step = rate * (mi / bc1) / (std::sqrt(vi / bc2) + c.eps);
        value[i] = static_cast<T>(static_cast<double>(value[i]) - step);
      }
    }
  }
  return norm;
}

template <typename T>
void zero_grads(std::span<const ParameterGroup<T>> groups) {
  for (const auto& g : groups)
    for (auto* p : g.members) p->zero_grad();
}

template class AdamState<float>;
template class AdamState<double>;
template double adam_step(std::span<const ParameterGroup<float>>, std::span<const double>, AdamState<float>&);
template double adam_step(std::span<const ParameterGroup<double>>, std::span<const double>, AdamState<double>&);
template void zero_grads(std::span<const ParameterGroup<float>>);
template void zero_grads(std::span<const ParameterGroup<double>>);

}  // namespace ftbert
