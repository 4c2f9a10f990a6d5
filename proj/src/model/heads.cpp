#include "ftbert/model/heads.hpp"

namespace ftbert {

template <typename T>
ClassifierHead<T>::ClassifierHead(ParameterStore<T>& store, const std::string& prefix,
                                  std::size_t input_width, std::size_t num_classes, Rng* rng,
                                  double init_std) {
  if (num_classes < 1) throw ConfigError("classifier needs at least one class");
  Tensor<T> w({input_width, num_classes});
  if (rng) {
    for (auto& v : w.data()) v = static_cast<T>(rng->truncated_normal(init_std));
  }
  weight_ = &store.add(prefix + ".weight", std::move(w));
  bias_ = &store.add(prefix + ".bias", Tensor<T>({num_classes}));
}

template <typename T>
Var<T> ClassifierHead<T>::logits(Var<T> features) const {
  if (features.cols() != input_width()) {
    throw ShapeError("classifier expects " + std::to_string(input_width()) +
                     " features, got " + shape_string(features.shape()));
  }
  Tape<T>& tape = *features.tape;
  return add_row(matmul(features, tape.param(*weight_)), tape.param(*bias_));
}

template class ClassifierHead<float>;
template class ClassifierHead<double>;

}  // namespace ftbert
