#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ftbert/core/tape.hpp"
#include "ftbert/model/encoder.hpp"

namespace ftbert {

/// Softmax classifier p(c | h) = softmax(h W + b); W is [features x classes].
/// Parameters live in the caller's store under "<prefix>.weight" / "<prefix>.bias".
template <typename T>
class ClassifierHead {
 public:
  /// Weights truncated-normal(0, std) when `rng` is given, zero otherwise.
  ClassifierHead(ParameterStore<T>& store, const std::string& prefix, std::size_t input_width,
                 std::size_t num_classes, Rng* rng, double init_std = 0.02);

  /// Throws ShapeError when the feature width does not match W.
  Var<T> logits(Var<T> features) const;

  std::size_t input_width() const { return weight_->value.dim(0); }
  std::size_t num_classes() const { return weight_->value.dim(1); }
  Parameter<T>& weight() const { return *weight_; }
  Parameter<T>& bias() const { return *bias_; }
  std::vector<Parameter<T>*> parameters() const { return {weight_, bias_}; }

 private:
  Parameter<T>* weight_;
  Parameter<T>* bias_;
};

/// Class probabilities.
template <typename T>
Var<T> classify(Var<T> features, const ClassifierHead<T>& head) {
  return softmax(head.logits(features));
}

}  // namespace ftbert
