#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ftbert/core/tensor.hpp"

namespace ftbert {

/// A trainable tensor together with its accumulated gradient. The gradient
/// buffer always exists and has the value's shape; `zero_grad` resets it.
template <typename T>
struct Parameter {
  Parameter(std::string name_, Tensor<T> value_)
      : name(std::move(name_)), value(std::move(value_)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T{0}); }

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

template <typename T>
class Tape;

/// Handle to a node recorded on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so the
/// tape is topologically sorted by construction; `backward` walks it in
/// reverse. Parameter leaves write their gradients straight into
/// `Parameter::grad` (accumulating), which lets a trainer run several tapes
/// per optimizer step. A tape is confined to one thread.
template <typename T>
class Tape {
 public:
  /// Propagates the output gradient (`tape.grad(self)`) to the inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  /// Leaf that receives a gradient (read back with `grad(var)`).
  Var<T> variable(Tensor<T> value);
  Var<T> param(Parameter<T>& parameter);

  /// Appends an operation result. The backward rule is kept only when some
  /// input requires a gradient.
  Var<T> record(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor<T>& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

  /// Gradient buffer of a node, zero-initialised on first access.
  Tensor<T>& grad(std::size_t id);
  const Tensor<T>& grad(Var<T> var) { return grad(var.id); }

  /// Seeds d(loss)/d(loss) = 1 and runs every backward rule in reverse order.
  /// Throws ShapeError if `loss` is not a single element.
  void backward(Var<T> loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor<T> value;
    Parameter<T>* param = nullptr;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Var<T> push(Node node);

  std::deque<Node> nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape->value(id);
}

}  // namespace ftbert
