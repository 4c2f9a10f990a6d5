#include "ftbert/core/tape.hpp"

namespace ftbert {

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node node;
  node.value = std::move(value);
  return push(std::move(node));
}

template <typename T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

template <typename T>
Var<T> Tape<T>::param(Parameter<T>& parameter) {
  Node node;
  node.param = &parameter;
  node.requires_grad = true;
  return push(std::move(node));
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (auto in : inputs) {
    if (nodes_.at(in).requires_grad) node.requires_grad = true;
  }
  if (node.requires_grad) {
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
  }
  return push(std::move(node));
}

template <typename T>
const Tensor<T>& Tape<T>::value(std::size_t id) const {
  const Node& node = nodes_[id];
  return node.param ? node.param->value : node.value;
}

template <typename T>
Tensor<T>& Tape<T>::grad(std::size_t id) {
  Node& node = nodes_[id];
  if (node.param) return node.param->grad;
  if (!node.has_grad) {
    node.grad = Tensor<T>(value(id).shape());
    node.has_grad = true;
  }
  return node.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape != this) throw Error("backward: loss belongs to a different tape");
  const auto& lv = value(loss.id);
  if (lv.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_string(lv.shape()));
  }
  if (!nodes_[loss.id].requires_grad) return;
  grad(loss.id)[0] += T{1};
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || !node.has_grad) continue;
    node.backward(*this, i);
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace ftbert
