#include "c2f/tape.hpp"

namespace c2f {

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  return push(Node{std::move(value), {}, false, std::nullopt});
}

template <typename T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  return push(Node{std::move(value), {}, grad_enabled_, std::nullopt});
}

template <typename T>
Var<T> Tape<T>::param(const Tensor<T>& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var<T>(this, it->second);
  Var<T> v = variable(p);
  param_ids_.emplace(&p, v.id());
  return v;
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn backward) {
  bool needs = false;
  if (grad_enabled_) {
    for (const auto& p : parents) {
      if (&p.tape() != this) throw ContractError("op mixes values from different tapes");
      needs = needs || nodes_[p.id()].requires_grad;
    }
  }
  if (!needs) backward = nullptr;
  return push(Node{std::move(value), std::move(backward), needs, std::nullopt});
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(int id) {
  Node& node = nodes_.at(id);
  if (!node.grad) node.grad.emplace(node.value.shape());
  return *node.grad;
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (loss.shape() != kScalarShape) {
    throw ContractError("backward: loss must be scalar, got shape " + loss.shape().str());
  }
  for (auto& node : nodes_) node.grad.reset();
  grad_buffer(loss.id()).fill(T(1));
  for (int id = loss.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.grad || !node.backward) continue;
    node.backward(*this, *node.grad);
  }
}

template <typename T>
const Tensor<T>* Tape<T>::grad(const Var<T>& v) const {
  const auto& g = nodes_.at(v.id()).grad;
  return g ? &*g : nullptr;
}

template <typename T>
const Tensor<T>* Tape<T>::grad_of(const Tensor<T>& param) const {
  auto it = param_ids_.find(&param);
  if (it == param_ids_.end()) return nullptr;
  const auto& g = nodes_[it->second].grad;
  return g ? &*g : nullptr;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace c2f
