#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  int id() const noexcept { return id_; }
  Tape<T>& tape() const noexcept { return *tape_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode differentiation tape. Nodes are appended in evaluation order,
/// so node ids are a topological order and backward is a single reverse sweep.
template <typename T>
class Tape {
 public:
  /// Receives the gradient of the node it is attached to and accumulates
  /// into parent gradients via grad_buffer().
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// When disabled, no backward closures are stored (inference).
  void set_grad_enabled(bool enabled) noexcept { grad_enabled_ = enabled; }
  bool grad_enabled() const noexcept { return grad_enabled_; }

  /// Value that never receives a gradient.
  Var<T> constant(Tensor<T> value);

  /// Leaf that receives a gradient.
  Var<T> variable(Tensor<T> value);

  /// Leaf bound to an external parameter tensor. Repeated calls with the
  /// same tensor return the same node; grad_of() looks gradients up by it.
  Var<T> param(const Tensor<T>& p);

  /// Appends an op result. `backward` is dropped when no parent needs a
  /// gradient.
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn backward);

  const Tensor<T>& value(int id) const { return nodes_.at(id).value; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }

  /// Gradient accumulator of node `id`, zero-initialized on first access.
  Tensor<T>& grad_buffer(int id);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  void backward(const Var<T>& loss);

  const Tensor<T>* grad(const Var<T>& v) const;
  const Tensor<T>* grad_of(const Tensor<T>& param) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    BackwardFn backward;
    bool requires_grad = false;
    std::optional<Tensor<T>> grad;
  };

  Var<T> push(Node node);

  std::deque<Node> nodes_;  // stable references across push_back
  std::unordered_map<const Tensor<T>*, int> param_ids_;
  bool grad_enabled_ = true;
};

}  // namespace c2f
