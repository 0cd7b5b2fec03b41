// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation.
//
// A Tape records primitive operations in execution order. Each recorded node
// keeps its forward value, the ids of its inputs and a backward rule that
// accumulates into the input gradients. backward() walks the nodes once in
// reverse order, which is a valid reverse topological order because inputs
// are always recorded before the operations that consume them.
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "enrol/core/tensor.hpp"

namespace enrol {

class Tape;
struct Parameter;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  /// Gradient after backward(); throws UsageError when none was accumulated.
  const Tensor& grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Accumulates into the gradients of the recorded inputs. `out_grad` is
  /// dRoot/dOutput for the node being processed.
  using BackwardRule = std::function<void(Tape& tape, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  /// Leaf whose gradient is added to `param.grad` by backward().
  Var parameter(Parameter& param);

  /// Records an operation. The value is checked for NaN/Inf. When no input
  /// requires a gradient the rule is dropped.
  Var record(std::string op, Tensor value, std::vector<Var> inputs, BackwardRule rule);

  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  bool has_grad(std::size_t id) const { return nodes_.at(id).grad.size() != 0; }
  const Tensor& grad(std::size_t id) const;

  /// Gradient buffer of `v` for a backward rule, allocated zero on first use;
  /// nullptr when `v` does not require a gradient.
  Tensor* grad_sink(Var v);

  /// Number of backward rules invoked by the last backward() call.
  std::size_t last_backward_visits() const { return last_visits_; }

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardRule rule;
    Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::size_t last_visits_ = 0;
};

/// Trainable weight with its SGD momentum buffer. The gradient is filled by
/// Tape::backward() for tapes the parameter was bound to.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor momentum;
  Tensor grad;
  bool has_grad = false;

  Parameter() = default;
  Parameter(std::string name_, Tensor value_)
      : name(std::move(name_)), value(std::move(value_)), momentum(value.shape(), 0) {}

  void zero_grad() {
    grad = Tensor();
    has_grad = false;
  }
};

}  // namespace enrol
