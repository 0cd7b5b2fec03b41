// SPDX-License-Identifier: Apache-2.0
#include "enrol/core/tape.hpp"

#include "enrol/core/error.hpp"

namespace enrol {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("leaf tensor contains non-finite values");
  Node node;
  node.op = "leaf";
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& param) {
  Var v = leaf(param.value, true);
  nodes_.back().op = "param:" + param.name;
  nodes_.back().param = &param;
  return v;
}

Var Tape::record(std::string op, Tensor value, std::vector<Var> inputs, BackwardRule rule) {
  if (!value.all_finite()) throw NumericError(op + " produced non-finite values");
  Node node;
  node.op = std::move(op);
  node.value = std::move(value);
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw UsageError(node.op + ": input recorded on a different tape");
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.rule = std::move(rule);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.size() == 0) throw UsageError("no gradient accumulated for node '" + n.op + "'");
  return n.grad;
}

Tensor* Tape::grad_sink(Var v) {
  Node& n = nodes_.at(v.id());
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() == 0) n.grad = Tensor(n.value.shape(), 0);
  return &n.grad;
}

void Tape::backward(Var root) {
  if (&root.tape() != this) throw UsageError("backward: root belongs to a different tape");
  const Node& r = nodes_.at(root.id());
  if (r.value.size() != 1)
    throw UsageError("backward: root must be a scalar, got shape " + shape_string(r.value.shape()));
  for (Node& n : nodes_) n.grad = Tensor();
  last_visits_ = 0;
  if (!r.requires_grad) return;
  nodes_[root.id()].grad = Tensor(r.value.shape(), 1);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.rule || n.grad.size() == 0) continue;
    n.rule(*this, n.grad);
    ++last_visits_;
  }
  for (Node& n : nodes_) {
    if (n.param == nullptr) continue;
    Parameter& p = *n.param;
    if (!p.has_grad) {
      p.grad = Tensor(p.value.shape(), 0);
      p.has_grad = true;
    }
    if (n.grad.size() != 0)
      for (std::size_t k = 0; k < p.grad.size(); ++k) p.grad[k] += n.grad[k];
  }
}

}  // namespace enrol
