#include "traj/num/graph.hpp"

#include "traj/error.hpp"

namespace traj::num {

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::push(std::string_view op, Tensor value, bool requires_grad, Parameter* param) {
  if (consumed_) throw StateError("graph already consumed by backward; build a new graph");
  const int id = static_cast<int>(nodes_.size());
  if (!value.all_finite()) throw NumericError(std::string(op), id);
  Node& n = nodes_.emplace_back();
  n.op = op;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.param = param;
  return Var(this, id);
}

Var Graph::constant(Tensor value) { return push("constant", std::move(value), false, nullptr); }

Var Graph::variable(Tensor value) { return push("variable", std::move(value), track_, nullptr); }

Var Graph::parameter(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Var v = track_ ? push("parameter", p.value, true, &p) : push("parameter", p.value, false, nullptr);
  param_nodes_[&p] = v.id();
  return v;
}

Var Graph::record(std::string_view op, Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (&in.graph() != this) throw StateError(std::string("op '") + std::string(op) + "' mixes graphs");
    needs = needs || requires_grad(in.id());
  }
  Var out = push(op, std::move(value), needs, nullptr);
  if (needs) nodes_.back().backward = std::move(backward);
  return out;
}

Tensor* Graph::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(n.value);
    n.has_grad = true;
  }
  return &n.grad;
}

const Tensor& Graph::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (!n.has_grad) throw StateError("no gradient recorded for node " + std::to_string(v.id()));
  return n.grad;
}

void Graph::backward(Var output) {
  if (nodes_.empty()) throw StateError("backward called before any forward computation");
  if (output.value().size() != 1) {
    throw DimensionError("backward without seed needs a scalar output, got " + output.value().shape_string());
  }
  backward(output, Tensor::scalar(1.0).reshaped(output.rows(), output.cols()));
}

void Graph::backward(Var output, const Tensor& seed) {
  if (nodes_.empty()) throw StateError("backward called before any forward computation");
  if (consumed_) throw StateError("graph already consumed by a previous backward pass");
  if (&output.graph() != this) throw StateError("output belongs to another graph");
  if (!seed.same_shape(output.value())) {
    throw DimensionError("seed shape " + seed.shape_string() + " does not match output " +
                         output.value().shape_string());
  }
  consumed_ = true;
  Tensor* g = grad_buffer(output.id());
  if (g == nullptr) return;  // output does not depend on any trainable leaf
  *g += seed;
  for (int id = output.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, n.value, n.grad);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

}  // namespace traj::num
