#pragma once

#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "traj/num/tensor.hpp"

namespace traj::num {

// A named trainable tensor with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Tensor value;
  Tensor grad;
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Define-by-run reverse-mode tape. Each op appends a node holding its output
// value and a closure that pushes the output gradient to its inputs. Nodes are
// appended in topological order, so backward walks the tape in reverse and
// visits each node once. A graph is consumed by its backward pass.
class Graph {
 public:
  // Receives the node's own output value and its accumulated gradient.
  using BackwardFn = std::function<void(Graph&, const Tensor& out_value, const Tensor& out_grad)>;

  Graph() = default;
  // With track_gradients false every node is a constant: parameters bind by
  // value and no backward closures are kept.
  explicit Graph(bool track_gradients) : track_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf whose gradient is kept and can be read back with grad().
  Var variable(Tensor value);
  // Leaf bound to a parameter; backward adds into parameter.grad. Binding the
  // same parameter twice returns the same node.
  Var parameter(Parameter& p);

  Var record(std::string_view op, Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  // Gradient buffer of a node, allocated as zeros on first use. Null when the
  // node does not require a gradient.
  Tensor* grad_buffer(int id);
  const Tensor& grad(Var v) const;

  void backward(Var output);
  void backward(Var output, const Tensor& seed);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Var push(std::string_view op, Tensor value, bool requires_grad, Parameter* param);

  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
  bool consumed_ = false;
  bool track_ = true;
};

}  // namespace traj::num
