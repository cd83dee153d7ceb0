#ifndef RVA_GRAPH_HPP_
#define RVA_GRAPH_HPP_

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rva/errors.hpp"
#include "rva/parameters.hpp"
#include "rva/tensor.hpp"

namespace rva {

template <typename T>
class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  std::uint32_t id = 0;

  bool valid() const { return graph != nullptr; }
  const Tensor<T>& value() const { return graph->value(*this); }
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  T item() const { return value()[0]; }
};

// Tape of operation records. Values returned by value() stay valid for the
// life of the graph. Records only reference earlier records, so tape
// order is a topological order and backward walks it once in reverse.
// Confined to one thread while it is being built or differentiated.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& out_grad)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t node_count() const { return nodes_.size(); }

  Var<T> constant(Tensor<T> value) {
    return push("constant", std::move(value), nullptr, false, nullptr, {});
  }

  // Leaf that receives a gradient (for inputs under test).
  Var<T> leaf(Tensor<T> value) {
    return push("leaf", std::move(value), nullptr, grad_enabled_, nullptr, {});
  }

  // Parameters are referenced, not copied. Each parameter maps to one node per
  // graph; its gradient is added into Parameter::grad when backward finishes.
  Var<T> parameter(Parameter<T>& param) {
    auto it = param_nodes_.find(&param);
    if (it != param_nodes_.end()) return {this, it->second};
    Var<T> v = push("parameter", Tensor<T>(), &param.value, grad_enabled_,
                    &param, {});
    param_nodes_.emplace(&param, v.id);
    return v;
  }

  // A constant holding a copy of v's current value, cut from the gradient path.
  Var<T> detach(Var<T> v) { return constant(value(v)); }

  // Appends an op record. The backward rule is kept only when some input
  // carries a gradient.
  Var<T> record(const char* op, Tensor<T> value,
                std::initializer_list<Var<T>> inputs, BackwardFn backward) {
    bool needs_grad = false;
    for (const auto& in : inputs) needs_grad = needs_grad || requires_grad(in);
    return push(op, std::move(value), nullptr, needs_grad, nullptr,
                needs_grad ? std::move(backward) : BackwardFn{});
  }

  Var<T> record(const char* op, Tensor<T> value,
                const std::vector<Var<T>>& inputs, BackwardFn backward) {
    bool needs_grad = false;
    for (const auto& in : inputs) needs_grad = needs_grad || requires_grad(in);
    return push(op, std::move(value), nullptr, needs_grad, nullptr,
                needs_grad ? std::move(backward) : BackwardFn{});
  }

  const Tensor<T>& value(Var<T> v) const {
    const Node& n = nodes_.at(v.id);
    return n.external ? *n.external : n.value;
  }
  const Tensor<T>& value(std::uint32_t id) const { return value(Var<T>{nullptr, id}); }

  bool requires_grad(Var<T> v) const { return nodes_.at(v.id).requires_grad; }
  const char* op_name(Var<T> v) const { return nodes_.at(v.id).op; }

  // Accumulation target for an input's gradient, zero-filled on first use;
  // nullptr when the input is off the gradient path.
  Tensor<T>* grad_target(Var<T> v) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor<T>(value(v).shape());
    return &n.grad;
  }

  void backward(Var<T> loss) {
    if (value(loss).size() != 1) {
      throw GraphError("backward: loss must be scalar, got shape " +
                       shape_str(value(loss).shape()));
    }
    backward(loss, Tensor<T>(value(loss).shape(), T{1}));
  }

  // Vector-Jacobian product: propagates `seed` (shaped like `out`) to every
  // gradient leaf.
  void backward(Var<T> out, const Tensor<T>& seed) {
    if (!grad_enabled_) throw GraphError("backward: graph built without gradients");
    if (backward_done_) throw GraphError("backward: called twice without reset_grad()");
    if (seed.shape() != value(out).shape()) {
      throw GraphError("backward: seed shape " + shape_str(seed.shape()) +
                       " does not match output " + shape_str(value(out).shape()));
    }
    if (!requires_grad(out)) {
      throw GraphError("backward: output does not depend on any gradient leaf");
    }
    backward_done_ = true;
    *grad_target(out) = seed;
    for (std::int64_t id = out.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad.empty()) continue;
      if (n.backward) {
        if (!fault_op().empty() && fault_op() == n.op) {
          Tensor<T> skewed = n.grad;
          for (auto& g : skewed.values()) g *= T(1.5);
          n.backward(*this, skewed);
        } else {
          n.backward(*this, n.grad);
        }
      }
      if (n.param) {
        auto& dst = n.param->grad.storage();
        const auto& src = n.grad.storage();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
      }
    }
  }

  Tensor<T> grad(Var<T> v) const {
    const Node& n = nodes_.at(v.id);
    if (!n.requires_grad) {
      throw GraphError(std::string("grad: node '") + n.op +
                       "' is detached from the gradient path");
    }
    if (n.grad.empty()) return Tensor<T>(value(v).shape());
    return n.grad;
  }

  // Negative-control hook: when set to an op name, that op's backward rule
  // receives a skewed upstream gradient. Empty in normal operation.
  static std::string& fault_op() {
    static std::string name;
    return name;
  }

  void reset_grad() {
    for (auto& n : nodes_) n.grad = Tensor<T>();
    backward_done_ = false;
  }

 private:
  struct Node {
    const char* op;
    Tensor<T> value;
    const Tensor<T>* external;
    bool requires_grad;
    Parameter<T>* param;
    Tensor<T> grad;
    BackwardFn backward;
  };

  Var<T> push(const char* op, Tensor<T> value, const Tensor<T>* external,
              bool requires_grad, Parameter<T>* param, BackwardFn backward) {
    const Tensor<T>& v = external ? *external : value;
    if (!v.all_finite()) {
      throw NumericError(std::string(op) + ": non-finite value in output of shape " +
                         shape_str(v.shape()));
    }
    nodes_.push_back(Node{op, std::move(value), external, requires_grad, param,
                          Tensor<T>(), std::move(backward)});
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  // A deque keeps references returned by value() valid while nodes are appended.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::uint32_t> param_nodes_;
  bool grad_enabled_;
  bool backward_done_ = false;
};

}  // namespace rva

#endif  // RVA_GRAPH_HPP_
