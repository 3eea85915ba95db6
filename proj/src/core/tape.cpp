#include "ctnet/tape.hpp"

#include <string>

#include "ctnet/errors.hpp"

namespace ctnet {

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor(a.dims(), std::move(out), common_precision({&a, &b}));
}

Var GradientTape::leaf(Tensor value) {
  nodes_.push_back(Node{nullptr, {}, std::move(value)});
  return Var{nodes_.size() - 1};
}

Var GradientTape::apply(OperationPtr op, std::vector<Var> inputs) {
  if (!op) throw ValidationError("GradientTape::apply: null operation");
  std::vector<Tensor> values;
  std::vector<std::size_t> parents;
  values.reserve(inputs.size());
  for (Var v : inputs) {
    values.push_back(value(v));
    parents.push_back(v.index);
  }
  Tensor out = op->forward(values);
  nodes_.push_back(Node{std::move(op), std::move(parents), std::move(out)});
  return Var{nodes_.size() - 1};
}

const Tensor& GradientTape::value(Var v) const {
  if (v.index >= nodes_.size()) throw BoundsError("tape variable " + std::to_string(v.index) + " does not exist");
  return nodes_[v.index].value;
}

Tensor GradientTape::Gradients::of(Var v, const GradientTape& tape) const {
  if (v.index < per_node.size() && per_node[v.index]) return *per_node[v.index];
  const Tensor& value = tape.value(v);
  return Tensor::zeros(value.dims(), value.precision());
}

GradientTape::Gradients GradientTape::backward(Var output, const Tensor& cotangent) const {
  require_same_dims(value(output), cotangent, "backward cotangent");
  Gradients g;
  g.per_node.resize(nodes_.size());
  g.per_node[output.index] = cotangent;
  for (std::size_t k = output.index + 1; k-- > 0;) {
    if (!g.per_node[k]) continue;
    g.visit_order.push_back(k);
    const Node& node = nodes_[k];
    if (!node.op) continue;
    std::vector<Tensor> inputs;
    inputs.reserve(node.parents.size());
    for (std::size_t p : node.parents) inputs.push_back(nodes_[p].value);
    std::vector<Tensor> parent_cts = node.op->vjp(inputs, node.value, *g.per_node[k]);
    if (parent_cts.size() != node.parents.size()) {
      throw ValidationError(std::string(node.op->name()) + ": vjp returned wrong number of cotangents");
    }
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      const std::size_t p = node.parents[i];
      require_same_dims(parent_cts[i], nodes_[p].value, "vjp cotangent");
      g.per_node[p] = g.per_node[p] ? add(*g.per_node[p], parent_cts[i]) : std::move(parent_cts[i]);
    }
  }
  return g;
}

std::vector<Tensor> GradientTape::replay() const {
  std::vector<Tensor> values;
  values.reserve(nodes_.size());
  for (const Node& node : nodes_) {
    if (!node.op) {
      values.push_back(node.value);
      continue;
    }
    std::vector<Tensor> inputs;
    for (std::size_t p : node.parents) inputs.push_back(values[p]);
    values.push_back(node.op->forward(inputs));
  }
  return values;
}

bool GradientTape::replay_matches() const {
  const std::vector<Tensor> values = replay();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!values[i].identical(nodes_[i].value)) return false;
  }
  return true;
}

}  // namespace ctnet
