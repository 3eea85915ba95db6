#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ctnet/tensor.hpp"

namespace ctnet {

/// A differentiable operation: a pure forward map plus its vector-Jacobian
/// product. Parameters that are not differentiated (alpha, label maps,
/// lattice geometry) live in the operation object itself.
class Operation {
 public:
  virtual ~Operation() = default;
  virtual std::string_view name() const = 0;
  virtual Tensor forward(std::span<const Tensor> inputs) const = 0;
  /// Returns one cotangent per input, each shaped like that input.
  virtual std::vector<Tensor> vjp(std::span<const Tensor> inputs, const Tensor& output,
                                  const Tensor& cotangent) const = 0;
};

using OperationPtr = std::shared_ptr<const Operation>;

/// Handle to a node on a GradientTape.
struct Var {
  std::size_t index = 0;
};

/// Records operations in execution order. Node indices are a topological
/// order by construction: a node's parents always precede it.
class GradientTape {
 public:
  struct Node {
    OperationPtr op;  // null for leaves
    std::vector<std::size_t> parents;
    Tensor value;
  };

  struct Gradients {
    /// Accumulated cotangent per node; empty where no path reaches the output.
    std::vector<std::optional<Tensor>> per_node;
    /// Node indices in the order backward visited them.
    std::vector<std::size_t> visit_order;
    /// Cotangent for a node, zeros when it does not influence the output.
    Tensor of(Var v, const GradientTape& tape) const;
  };

  Var leaf(Tensor value);
  Var apply(OperationPtr op, std::vector<Var> inputs);

  template <class Op, class... Args>
  Var record(std::vector<Var> inputs, Args&&... args) {
    return apply(std::make_shared<const Op>(std::forward<Args>(args)...), std::move(inputs));
  }

  const Tensor& value(Var v) const;
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse-mode sweep from output, seeded with cotangent.
  Gradients backward(Var output, const Tensor& cotangent) const;

  /// Recomputes every operation node from the recorded leaves.
  std::vector<Tensor> replay() const;
  /// True when replay() reproduces every recorded value bit-exactly.
  bool replay_matches() const;

 private:
  std::vector<Node> nodes_;
};

/// Elementwise sum used for cotangent accumulation.
Tensor add(const Tensor& a, const Tensor& b);

}  // namespace ctnet
