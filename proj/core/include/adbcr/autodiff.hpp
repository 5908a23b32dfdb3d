#pragma once

// Define-by-run reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every operation of one forward pass in topological order.
// Calling backward() on a scalar node walks the tape in reverse and
// accumulates adjoints into each parent. The graph is discarded with the tape;
// the trainer builds a fresh tape for every optimisation step.

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adbcr/tensor.hpp"

namespace adbcr::ad {

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  double scalar() const;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Input without gradient.
  Var constant(Tensor value);
  // Differentiable leaf (parameters, or inputs under a gradient check).
  Var leaf(Tensor value, bool requires_grad = true);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Adjoint of `v` after backward(); zeros when `v` was not reached.
  Tensor grad(Var v) const;

  // Seeds d(root)/d(root) = 1 and propagates. `root` must be 1 x 1.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

  // Lightweight instrumentation: objectives label the tapes they touch so
  // callers can assert which terms entered a gradient path.
  void mark(std::string label);
  bool has_mark(const std::string& label) const;
  const std::vector<std::string>& marks() const { return marks_; }

  // Used by operations to append a node. `backward` receives the node's
  // adjoint and must accumulate into parents via accumulate().
  using BackwardFn = std::function<void(Tape&, const Tensor& grad)>;
  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

  // Adds `delta` into the adjoint of node `id`, if that node needs one.
  void accumulate(std::size_t id, const Tensor& delta);
  // Adjoint storage for in-place accumulation; allocated on first use.
  Tensor& grad_slot(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::string> marks_;
};

Var matmul(Var a, Var b);
// Adds a 1 x m row vector to every row of an n x m tensor.
Var add_row(Var a, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);
Var elu(Var a);

// Inverted dropout. Identity when `training` is false or p == 0.
Var dropout(Var a, double p, bool training, std::mt19937_64& rng);

// Mean squared difference; gradients flow into both operands.
Var mse_loss(Var pred, Var target);
// Mean absolute difference; the subgradient at exact ties is 0.
Var l1_mean(Var a, Var b);

Var gather_rows(Var a, std::vector<std::size_t> rows);

// Mean categorical cross-entropy of row-wise softmax(logits) against integer
// labels in [0, logits.cols()).
Var softmax_cross_entropy(Var logits, std::vector<int> labels);

// Elementwise ELU on a plain tensor, shared with the tape implementation.
Tensor elu_values(const Tensor& x);

}  // namespace adbcr::ad
