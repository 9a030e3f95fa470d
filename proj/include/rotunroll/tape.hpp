// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "rotunroll/filterbank.hpp"
#include "rotunroll/tensor.hpp"

namespace rotunroll {

// Handle to a value recorded on a GradTape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

struct BatchNormParams {
  double eps = 1e-5;
  double momentum = 0.1;
};

// Reverse-mode tape over the closed primitive set the network needs.
// One tape per forward/backward pass; backward() may run exactly once.
// Non-leaf values are released as the backward sweep passes them, so peak
// memory stays bounded by a single layer's working set.
class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  Var leaf(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  // Gradient of the loss w.r.t. v; valid after backward(). Zero for leaves
  // the loss never reached.
  const Tensor& grad(Var v) const;

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  // a*x + b*y elementwise.
  Var axpby(double a, Var x, double b, Var y);
  Var correlate(Var input, Var filters, Padding padding);
  Var conv_transpose(Var codes, Var filters, Padding padding);
  Var matmul(Var a, Var b);
  Var soft_threshold(Var u, double lambda);
  // Orbit expansion of a [m,Cin,h,w] basis; backward accumulates rotated
  // copies' gradients onto the basis via the rotation adjoints.
  Var expand_bank(Var basis, const CyclicGroup& group);
  // Per-channel batch norm over (batch, spatial) for [B,C,H,W] input.
  // Training mode uses batch statistics and pushes updated running stats
  // into *running_mean / *running_var as a side effect; eval mode reads
  // them and is deterministic.
  Var batch_norm(Var x, Var gamma, Var beta, bool training, Tensor* running_mean,
                 Tensor* running_var, const BatchNormParams& p);
  // [B,C,H,W] -> [B,C]
  Var global_avg_pool(Var x);
  // x [B,F] * weight^T [F,C] + bias -> [B,C]
  Var linear(Var x, Var weight, Var bias);
  // Mean cross-entropy of logits [B,C] against integer labels.
  Var cross_entropy_mean(Var logits, const std::vector<int>& labels);
  Var sum_all(Var x);
  Var inner_product(Var a, Var b);

  // Seeds d(loss)=1 and replays adjoints in reverse order. loss must be a
  // scalar recorded on this tape.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool grad_set = false;
    bool leaf = false;
    std::function<void()> back;  // empty for leaves
  };

  Var push(Tensor value, std::function<void()> back, bool leaf = false);
  Tensor& grad_buf(std::size_t id);
  void accumulate(std::size_t id, const Tensor& g);
  void accumulate(std::size_t id, Tensor&& g);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace rotunroll
