// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "rotunroll/filterbank.hpp"
#include "rotunroll/tensor.hpp"

namespace rotunroll {

struct SolverConfig {
  double lambda = 0.5;   // threshold of S_lambda, applied as-is each step
  double alpha = 0.01;   // gradient step size
  int num_layers = 4;
  enum class Accel { Ista, Fista };
  Accel acceleration = Accel::Fista;
};

// Synthesis/analysis pair: synthesize = W z (code -> signal),
// analyze = W^T x (signal -> code). One interface serves both the
// convolutional and the dense setting.
class Dictionary {
 public:
  virtual ~Dictionary() = default;
  virtual Tensor synthesize(const Tensor& code) const = 0;
  virtual Tensor analyze(const Tensor& signal) const = 0;
  virtual std::vector<std::size_t> code_shape(const std::vector<std::size_t>& signal_shape)
      const = 0;
};

// W realized by a bank of 2-D filters; analysis is cross-correlation,
// synthesis its adjoint. Dense atoms are the special case of full-size
// filters under valid padding (1x1 codes).
class ConvDictionary : public Dictionary {
 public:
  ConvDictionary(Tensor filters, Padding padding)
      : filters_(std::move(filters)), padding_(padding) {}
  Tensor synthesize(const Tensor& code) const override {
    return conv2d_transpose(code, filters_, padding_);
  }
  Tensor analyze(const Tensor& signal) const override {
    return conv2d_correlate(signal, filters_, padding_);
  }
  std::vector<std::size_t> code_shape(
      const std::vector<std::size_t>& signal_shape) const override;
  const Tensor& filters() const { return filters_; }
  Padding padding() const { return padding_; }

 private:
  Tensor filters_;
  Padding padding_;
};

// Explicit matrix W [dim, atoms]; codes are [atoms] vectors.
class DenseDictionary : public Dictionary {
 public:
  explicit DenseDictionary(Tensor w) : w_(std::move(w)) {
    if (w_.rank() != 2) throw DimensionError("dense dictionary must be a [dim,atoms] matrix");
  }
  Tensor synthesize(const Tensor& code) const override;
  Tensor analyze(const Tensor& signal) const override;
  std::vector<std::size_t> code_shape(
      const std::vector<std::size_t>& signal_shape) const override {
    (void)signal_shape;
    return {w_.dim(1)};
  }
  const Tensor& matrix() const { return w_; }

 private:
  Tensor w_;
};

ConvDictionary dict_from_bank(const FilterBank& bank, Padding padding);

// S_lambda(u) = sign(u) * max(|u| - lambda, 0), elementwise.
Tensor soft_threshold(const Tensor& u, double lambda);

// One proximal-gradient step: S_lambda(z + alpha * W^T (x - W z)).
Tensor ista_step(const Tensor& z, const Tensor& x, const Dictionary& dict,
                 const SolverConfig& cfg);

// Residual rewrite of the same step: S_lambda((I - alpha W^T W) z + alpha W^T x).
// Algebraically identical to ista_step; kept as an independent path.
Tensor residual_form_step(const Tensor& z, const Tensor& x, const Dictionary& dict,
                          const SolverConfig& cfg);

// L unrolled steps from z = 0, with Nesterov extrapolation when
// cfg.acceleration == Fista (one momentum sequence across all layers).
// Returns every intermediate code.
std::vector<Tensor> fista_unroll(const Tensor& x, const Dictionary& dict,
                                 const SolverConfig& cfg);

// 0.5 * ||x - W z||^2 + lambda * ||z||_1. Note the iteration above has the
// fixed points of this objective with penalty cfg.lambda / cfg.alpha, since
// S_lambda is applied with lambda unscaled by the step size.
double lasso_objective(const Tensor& z, const Tensor& x, const Dictionary& dict,
                       double lambda);

}  // namespace rotunroll
