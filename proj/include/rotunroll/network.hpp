// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "rotunroll/sparse_coding.hpp"
#include "rotunroll/tape.hpp"

namespace rotunroll {

// Per-layer batch normalization parameters and running statistics.
struct BatchNormState {
  Tensor gamma;         // [C], learnable
  Tensor beta;          // [C], learnable
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
  double eps = 1e-5;
  double momentum = 0.1;
  long long batches_seen = 0;

  static BatchNormState init(std::size_t channels);
};

// Global-average-pooled final code -> one linear layer of logits.
struct ClassifierHead {
  Tensor weight;  // [classes, feature_dim]
  Tensor bias;    // [classes]
};

enum class NetMode { Convolutional, Dense };

struct NetworkConfig {
  NetMode mode = NetMode::Convolutional;
  std::size_t m = 15;          // learnable basis filters per layer
  int k = 4;                   // cyclic group order (1 = unconstrained baseline)
  std::size_t cin = 1;
  std::size_t filter_h = 7;
  std::size_t filter_w = 7;
  std::size_t image_h = 28;
  std::size_t image_w = 28;
  std::size_t classes = 10;
  SolverConfig solver;
  bool tied = false;           // tied: one bank shared across all layers
  bool bn_in_recurrence = true;  // normalized code feeds the next FISTA step
  // Multiplies the input before unrolling. The fixed lambda = 0.5 /
  // alpha = 0.01 pair only produces nonzero codes when alpha * W^T x can
  // exceed the threshold; with [0,1] pixels this gain keeps the first
  // layer alive without flooding every code entry past lambda.
  double input_gain = 1.0;
};

struct ForwardResult {
  Tensor logits;              // [B, classes]
  std::vector<Tensor> codes;  // L per-layer codes (post-threshold, pre-BN)
};

struct Gradients {
  std::vector<Tensor> basis;     // one per bank
  std::vector<Tensor> bn_gamma;  // one per BN layer
  std::vector<Tensor> bn_beta;
  Tensor head_weight;
  Tensor head_bias;
};

struct LossGrads {
  double loss = 0.0;
  Tensor logits;  // pre-update logits for the batch
  Gradients grads;
};

struct ParamCounts {
  std::size_t filters = 0;
  std::size_t batchnorm = 0;
  std::size_t head = 0;
  std::size_t total = 0;
};

// L unrolled FISTA layers with (optionally group-tied) per-layer banks,
// batch norm after every layer output except the last, and a linear head
// on per-channel global average pooling.
class UnrolledNetwork {
 public:
  UnrolledNetwork() = default;
  UnrolledNetwork(NetworkConfig cfg, std::mt19937_64& rng);
  // Rebuild from deserialized parts.
  UnrolledNetwork(NetworkConfig cfg, std::vector<FilterBank> banks,
                  std::vector<BatchNormState> bn, ClassifierHead head);

  const NetworkConfig& config() const { return cfg_; }
  std::size_t num_banks() const { return banks_.size(); }
  FilterBank& bank(std::size_t i) { return banks_.at(i); }
  const FilterBank& bank(std::size_t i) const { return banks_.at(i); }
  // Bank used by layer l (identical index unless tied).
  const FilterBank& layer_bank(int l) const { return banks_.at(cfg_.tied ? 0 : l); }
  BatchNormState& bn(std::size_t i) { return bn_.at(i); }
  const BatchNormState& bn(std::size_t i) const { return bn_.at(i); }
  std::size_t num_bn() const { return bn_.size(); }
  ClassifierHead& head() { return head_; }
  const ClassifierHead& head() const { return head_; }
  std::size_t code_channels() const { return cfg_.m * static_cast<std::size_t>(cfg_.k); }
  Padding padding() const {
    return cfg_.mode == NetMode::Convolutional ? Padding::Same : Padding::Valid;
  }

  // batch is [B,C,H,W]. Training mode updates BN running statistics.
  // Eval mode before any training batch throws (uninitialized statistics).
  ForwardResult forward(const Tensor& batch, bool training);

  // Mean cross-entropy over the batch plus gradients for every learnable
  // parameter, backpropagated through thresholds, batch norm, FISTA
  // momentum, and the expanded banks into the basis filters.
  LossGrads loss_and_grads(const Tensor& batch, const std::vector<int>& labels);

  ParamCounts count_parameters() const;

 private:
  struct TapeNet;  // recorded forward pass
  TapeNet record_forward(GradTape& tape, const Tensor& batch, bool training);

  NetworkConfig cfg_;
  std::vector<FilterBank> banks_;  // L banks, or 1 when tied
  std::vector<BatchNormState> bn_;  // L-1 states
  ClassifierHead head_;
};

// Single-layer R90 equivariance check: codes of rot90(x) must equal the
// spatial rot90 of codes of x with channels cyclically shifted by one
// inside each k-block. Returns the maximum absolute deviation.
double check_r90_equivariance(const FilterBank& bank, const Tensor& x,
                              const SolverConfig& cfg);

}  // namespace rotunroll
