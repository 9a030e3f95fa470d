// SPDX-License-Identifier: Apache-2.0
#include "rotunroll/network.hpp"

#include <cmath>
#include <string>

namespace rotunroll {

BatchNormState BatchNormState::init(std::size_t channels) {
  BatchNormState s;
  // Gamma starts below 1 so the normalized code re-entering the next
  // soft-threshold stays mostly under lambda: with unit-variance input the
  // exactly-zero fraction is roughly P(|u| < lambda/gamma), and gamma = 1
  // lets it decay well beneath one half over training. Gamma remains
  // learnable; only the starting point changes.
  s.gamma = Tensor::full({channels}, 0.35);
  s.beta = Tensor::zeros({channels});
  s.running_mean = Tensor::zeros({channels});
  s.running_var = Tensor::full({channels}, 1.0);
  return s;
}

UnrolledNetwork::UnrolledNetwork(NetworkConfig cfg, std::mt19937_64& rng)
    : cfg_(std::move(cfg)) {
  const int L = cfg_.solver.num_layers;
  if (L < 0) throw UsageError("num_layers must be >= 0");
  if (L == 0) return;  // degenerate empty net; countable but not runnable
  const std::size_t n_banks = cfg_.tied ? 1 : static_cast<std::size_t>(L);
  banks_.reserve(n_banks);
  for (std::size_t i = 0; i < n_banks; ++i)
    banks_.push_back(FilterBank::init_random(cfg_.m, cfg_.cin, cfg_.filter_h,
                                             cfg_.filter_w, cfg_.k, rng));
  for (int l = 0; l + 1 < L; ++l) bn_.push_back(BatchNormState::init(code_channels()));
  head_.weight = Tensor::zeros({cfg_.classes, code_channels()});
  head_.bias = Tensor::zeros({cfg_.classes});
}

UnrolledNetwork::UnrolledNetwork(NetworkConfig cfg, std::vector<FilterBank> banks,
                                 std::vector<BatchNormState> bn, ClassifierHead head)
    : cfg_(std::move(cfg)),
      banks_(std::move(banks)),
      bn_(std::move(bn)),
      head_(std::move(head)) {
  const int L = cfg_.solver.num_layers;
  const std::size_t expected_banks = cfg_.tied ? 1 : static_cast<std::size_t>(L);
  if (L > 0 && (banks_.size() != expected_banks ||
                bn_.size() != static_cast<std::size_t>(L - 1)))
    throw DimensionError("bank/batch-norm counts do not match layer count");
}

struct UnrolledNetwork::TapeNet {
  Var logits;
  std::vector<Var> codes;
  std::vector<Var> basis;
  std::vector<Var> gamma, beta;
  Var head_w, head_b;
};

UnrolledNetwork::TapeNet UnrolledNetwork::record_forward(GradTape& tape,
                                                         const Tensor& batch,
                                                         bool training) {
  if (banks_.empty()) throw UsageError("network has no layers");
  if (batch.rank() != 4 || batch.dim(1) != cfg_.cin || batch.dim(2) != cfg_.image_h ||
      batch.dim(3) != cfg_.image_w)
    throw DimensionError("batch must be [B," + std::to_string(cfg_.cin) + "," +
                         std::to_string(cfg_.image_h) + "," + std::to_string(cfg_.image_w) +
                         "]");
  const int L = cfg_.solver.num_layers;
  const Padding pad = padding();
  const std::size_t B = batch.dim(0);
  const std::size_t code_h =
      pad == Padding::Same ? cfg_.image_h : cfg_.image_h - cfg_.filter_h + 1;
  const std::size_t code_w =
      pad == Padding::Same ? cfg_.image_w : cfg_.image_w - cfg_.filter_w + 1;

  TapeNet net;
  Var x = tape.leaf(batch);
  if (cfg_.input_gain != 1.0) x = tape.scale(x, cfg_.input_gain);

  for (auto& b : banks_) net.basis.push_back(tape.leaf(b.basis()));
  std::vector<Var> dicts;
  for (std::size_t i = 0; i < banks_.size(); ++i)
    dicts.push_back(tape.expand_bank(net.basis[i], banks_[i].group()));
  for (auto& s : bn_) {
    net.gamma.push_back(tape.leaf(s.gamma));
    net.beta.push_back(tape.leaf(s.beta));
  }

  Var z = tape.leaf(Tensor::zeros({B, code_channels(), code_h, code_w}));
  Var z_prev = z;
  double t = 1.0;
  const bool fista = cfg_.solver.acceleration == SolverConfig::Accel::Fista;
  for (int l = 0; l < L; ++l) {
    const Var w = dicts[cfg_.tied ? 0 : static_cast<std::size_t>(l)];
    Var y = z;
    if (fista) {
      const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
      const double c = (t - 1.0) / t_next;
      if (c != 0.0) y = tape.axpby(1.0 + c, z, -c, z_prev);
      t = t_next;
    }
    const Var synth = tape.conv_transpose(y, w, pad);
    const Var residual = tape.sub(x, synth);
    const Var analyzed = tape.correlate(residual, w, pad);
    const Var pre = tape.axpby(1.0, y, cfg_.solver.alpha, analyzed);
    const Var z_new = tape.soft_threshold(pre, cfg_.solver.lambda);
    z_prev = z;
    z = z_new;
    net.codes.push_back(z);
    if (l + 1 < L) {
      BatchNormState& s = bn_[static_cast<std::size_t>(l)];
      if (!training && s.batches_seen == 0)
        throw UsageError("eval-mode forward before any training batch: batch-norm "
                         "statistics are uninitialized");
      Var normed =
          tape.batch_norm(z, net.gamma[static_cast<std::size_t>(l)],
                          net.beta[static_cast<std::size_t>(l)], training,
                          &s.running_mean, &s.running_var, {s.eps, s.momentum});
      if (training) ++s.batches_seen;
      if (cfg_.bn_in_recurrence) {
        z = normed;
      } else {
        // tap-off variant: the recurrence keeps the raw iterate and the
        // normalized value is recorded as the layer output only
        net.codes.back() = normed;
      }
    }
  }
  net.head_w = tape.leaf(head_.weight);
  net.head_b = tape.leaf(head_.bias);
  const Var feats = tape.global_avg_pool(z);
  net.logits = tape.linear(feats, net.head_w, net.head_b);
  return net;
}

ForwardResult UnrolledNetwork::forward(const Tensor& batch, bool training) {
  GradTape tape;
  TapeNet net = record_forward(tape, batch, training);
  ForwardResult out;
  out.logits = tape.value(net.logits);
  out.codes.reserve(net.codes.size());
  for (Var c : net.codes) out.codes.push_back(tape.value(c));
  return out;
}

LossGrads UnrolledNetwork::loss_and_grads(const Tensor& batch,
                                          const std::vector<int>& labels) {
  GradTape tape;
  TapeNet net = record_forward(tape, batch, true);
  const Var loss = tape.cross_entropy_mean(net.logits, labels);
  const double loss_value = tape.value(loss)[0];
  Tensor logits = tape.value(net.logits);
  tape.backward(loss);

  LossGrads out;
  out.loss = loss_value;
  out.logits = std::move(logits);
  for (Var b : net.basis) out.grads.basis.push_back(tape.grad(b));
  for (std::size_t i = 0; i < net.gamma.size(); ++i) {
    out.grads.bn_gamma.push_back(tape.grad(net.gamma[i]));
    out.grads.bn_beta.push_back(tape.grad(net.beta[i]));
  }
  out.grads.head_weight = tape.grad(net.head_w);
  out.grads.head_bias = tape.grad(net.head_b);
  return out;
}

ParamCounts UnrolledNetwork::count_parameters() const {
  ParamCounts c;
  for (const auto& b : banks_) c.filters += b.count_trainable();
  for (const auto& s : bn_) c.batchnorm += s.gamma.size() + s.beta.size();
  c.head = head_.weight.size() + head_.bias.size();
  c.total = c.filters + c.batchnorm + c.head;
  return c;
}

double check_r90_equivariance(const FilterBank& bank, const Tensor& x,
                              const SolverConfig& cfg) {
  if (bank.group_order() != 4)
    throw UsageError("check_r90_equivariance requires a k=4 quarter-turn bank");
  if (x.rank() != 3 || x.dim(1) != x.dim(2))
    throw DimensionError("check_r90_equivariance expects a square [C,H,W] input");
  const ConvDictionary dict(bank.expanded(), Padding::Same);
  auto code_of = [&](const Tensor& img) {
    return soft_threshold(scale(dict.analyze(img), cfg.alpha), cfg.lambda);
  };
  const RotationOperator rot = RotationOperator::make(90.0, x.dim(1), x.dim(2));
  const Tensor z = code_of(x);
  const Tensor z_rot = code_of(rot.apply(x));

  // expected: channel i*k+j of z_rot equals rot90 of channel i*k+(j-1 mod k)
  const std::size_t k = 4, m = bank.num_basis();
  const std::size_t hw = z.dim(1) * z.dim(2);
  double dev = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t src = i * k + (j + k - 1) % k;
      const Tensor plane({z.dim(1), z.dim(2)},
                         {z.data() + src * hw, z.data() + (src + 1) * hw});
      const Tensor expected = rot.apply(plane);
      const double* got = z_rot.data() + (i * k + j) * hw;
      for (std::size_t tix = 0; tix < hw; ++tix)
        dev = std::max(dev, std::fabs(expected[tix] - got[tix]));
    }
  }
  return dev;
}

}  // namespace rotunroll
