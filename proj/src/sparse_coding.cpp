// SPDX-License-Identifier: Apache-2.0
#include "rotunroll/sparse_coding.hpp"

#include <cmath>

namespace rotunroll {

std::vector<std::size_t> ConvDictionary::code_shape(
    const std::vector<std::size_t>& signal_shape) const {
  if (signal_shape.size() != 3) throw DimensionError("signal shape must be [C,H,W]");
  if (padding_ == Padding::Same)
    return {filters_.dim(0), signal_shape[1], signal_shape[2]};
  return {filters_.dim(0), signal_shape[1] - filters_.dim(2) + 1,
          signal_shape[2] - filters_.dim(3) + 1};
}

Tensor DenseDictionary::synthesize(const Tensor& code) const {
  if (code.rank() != 1 || code.dim(0) != w_.dim(1))
    throw DimensionError("dense synthesize: code length must equal atom count");
  const Tensor z({code.dim(0), 1}, {code.data(), code.data() + code.size()});
  Tensor out = matmul(w_, z);
  return Tensor({w_.dim(0)}, {out.data(), out.data() + out.size()});
}

Tensor DenseDictionary::analyze(const Tensor& signal) const {
  if (signal.rank() != 1 || signal.dim(0) != w_.dim(0))
    throw DimensionError("dense analyze: signal length must equal dictionary dim");
  Tensor out({w_.dim(1)});
  for (std::size_t a = 0; a < w_.dim(1); ++a) {
    double s = 0.0;
    for (std::size_t d = 0; d < w_.dim(0); ++d) s += w_[d * w_.dim(1) + a] * signal[d];
    out[a] = s;
  }
  return out;
}

ConvDictionary dict_from_bank(const FilterBank& bank, Padding padding) {
  return ConvDictionary(bank.expanded(), padding);
}

Tensor soft_threshold(const Tensor& u, double lambda) {
  if (lambda < 0.0) throw UsageError("soft_threshold: lambda must be nonnegative");
  Tensor out(u.shape());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = std::fabs(u[i]) - lambda;
    out[i] = a > 0.0 ? (u[i] > 0.0 ? a : -a) : 0.0;
  }
  return out;
}

Tensor ista_step(const Tensor& z, const Tensor& x, const Dictionary& dict,
                 const SolverConfig& cfg) {
  const Tensor residual = sub(x, dict.synthesize(z));
  const Tensor grad = dict.analyze(residual);
  return soft_threshold(axpby(1.0, z, cfg.alpha, grad), cfg.lambda);
}

Tensor residual_form_step(const Tensor& z, const Tensor& x, const Dictionary& dict,
                          const SolverConfig& cfg) {
  // W_z z = z - alpha W^T W z; W_x x = alpha W^T x
  const Tensor wz = axpby(1.0, z, -cfg.alpha, dict.analyze(dict.synthesize(z)));
  const Tensor wx = scale(dict.analyze(x), cfg.alpha);
  return soft_threshold(add(wz, wx), cfg.lambda);
}

std::vector<Tensor> fista_unroll(const Tensor& x, const Dictionary& dict,
                                 const SolverConfig& cfg) {
  if (cfg.num_layers < 1) throw UsageError("fista_unroll: num_layers must be >= 1");
  std::vector<Tensor> codes;
  codes.reserve(static_cast<std::size_t>(cfg.num_layers));
  Tensor z = Tensor::zeros(dict.code_shape(x.shape()));
  Tensor z_prev = z;
  double t = 1.0;
  for (int l = 0; l < cfg.num_layers; ++l) {
    Tensor y;
    if (cfg.acceleration == SolverConfig::Accel::Fista) {
      const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
      const double c = (t - 1.0) / t_next;
      y = axpby(1.0 + c, z, -c, z_prev);
      t = t_next;
    } else {
      y = z;
    }
    Tensor z_next = ista_step(y, x, dict, cfg);
    z_prev = std::move(z);
    z = std::move(z_next);
    codes.push_back(z);
  }
  return codes;
}

double lasso_objective(const Tensor& z, const Tensor& x, const Dictionary& dict,
                       double lambda) {
  const Tensor residual = sub(x, dict.synthesize(z));
  return 0.5 * inner(residual, residual) + lambda * l1_norm(z);
}

}  // namespace rotunroll
