// SPDX-License-Identifier: Apache-2.0
#include "rotunroll/filterbank.hpp"

#include <cmath>
#include <cstring>

namespace rotunroll {

Tensor expand_basis(const Tensor& basis, const CyclicGroup& group) {
  if (basis.rank() != 4) throw DimensionError("basis must be [m,Cin,h,w]");
  if (basis.dim(2) != group.grid_h() || basis.dim(3) != group.grid_w())
    throw DimensionError("basis grid does not match group grid");
  const std::size_t m = basis.dim(0);
  const std::size_t k = static_cast<std::size_t>(group.order());
  const std::size_t fsz = basis.dim(1) * basis.dim(2) * basis.dim(3);
  Tensor out({m * k, basis.dim(1), basis.dim(2), basis.dim(3)});
  for (std::size_t i = 0; i < m; ++i) {
    const Tensor fi({basis.dim(1), basis.dim(2), basis.dim(3)},
                    {basis.data() + i * fsz, basis.data() + (i + 1) * fsz});
    for (std::size_t j = 0; j < k; ++j) {
      const Tensor rot = group.element(static_cast<int>(j)).apply(fi);
      std::memcpy(out.data() + (i * k + j) * fsz, rot.data(), fsz * sizeof(double));
    }
  }
  return out;
}

Tensor accumulate_basis_gradient(const Tensor& grad_expanded, const CyclicGroup& group,
                                 std::size_t num_basis) {
  const std::size_t k = static_cast<std::size_t>(group.order());
  if (grad_expanded.rank() != 4 || grad_expanded.dim(0) != num_basis * k)
    throw DimensionError("expanded gradient shape does not match bank layout");
  const std::size_t fsz =
      grad_expanded.dim(1) * grad_expanded.dim(2) * grad_expanded.dim(3);
  Tensor out({num_basis, grad_expanded.dim(1), grad_expanded.dim(2), grad_expanded.dim(3)});
  for (std::size_t i = 0; i < num_basis; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const Tensor gj({grad_expanded.dim(1), grad_expanded.dim(2), grad_expanded.dim(3)},
                      {grad_expanded.data() + (i * k + j) * fsz,
                       grad_expanded.data() + (i * k + j + 1) * fsz});
      const Tensor back = group.element(static_cast<int>(j)).apply_adjoint(gj);
      double* dst = out.data() + i * fsz;
      for (std::size_t t = 0; t < fsz; ++t) dst[t] += back[t];
    }
  }
  return out;
}

FilterBank::FilterBank(Tensor basis, CyclicGroup group)
    : basis_(std::move(basis)), group_(std::move(group)) {
  if (basis_.rank() != 4) throw DimensionError("filter bank basis must be [m,Cin,h,w]");
  if (basis_.dim(2) != group_.grid_h() || basis_.dim(3) != group_.grid_w())
    throw DimensionError("filter bank grid does not match group grid");
  expand();
}

FilterBank FilterBank::init_random(std::size_t m, std::size_t cin, std::size_t h,
                                   std::size_t w, int group_order, std::mt19937_64& rng) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(cin * h * w));
  Tensor basis = Tensor::randn({m, cin, h, w}, rng, stddev);
  return FilterBank(std::move(basis), CyclicGroup::make(group_order, h, w));
}

const Tensor& FilterBank::expand() {
  expanded_ = expand_basis(basis_, group_);
  cache_valid_ = true;
  return expanded_;
}

const Tensor& FilterBank::expanded() const {
  if (!cache_valid_) throw UsageError("filter bank dictionary is stale; call expand()");
  return expanded_;
}

Tensor FilterBank::accumulate_basis_gradient(const Tensor& grad_expanded) const {
  if (grad_expanded.rank() != 4 || grad_expanded.dim(1) != basis_.dim(1) ||
      grad_expanded.dim(2) != basis_.dim(2) || grad_expanded.dim(3) != basis_.dim(3))
    throw DimensionError("expanded gradient shape does not match bank layout");
  return rotunroll::accumulate_basis_gradient(grad_expanded, group_, basis_.dim(0));
}

std::size_t FilterBank::count_trainable() const { return basis_.size(); }

Tensor expand(FilterBank& bank) { return bank.expand(); }

Tensor accumulate_basis_gradient(const FilterBank& bank, const Tensor& grad_expanded) {
  return bank.accumulate_basis_gradient(grad_expanded);
}

}  // namespace rotunroll
