// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rotunroll/rotation.hpp"
#include "rotunroll/tensor.hpp"

namespace rotunroll {

// m learnable basis filters plus their k-1 cyclic rotations. The expanded
// dictionary is a cache in basis-major layout: filter i's orbit occupies
// slots i*k ... i*k+k-1. Callers must re-expand after every basis update.
class FilterBank {
 public:
  FilterBank() = default;
  // basis is [m, Cin, h, w]; the group grid must match (h, w).
  FilterBank(Tensor basis, CyclicGroup group);

  // Gaussian init with stddev 1/sqrt(Cin*h*w).
  static FilterBank init_random(std::size_t m, std::size_t cin, std::size_t h, std::size_t w,
                                int group_order, std::mt19937_64& rng);

  std::size_t num_basis() const { return basis_.dim(0); }
  int group_order() const { return group_.order(); }
  std::size_t cin() const { return basis_.dim(1); }
  std::size_t filter_h() const { return basis_.dim(2); }
  std::size_t filter_w() const { return basis_.dim(3); }

  const Tensor& basis() const { return basis_; }
  // Invalidates the expanded cache; call expand() after the update.
  Tensor& mutable_basis() {
    cache_valid_ = false;
    return basis_;
  }
  const CyclicGroup& group() const { return group_; }

  // Materialized dictionary [m*k, Cin, h, w]; recomputes the cache.
  const Tensor& expand();
  // Cached dictionary; throws if the cache is stale or never built.
  const Tensor& expanded() const;

  // Routes a gradient on the expanded dictionary back to the basis:
  // d/d basis[i] = sum_j adjoint(element(j), grad[i*k+j]).
  Tensor accumulate_basis_gradient(const Tensor& grad_expanded) const;

  // Learnable scalar count: m * Cin * h * w.
  std::size_t count_trainable() const;

 private:
  Tensor basis_;
  CyclicGroup group_;
  Tensor expanded_;
  bool cache_valid_ = false;
};

// Group-level forms used by both FilterBank and the gradient tape.
Tensor expand_basis(const Tensor& basis, const CyclicGroup& group);
Tensor accumulate_basis_gradient(const Tensor& grad_expanded, const CyclicGroup& group,
                                 std::size_t num_basis);

// Standalone forms mirroring the member functions.
Tensor expand(FilterBank& bank);
Tensor accumulate_basis_gradient(const FilterBank& bank, const Tensor& grad_expanded);

}  // namespace rotunroll
