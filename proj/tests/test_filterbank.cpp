// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "rotunroll/filterbank.hpp"
#include "support/oracles.hpp"

using namespace rotunroll;
namespace ts = rotunroll::testsupport;

TEST_CASE("k=1 expansion is the basis itself") {
  std::mt19937_64 rng(1);
  FilterBank bank = FilterBank::init_random(3, 2, 5, 5, 1, rng);
  CHECK(max_abs_diff(bank.expand(), bank.basis()) == 0.0);
}

TEST_CASE("m=1 k=4 expansion is the base filter and its quarter turns") {
  const Tensor basis({1, 1, 2, 2}, {1, 2, 3, 4});
  FilterBank bank(basis, CyclicGroup::make(4, 2, 2));
  const Tensor& e = bank.expand();
  REQUIRE(e.shape() == std::vector<std::size_t>{4, 1, 2, 2});
  // slot 0: the base
  CHECK(e[0] == 1);
  CHECK(e[1] == 2);
  CHECK(e[2] == 3);
  CHECK(e[3] == 4);
  // slot 1: one counter-clockwise quarter turn of [[1,2],[3,4]] = [[2,4],[1,3]]
  CHECK(e[4] == 2);
  CHECK(e[5] == 4);
  CHECK(e[6] == 1);
  CHECK(e[7] == 3);
  // slots are exact rotations of the basis
  const CyclicGroup& g = bank.group();
  for (int j = 0; j < 4; ++j) {
    const Tensor want = g.element(j).apply(Tensor({2, 2}, {1, 2, 3, 4}));
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(e[static_cast<std::size_t>(j) * 4 + i] == want[i]);
  }
}

TEST_CASE("m=10 k=6 on 8x8 materializes 60 filters") {
  std::mt19937_64 rng(2);
  FilterBank bank = FilterBank::init_random(10, 3, 8, 8, 6, rng);
  CHECK(bank.expand().dim(0) == 60);
}

TEST_CASE("gradient accumulation basics") {
  std::mt19937_64 rng(3);
  FilterBank bank = FilterBank::init_random(2, 1, 3, 3, 4, rng);
  bank.expand();

  const Tensor zero({8, 1, 3, 3});
  CHECK(max_abs(bank.accumulate_basis_gradient(zero)) == 0.0);

  FilterBank flat = FilterBank::init_random(2, 1, 3, 3, 1, rng);
  flat.expand();
  const Tensor g = Tensor::randn({2, 1, 3, 3}, rng);
  CHECK(max_abs_diff(flat.accumulate_basis_gradient(g), g) == 0.0);

  CHECK_THROWS_AS(bank.accumulate_basis_gradient(Tensor({3, 1, 3, 3})), DimensionError);
}

TEST_CASE("accumulated gradient matches finite differences of a scalar loss") {
  std::mt19937_64 rng(4);
  FilterBank bank = FilterBank::init_random(1, 1, 3, 3, 4, rng);
  const Tensor target = Tensor::randn({4, 1, 3, 3}, rng);

  // loss(basis) = <expand(basis), target>, so dLoss/dW_expanded = target
  const auto loss = [&](const Tensor& basis) {
    return inner(expand_basis(basis, bank.group()), target);
  };
  bank.expand();
  const Tensor grad = bank.accumulate_basis_gradient(target);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double fd = ts::central_difference(loss, bank.basis(), i, 1e-6);
    CHECK(std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd)) <= 1e-6);
  }
}

TEST_CASE("trainable parameter counts follow the tying ratio") {
  std::mt19937_64 rng(5);
  FilterBank baseline = FilterBank::init_random(60, 3, 8, 8, 1, rng);
  FilterBank quarter = FilterBank::init_random(15, 3, 8, 8, 4, rng);
  FilterBank sixth = FilterBank::init_random(10, 3, 8, 8, 6, rng);
  CHECK(baseline.count_trainable() == 11520);
  CHECK(quarter.count_trainable() == 2880);
  CHECK(sixth.count_trainable() == 1920);
  CHECK(baseline.count_trainable() == 4 * quarter.count_trainable());
  CHECK(baseline.count_trainable() == 6 * sixth.count_trainable());
}

TEST_CASE("orbit consistency holds bit-exactly after updates") {
  std::mt19937_64 rng(6);
  FilterBank bank = FilterBank::init_random(2, 1, 5, 5, 4, rng);
  for (int step = 0; step < 3; ++step) {
    Tensor& basis = bank.mutable_basis();
    for (std::size_t i = 0; i < basis.size(); ++i) basis[i] += 0.01 * (step + 1);
    const Tensor& e = bank.expand();
    for (std::size_t i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j) {
        Tensor b({1, 5, 5});
        for (std::size_t t = 0; t < 25; ++t) b[t] = basis[i * 25 + t];
        const Tensor want = bank.group().element(j).apply(b);
        for (std::size_t t = 0; t < 25; ++t)
          CHECK(e[(i * 4 + static_cast<std::size_t>(j)) * 25 + t] == want[t]);
      }
  }
}

TEST_CASE("stale expanded cache is rejected") {
  std::mt19937_64 rng(7);
  FilterBank bank = FilterBank::init_random(1, 1, 3, 3, 4, rng);
  bank.expand();
  bank.mutable_basis()[0] += 1.0;
  CHECK_THROWS_AS(bank.expanded(), UsageError);
  bank.expand();
  CHECK_NOTHROW(bank.expanded());
}

TEST_CASE("quarter-turn copies are exact permutations of the basis filter") {
  std::mt19937_64 rng(8);
  FilterBank bank = FilterBank::init_random(3, 2, 6, 6, 4, rng);
  const Tensor& e = bank.expand();
  const std::size_t span = 2 * 6 * 6;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> base(span);
    for (std::size_t t = 0; t < span; ++t) base[t] = bank.basis()[i * span + t];
    std::sort(base.begin(), base.end());
    for (int j = 0; j < 4; ++j) {
      std::vector<double> copy(span);
      for (std::size_t t = 0; t < span; ++t)
        copy[t] = e[(i * 4 + static_cast<std::size_t>(j)) * span + t];
      std::sort(copy.begin(), copy.end());
      CHECK(copy == base);  // same multiset of values, bit for bit
    }
  }
}

TEST_CASE("tied gradient steps equal constrained re-projection steps") {
  // Oracle: treat every expanded copy as free, step each copy by its own
  // gradient, then project back onto the orbit constraint set by orbit
  // averaging (the least-squares projection for orthogonal rotations).
  // That equals a basis step with (1/k) of the accumulated gradient, so
  // the tied optimizer uses lr/k here to match the oracle's lr.
  std::mt19937_64 rng(9);
  const int k = 4;
  const double lr = 0.1;
  FilterBank bank = FilterBank::init_random(2, 1, 3, 3, k, rng);
  Tensor oracle_expanded = bank.expand();

  for (int step = 0; step < 2; ++step) {
    const Tensor grad_exp = Tensor::randn({2 * k, 1, 3, 3}, rng);

    // tied path
    const Tensor basis_grad = bank.accumulate_basis_gradient(grad_exp);
    Tensor& basis = bank.mutable_basis();
    for (std::size_t i = 0; i < basis.size(); ++i) basis[i] -= (lr / k) * basis_grad[i];
    bank.expand();

    // constrained oracle path
    for (std::size_t i = 0; i < oracle_expanded.size(); ++i)
      oracle_expanded[i] -= lr * grad_exp[i];
    Tensor projected_basis({2, 1, 3, 3});
    for (std::size_t i = 0; i < 2; ++i) {
      Tensor acc({1, 3, 3});
      for (int j = 0; j < k; ++j) {
        Tensor copy({1, 3, 3});
        for (std::size_t t = 0; t < 9; ++t)
          copy[t] = oracle_expanded[(i * k + static_cast<std::size_t>(j)) * 9 + t];
        add_inplace(acc, bank.group().element(j).apply_adjoint(copy));
      }
      for (std::size_t t = 0; t < 9; ++t) projected_basis[i * 9 + t] = acc[t] / k;
    }
    oracle_expanded = expand_basis(projected_basis, bank.group());

    CHECK(max_abs_diff(bank.basis(), projected_basis) <= 1e-10);
    CHECK(max_abs_diff(bank.expanded(), oracle_expanded) <= 1e-10);
  }
}
