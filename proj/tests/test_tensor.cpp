// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "rotunroll/tensor.hpp"
#include "support/oracles.hpp"

using namespace rotunroll;
namespace ts = rotunroll::testsupport;

namespace {
Tensor randy(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  return Tensor::randn(std::move(shape), rng);
}
}  // namespace

TEST_CASE("tensor shape and data stay consistent") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
}

TEST_CASE("correlate: zero input gives zero output") {
  Tensor input({1, 3, 3});
  Tensor filters({1, 1, 2, 2}, {1.0, -2.0, 3.0, 4.0});
  const Tensor out = conv2d_correlate(input, filters, Padding::Valid);
  CHECK(out.shape() == std::vector<std::size_t>{1, 2, 2});
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("correlate: 1x1 everything is a scalar product") {
  Tensor input({1, 1, 1}, {5.0});
  Tensor filters({1, 1, 1, 1}, {2.0});
  const Tensor out = conv2d_correlate(input, filters, Padding::Valid);
  CHECK(out[0] == 10.0);
}

TEST_CASE("correlate matches the brute-force loop reference") {
  std::mt19937_64 rng(7);
  const Tensor input = randy({1, 6, 6}, rng);
  const Tensor filters = randy({4, 1, 3, 3}, rng);
  for (const Padding pad : {Padding::Valid, Padding::Same}) {
    const Tensor fast = conv2d_correlate(input, filters, pad);
    const Tensor slow = ts::naive_correlate(input, filters, pad);
    REQUIRE(fast.shape() == slow.shape());
    CHECK(max_abs_diff(fast, slow) <= 1e-12);
  }
}

TEST_CASE("correlate rejects channel mismatch") {
  Tensor input({2, 4, 4});
  Tensor filters({1, 3, 3, 3});
  CHECK_THROWS_AS(conv2d_correlate(input, filters, Padding::Same), DimensionError);
}

TEST_CASE("correlate is linear in the input") {
  std::mt19937_64 rng(11);
  const Tensor x = randy({2, 5, 5}, rng);
  const Tensor y = randy({2, 5, 5}, rng);
  const Tensor f = randy({3, 2, 3, 3}, rng);
  const double a = 0.37, b = -1.91;
  const Tensor lhs = conv2d_correlate(axpby(a, x, b, y), f, Padding::Same);
  const Tensor rhs = axpby(a, conv2d_correlate(x, f, Padding::Same), b,
                           conv2d_correlate(y, f, Padding::Same));
  CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
}

TEST_CASE("transpose: zero codes give zero output") {
  Tensor codes({2, 3, 3});
  Tensor filters({2, 1, 3, 3}, std::vector<double>(18, 1.5));
  const Tensor out = conv2d_transpose(codes, filters, Padding::Same);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("transpose of a single-tap correlation places the scaled filter") {
  // valid-padding 1x1 code: the filter covers the whole input
  Tensor codes({1, 1, 1}, {3.0});
  Tensor filters({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor out = conv2d_transpose(codes, filters, Padding::Valid);
  REQUIRE(out.shape() == std::vector<std::size_t>{1, 2, 3});
  for (std::size_t i = 0; i < 6; ++i) CHECK(out[i] == doctest::Approx(3.0 * (i + 1)));
}

TEST_CASE("correlate/transpose adjoint identity") {
  std::mt19937_64 rng(3);
  for (const Padding pad : {Padding::Valid, Padding::Same}) {
    const Tensor x = randy({2, 7, 6}, rng);
    const Tensor f = randy({3, 2, 3, 4}, rng);
    const Tensor cx = conv2d_correlate(x, f, pad);
    const Tensor z = randy(cx.shape(), rng);
    const double lhs = inner(cx, z);
    const double rhs = inner(x, conv2d_transpose(z, f, pad));
    CHECK(std::abs(lhs - rhs) <= 1e-10);
  }
}

TEST_CASE("matmul basics and loop oracle") {
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  std::mt19937_64 rng(5);
  const Tensor a = randy({3, 3}, rng);
  CHECK(max_abs_diff(matmul(eye, a), a) == 0.0);

  const Tensor zero({3, 2});
  const Tensor az = matmul(a, zero);
  for (std::size_t i = 0; i < az.size(); ++i) CHECK(az[i] == 0.0);

  const Tensor m = randy({3, 4}, rng);
  const Tensor n = randy({4, 2}, rng);
  const Tensor fast = matmul(m, n);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) acc += m[i * 4 + k] * n[k * 2 + j];
      CHECK(std::abs(fast[i * 2 + j] - acc) <= 1e-12);
    }

  CHECK_THROWS_AS(matmul(m, Tensor({3, 2})), DimensionError);
}

TEST_CASE("power iteration: identity, diagonal, dense oracle, zero operator") {
  const auto ident = [](const Tensor& v) { return v; };
  const SigmaMaxResult id_res = power_iteration_sigma_max(ident, ident, {5}, 50, 1);
  CHECK(id_res.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(id_res.zero_operator);

  const Tensor d({3, 3}, {1, 0, 0, 0, 2, 0, 0, 0, 3});
  const auto diag = [&](const Tensor& v) { return matmul(d, Tensor({3, 1}, {v[0], v[1], v[2]})); };
  const auto diag_vec = [&](const Tensor& v) {
    const Tensor r = diag(v);
    return Tensor({3}, {r[0], r[1], r[2]});
  };
  const SigmaMaxResult d_res = power_iteration_sigma_max(diag_vec, diag_vec, {3}, 100, 2);
  CHECK(d_res.value == doctest::Approx(9.0).epsilon(1e-6));

  std::mt19937_64 rng(9);
  const Tensor w = randy({8, 8}, rng);
  const auto apply = [&](const Tensor& v) {
    Tensor col({8, 1});
    for (int i = 0; i < 8; ++i) col[i] = v[i];
    const Tensor r = matmul(w, col);
    Tensor out({8});
    for (int i = 0; i < 8; ++i) out[i] = r[i];
    return out;
  };
  const auto apply_t = [&](const Tensor& v) {
    Tensor out({8});
    for (int j = 0; j < 8; ++j) {
      double acc = 0.0;
      for (int i = 0; i < 8; ++i) acc += w[i * 8 + j] * v[i];
      out[j] = acc;
    }
    return out;
  };
  // sigma_max(W^T W) is the top eigenvalue of W^T W, via the Jacobi oracle
  Tensor wtw({8, 8});
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += w[k * 8 + i] * w[k * 8 + j];
      wtw[i * 8 + j] = acc;
    }
  const double oracle = ts::symmetric_max_eigenvalue(wtw);
  const SigmaMaxResult r = power_iteration_sigma_max(apply, apply_t, {8}, 500, 3);
  CHECK(std::abs(r.value - oracle) / oracle <= 1e-4);

  const auto zero_op = [](const Tensor& v) { return Tensor(v.shape()); };
  const SigmaMaxResult z = power_iteration_sigma_max(zero_op, zero_op, {4}, 10, 4);
  CHECK(z.value == 0.0);
  CHECK(z.zero_operator);
}
