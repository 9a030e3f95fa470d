// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "rotunroll/sparse_coding.hpp"
#include "support/oracles.hpp"

using namespace rotunroll;
namespace ts = rotunroll::testsupport;

namespace {

DenseDictionary random_dense(std::size_t dim, std::size_t atoms, std::mt19937_64& rng) {
  return DenseDictionary(Tensor::randn({dim, atoms}, rng, 1.0 / std::sqrt(dim)));
}

}  // namespace

TEST_CASE("soft threshold formula") {
  const Tensor u({3}, {1.2, -0.3, -2.0});
  const Tensor s = soft_threshold(u, 0.5);
  CHECK(s[0] == doctest::Approx(0.7));
  CHECK(s[1] == 0.0);
  CHECK(s[2] == doctest::Approx(-1.5));

  std::mt19937_64 rng(1);
  const Tensor r = Tensor::randn({10}, rng);
  CHECK(max_abs_diff(soft_threshold(r, 0.0), r) == 0.0);
  CHECK_THROWS_AS(soft_threshold(r, -0.1), UsageError);
}

TEST_CASE("prox scale property: S(c*u, c*l) == c*S(u, l)") {
  std::mt19937_64 rng(2);
  const Tensor u = Tensor::randn({20}, rng);
  const double c = 3.7, l = 0.4;
  const Tensor lhs = soft_threshold(scale(u, c), c * l);
  const Tensor rhs = scale(soft_threshold(u, l), c);
  CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
}

TEST_CASE("ista step from zero is S_lambda(alpha * W^T x)") {
  std::mt19937_64 rng(3);
  const DenseDictionary dict = random_dense(8, 12, rng);
  const Tensor x = Tensor::randn({8}, rng, 10.0);
  SolverConfig cfg;  // lambda 0.5, alpha 0.01
  const Tensor z0({12});
  const Tensor got = ista_step(z0, x, dict, cfg);
  const Tensor want = soft_threshold(scale(dict.analyze(x), cfg.alpha), cfg.lambda);
  CHECK(max_abs_diff(got, want) <= 1e-14);
}

TEST_CASE("orthonormal dictionary with alpha=1 solves the lasso in one step") {
  Tensor eye({4, 4});
  for (int i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  const DenseDictionary dict{Tensor(eye)};
  std::mt19937_64 rng(4);
  const Tensor x = Tensor::randn({4}, rng);
  SolverConfig cfg;
  cfg.alpha = 1.0;
  const Tensor z = ista_step(Tensor({4}), x, dict, cfg);
  CHECK(max_abs_diff(z, soft_threshold(x, cfg.lambda)) <= 1e-14);
  // already a fixed point: another step does not move
  CHECK(max_abs_diff(ista_step(z, x, dict, cfg), z) <= 1e-12);
}

TEST_CASE("residual form agrees with the plain step over 50 iterations") {
  std::mt19937_64 rng(5);
  const DenseDictionary dict = random_dense(8, 12, rng);
  const Tensor x = Tensor::randn({8}, rng, 50.0);
  SolverConfig cfg;
  Tensor a({12}), b({12});
  for (int i = 0; i < 50; ++i) {
    a = ista_step(a, x, dict, cfg);
    b = residual_form_step(b, x, dict, cfg);
    CHECK(max_abs_diff(a, b) <= 1e-12);
  }
}

TEST_CASE("fista unroll edge cases") {
  std::mt19937_64 rng(6);
  const DenseDictionary dict = random_dense(8, 12, rng);
  const Tensor x = Tensor::randn({8}, rng, 50.0);

  SolverConfig one;
  one.num_layers = 1;
  const auto codes = fista_unroll(x, dict, one);
  REQUIRE(codes.size() == 1);
  CHECK(max_abs_diff(codes[0], ista_step(Tensor({12}), x, dict, one)) <= 1e-14);

  SolverConfig four;
  const auto zero_codes = fista_unroll(Tensor({8}), dict, four);
  REQUIRE(zero_codes.size() == 4);
  for (const Tensor& z : zero_codes) CHECK(max_abs(z) == 0.0);
}

TEST_CASE("lasso objective basics and ISTA monotonicity") {
  std::mt19937_64 rng(7);
  const DenseDictionary dict = random_dense(8, 12, rng);
  const Tensor x = Tensor::randn({8}, rng);
  CHECK(lasso_objective(Tensor({12}), x, dict, 0.5) ==
        doctest::Approx(0.5 * inner(x, x)));
  CHECK(lasso_objective(Tensor({12}), Tensor({8}), dict, 0.5) == 0.0);

  // monotone descent when alpha * sigma_max(W^T W) <= 1; the implemented
  // iteration thresholds by lambda unscaled, so its fixed points match the
  // objective with penalty lambda/alpha
  const auto apply = [&](const Tensor& v) { return dict.synthesize(v); };
  const auto adj = [&](const Tensor& v) { return dict.analyze(v); };
  const double sig = power_iteration_sigma_max(apply, adj, {12}, 200, 1).value;
  SolverConfig cfg;
  cfg.alpha = 0.9 / sig;
  const Tensor xs = Tensor::randn({8}, rng, 5.0);
  Tensor z({12});
  double prev = lasso_objective(z, xs, dict, cfg.lambda / cfg.alpha);
  for (int i = 0; i < 200; ++i) {
    z = ista_step(z, xs, dict, cfg);
    const double cur = lasso_objective(z, xs, dict, cfg.lambda / cfg.alpha);
    CHECK(cur <= prev + 1e-10);
    prev = cur;
  }
}

TEST_CASE("long ISTA run reaches the coordinate-descent optimum") {
  std::mt19937_64 rng(8);
  const DenseDictionary dict = random_dense(8, 12, rng);
  const Tensor x = Tensor::randn({8}, rng, 30.0);
  SolverConfig cfg;  // alpha 0.01, lambda 0.5
  const double penalty = cfg.lambda / cfg.alpha;

  Tensor z({12});
  for (int i = 0; i < 3000; ++i) z = ista_step(z, x, dict, cfg);
  const double ista_obj = lasso_objective(z, x, dict, penalty);

  // oracle: convert the column-major dictionary matrix and run CD
  const Tensor zo = ts::lasso_coordinate_descent(dict.matrix(), x, penalty, 400);
  const double cd_obj = ts::dense_lasso_objective(dict.matrix(), x, zo, penalty);
  CHECK(ista_obj <= cd_obj + 1e-6);
  CHECK(cd_obj <= ista_obj + 1e-6);
}

TEST_CASE("ista fixed point satisfies the lasso optimality conditions") {
  std::mt19937_64 rng(9);
  const DenseDictionary dict = random_dense(6, 9, rng);
  const Tensor x = Tensor::randn({6}, rng, 30.0);
  SolverConfig cfg;
  const double penalty = cfg.lambda / cfg.alpha;

  Tensor z({9});
  for (int i = 0; i < 5000; ++i) z = ista_step(z, x, dict, cfg);

  // subgradient check: W^T(x - Wz) == penalty*sign(z_j) where z_j != 0,
  // and |W^T(x - Wz)_j| <= penalty where z_j == 0
  const Tensor corr = dict.analyze(sub(x, dict.synthesize(z)));
  for (std::size_t j = 0; j < 9; ++j) {
    if (z[j] != 0.0)
      CHECK(std::abs(corr[j] - penalty * (z[j] > 0 ? 1.0 : -1.0)) <= 1e-6);
    else
      CHECK(std::abs(corr[j]) <= penalty + 1e-6);
  }
}

TEST_CASE("codes after four layers keep exact zeros on unit-scale data") {
  std::mt19937_64 rng(10);
  const DenseDictionary dict = random_dense(16, 24, rng);
  const Tensor x = Tensor::randn({16}, rng);  // unit-norm-ish data
  SolverConfig cfg;                           // lambda 0.5
  const auto codes = fista_unroll(x, dict, cfg);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < codes.back().size(); ++i)
    if (codes.back()[i] == 0.0) ++zeros;
  CHECK(zeros > 0);  // sparse activations: strictly fewer nonzeros than entries
}

TEST_CASE("dense mode and 1x1 convolutional mode share one solver answer") {
  // atoms = 1x1 filters over C channels make the conv dictionary literally
  // a matrix; both paths must produce identical codes
  std::mt19937_64 rng(11);
  const std::size_t cin = 5, atoms = 7;
  const Tensor filters = Tensor::randn({atoms, cin, 1, 1}, rng);
  Tensor w({cin, atoms});
  for (std::size_t a = 0; a < atoms; ++a)
    for (std::size_t c = 0; c < cin; ++c) w[c * atoms + a] = filters[a * cin + c];

  const ConvDictionary conv(filters, Padding::Valid);
  const DenseDictionary dense{Tensor(w)};
  const Tensor x_img = Tensor::randn({cin, 1, 1}, rng, 20.0);
  Tensor x_vec({cin});
  for (std::size_t c = 0; c < cin; ++c) x_vec[c] = x_img[c];

  SolverConfig cfg;
  const auto conv_codes = fista_unroll(x_img, conv, cfg);
  const auto dense_codes = fista_unroll(x_vec, dense, cfg);
  REQUIRE(conv_codes.size() == dense_codes.size());
  for (std::size_t l = 0; l < conv_codes.size(); ++l) {
    REQUIRE(conv_codes[l].size() == dense_codes[l].size());
    for (std::size_t i = 0; i < dense_codes[l].size(); ++i)
      CHECK(std::abs(conv_codes[l][i] - dense_codes[l][i]) <= 1e-12);
  }
}

TEST_CASE("fista momentum scalar sequence is strictly increasing") {
  double t = 1.0;
  for (int i = 0; i < 10; ++i) {
    const double tn = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
    CHECK(tn > t);
    t = tn;
  }
}
