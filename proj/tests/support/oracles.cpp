// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace rotunroll::testsupport {

Tensor naive_correlate(const Tensor& input, const Tensor& filters, Padding padding) {
  if (input.rank() != 3 || filters.rank() != 4)
    throw DimensionError("naive_correlate expects [Cin,H,W] and [Cout,Cin,h,w]");
  const std::size_t cin = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t cout = filters.dim(0), kh = filters.dim(2), kw = filters.dim(3);
  if (filters.dim(1) != cin) throw DimensionError("channel mismatch");

  const long long pad_top = padding == Padding::Same ? static_cast<long long>((kh - 1) / 2) : 0;
  const long long pad_left = padding == Padding::Same ? static_cast<long long>((kw - 1) / 2) : 0;
  const std::size_t Ho = padding == Padding::Same ? H : H - kh + 1;
  const std::size_t Wo = padding == Padding::Same ? W : W - kw + 1;

  Tensor out({cout, Ho, Wo});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t r = 0; r < Ho; ++r)
      for (std::size_t c = 0; c < Wo; ++c) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t fr = 0; fr < kh; ++fr)
            for (std::size_t fc = 0; fc < kw; ++fc) {
              const long long ir = static_cast<long long>(r + fr) - pad_top;
              const long long ic = static_cast<long long>(c + fc) - pad_left;
              if (ir < 0 || ic < 0 || ir >= static_cast<long long>(H) ||
                  ic >= static_cast<long long>(W))
                continue;
              acc += input[(ci * H + static_cast<std::size_t>(ir)) * W +
                           static_cast<std::size_t>(ic)] *
                     filters[((o * cin + ci) * kh + fr) * kw + fc];
            }
        out[(o * Ho + r) * Wo + c] = acc;
      }
  return out;
}

Tensor dense_operator_matrix(const RotationOperator& op, std::size_t h, std::size_t w) {
  const std::size_t n = h * w;
  Tensor mat({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    Tensor basis({h, w});
    basis[j] = 1.0;
    const Tensor col = op.apply(basis);
    for (std::size_t i = 0; i < n; ++i) mat[i * n + j] = col[i];
  }
  return mat;
}

Tensor lasso_coordinate_descent(const Tensor& w, const Tensor& x, double penalty,
                                int sweeps) {
  if (w.rank() != 2 || x.rank() != 1) throw DimensionError("expects W [dim,atoms], x [dim]");
  const std::size_t dim = w.dim(0), atoms = w.dim(1);
  if (x.dim(0) != dim) throw DimensionError("signal length mismatch");

  Tensor z({atoms});
  Tensor residual = x;  // x - W z, maintained incrementally
  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t j = 0; j < atoms; ++j) {
      double col_sq = 0.0, corr = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double wij = w[i * atoms + j];
        col_sq += wij * wij;
        corr += wij * (residual[i] + wij * z[j]);
      }
      double zj = 0.0;
      if (col_sq > 0.0) {
        const double mag = std::abs(corr) - penalty;
        zj = mag > 0.0 ? std::copysign(mag, corr) / col_sq : 0.0;
      }
      const double delta = zj - z[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < dim; ++i) residual[i] -= w[i * atoms + j] * delta;
        z[j] = zj;
      }
    }
  }
  return z;
}

double dense_lasso_objective(const Tensor& w, const Tensor& x, const Tensor& z,
                             double penalty) {
  const std::size_t dim = w.dim(0), atoms = w.dim(1);
  double fit = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    double yi = 0.0;
    for (std::size_t j = 0; j < atoms; ++j) yi += w[i * atoms + j] * z[j];
    fit += (x[i] - yi) * (x[i] - yi);
  }
  double l1 = 0.0;
  for (std::size_t j = 0; j < atoms; ++j) l1 += std::abs(z[j]);
  return 0.5 * fit + penalty * l1;
}

double central_difference(const std::function<double(const Tensor&)>& f, Tensor x,
                          std::size_t i, double eps) {
  const double orig = x[i];
  x[i] = orig + eps;
  const double hi = f(x);
  x[i] = orig - eps;
  const double lo = f(x);
  x[i] = orig;
  return (hi - lo) / (2.0 * eps);
}

double symmetric_max_eigenvalue(Tensor a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw DimensionError("expects a square matrix");
  const std::size_t n = a.dim(0);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(at(p, q)) < 1e-18) continue;
        const double theta = 0.5 * std::atan2(2.0 * at(p, q), at(q, q) - at(p, p));
        const double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = at(i, p), aiq = at(i, q);
          at(i, p) = c * aip - s * aiq;
          at(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = at(p, i), aqi = at(q, i);
          at(p, i) = c * api - s * aqi;
          at(q, i) = s * api + c * aqi;
        }
      }
  }
  double mx = at(0, 0);
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, at(i, i));
  return mx;
}

}  // namespace rotunroll::testsupport
