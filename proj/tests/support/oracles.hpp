// SPDX-License-Identifier: Apache-2.0
#pragma once

// Slow reference implementations used only by tests. Each is written
// independently of the library kernels it checks (direct loops, dense
// matrices) so agreement is meaningful.

#include <functional>

#include "rotunroll/rotation.hpp"
#include "rotunroll/tensor.hpp"

namespace rotunroll::testsupport {

// Quadruple-loop cross-correlation of input [Cin,H,W] with filters
// [Cout,Cin,h,w]; same conventions as conv2d_correlate.
Tensor naive_correlate(const Tensor& input, const Tensor& filters, Padding padding);

// Materializes a rotation operator as a dense (h*w) x (h*w) matrix by
// applying it to every standard basis image.
Tensor dense_operator_matrix(const RotationOperator& op, std::size_t h, std::size_t w);

// Coordinate descent for min_z 0.5*||x - W z||^2 + penalty*||z||_1 with a
// dense W [dim, atoms]. Returns z after `sweeps` full passes.
Tensor lasso_coordinate_descent(const Tensor& w, const Tensor& x, double penalty,
                                int sweeps);

// The lasso objective above, evaluated directly.
double dense_lasso_objective(const Tensor& w, const Tensor& x, const Tensor& z,
                             double penalty);

// Central finite difference of a scalar function at x along coordinate i.
double central_difference(const std::function<double(const Tensor&)>& f, Tensor x,
                          std::size_t i, double eps);

// Largest eigenvalue of a symmetric matrix via cyclic Jacobi rotations.
double symmetric_max_eigenvalue(Tensor a);

}  // namespace rotunroll::testsupport
