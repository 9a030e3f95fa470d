// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rotunroll/tensor.hpp"

namespace rotunroll {

enum class RotationKind { QuarterTurn, Bilinear };

// Linear rotation of an (h,w) grid about its center ((h-1)/2, (w-1)/2).
// Positive angles rotate counter-clockwise. Multiples of 90 degrees on
// square grids are exact pixel permutations; every other angle is a
// precomputed bilinear-interpolation map with zero fill outside the grid.
class RotationOperator {
 public:
  static RotationOperator make(double angle_degrees, std::size_t h, std::size_t w);
  // Forces the interpolating map even for quarter-turn angles (at which it
  // degenerates to the permutation up to roundoff).
  static RotationOperator make_bilinear(double angle_degrees, std::size_t h, std::size_t w);
  static RotationOperator identity(std::size_t h, std::size_t w);

  double angle_degrees() const { return angle_; }
  RotationKind kind() const { return kind_; }
  std::size_t grid_h() const { return h_; }
  std::size_t grid_w() const { return w_; }

  // Rotates the trailing (h,w) dims; leading dims are handled independently.
  Tensor apply(const Tensor& input) const;
  // Exact transpose of the linear map. For quarter turns this equals the
  // inverse rotation.
  Tensor apply_adjoint(const Tensor& grad) const;

  // Exact linear composition: (this o other), i.e. this applied after other.
  RotationOperator compose_after(const RotationOperator& other) const;

 private:
  RotationOperator() = default;
  double angle_ = 0.0;
  std::size_t h_ = 0, w_ = 0;
  RotationKind kind_ = RotationKind::QuarterTurn;
  // row t holds (source pixel, weight) pairs; per-row weights sum to <= 1.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows_;
};

// {e, R_theta, ..., R_theta^{k-1}} with theta = 360/k. element(i) is the
// generator composed with itself i times (exact sparse composition).
class CyclicGroup {
 public:
  CyclicGroup() = default;
  static CyclicGroup make(int order, std::size_t h, std::size_t w);

  int order() const { return static_cast<int>(elements_.size()); }
  const RotationOperator& generator() const { return elements_.at(1 % elements_.size()); }
  const RotationOperator& element(int i) const { return elements_.at(static_cast<std::size_t>(i)); }
  std::size_t grid_h() const { return elements_.front().grid_h(); }
  std::size_t grid_w() const { return elements_.front().grid_w(); }

 private:
  std::vector<RotationOperator> elements_;
};

// Evaluates both sides of the convolution-rotation relation
// R(x) * h == R(x * R^{-1}(h)) under "same" zero padding (correlation,
// single channel) and returns the maximum absolute deviation.
double check_conv_rotation_relation(const Tensor& x, const Tensor& h,
                                    const RotationOperator& op);

}  // namespace rotunroll
