// SPDX-License-Identifier: Apache-2.0
#include "rotunroll/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace rotunroll {
namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_quarter_multiple(double angle) {
  return angle == 0.0 || angle == 90.0 || angle == 180.0 || angle == 270.0;
}

}  // namespace

RotationOperator RotationOperator::identity(std::size_t h, std::size_t w) {
  return make(0.0, h, w);
}

RotationOperator RotationOperator::make(double angle_degrees, std::size_t h, std::size_t w) {
  if (angle_degrees < 0.0 || angle_degrees >= 360.0)
    throw UsageError("rotation angle must lie in [0, 360)");
  if (h < 1 || w < 1) throw UsageError("rotation grid extents must be >= 1");

  RotationOperator op;
  op.angle_ = angle_degrees;
  op.h_ = h;
  op.w_ = w;
  op.rows_.resize(h * w);

  if (is_quarter_multiple(angle_degrees) && h == w) {
    op.kind_ = RotationKind::QuarterTurn;
    const std::size_t n = h;
    const int quarters = static_cast<int>(angle_degrees / 90.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        // one CCW quarter turn: out(r,c) = in(c, n-1-r)
        std::size_t sr = r, sc = c;
        for (int q = 0; q < quarters; ++q) {
          const std::size_t nr = sc;
          const std::size_t nc = n - 1 - sr;
          sr = nr;
          sc = nc;
        }
        op.rows_[r * n + c].emplace_back(static_cast<std::uint32_t>(sr * n + sc), 1.0);
      }
    }
    return op;
  }
  return make_bilinear(angle_degrees, h, w);
}

RotationOperator RotationOperator::make_bilinear(double angle_degrees, std::size_t h,
                                                 std::size_t w) {
  if (angle_degrees < 0.0 || angle_degrees >= 360.0)
    throw UsageError("rotation angle must lie in [0, 360)");
  if (h < 1 || w < 1) throw UsageError("rotation grid extents must be >= 1");
  RotationOperator op;
  op.angle_ = angle_degrees;
  op.h_ = h;
  op.w_ = w;
  op.rows_.resize(h * w);
  op.kind_ = RotationKind::Bilinear;
  const double cr = (static_cast<double>(h) - 1.0) / 2.0;
  const double cc = (static_cast<double>(w) - 1.0) / 2.0;
  const double a = angle_degrees * kPi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      // source = target rotated by -angle (row axis points down)
      const double x = static_cast<double>(c) - cc;
      const double y = static_cast<double>(r) - cr;
      const double xs = ca * x - sa * y;
      const double ys = sa * x + ca * y;
      const double src_r = ys + cr;
      const double src_c = xs + cc;
      const double fr = std::floor(src_r);
      const double fc = std::floor(src_c);
      const double dr = src_r - fr;
      const double dc = src_c - fc;
      const long long r0 = static_cast<long long>(fr);
      const long long c0 = static_cast<long long>(fc);
      auto& row = op.rows_[r * w + c];
      const double weights[4] = {(1 - dr) * (1 - dc), (1 - dr) * dc, dr * (1 - dc), dr * dc};
      const long long coords[4][2] = {{r0, c0}, {r0, c0 + 1}, {r0 + 1, c0}, {r0 + 1, c0 + 1}};
      for (int i = 0; i < 4; ++i) {
        const long long rr = coords[i][0], cch = coords[i][1];
        if (weights[i] != 0.0 && rr >= 0 && rr < static_cast<long long>(h) && cch >= 0 &&
            cch < static_cast<long long>(w))
          row.emplace_back(static_cast<std::uint32_t>(rr * w + cch), weights[i]);
      }
    }
  }
  return op;
}

Tensor RotationOperator::apply(const Tensor& input) const {
  const std::size_t grid = h_ * w_;
  if (input.rank() < 2 || input.dim(input.rank() - 2) != h_ ||
      input.dim(input.rank() - 1) != w_)
    throw DimensionError("rotation: trailing dims do not match operator grid");
  Tensor out(input.shape());
  const std::size_t slices = input.size() / grid;
  for (std::size_t s = 0; s < slices; ++s) {
    const double* in = input.data() + s * grid;
    double* o = out.data() + s * grid;
    for (std::size_t t = 0; t < grid; ++t) {
      double acc = 0.0;
      for (const auto& [src, wgt] : rows_[t]) acc += wgt * in[src];
      o[t] = acc;
    }
  }
  return out;
}

Tensor RotationOperator::apply_adjoint(const Tensor& grad) const {
  const std::size_t grid = h_ * w_;
  if (grad.rank() < 2 || grad.dim(grad.rank() - 2) != h_ || grad.dim(grad.rank() - 1) != w_)
    throw DimensionError("rotation adjoint: trailing dims do not match operator grid");
  Tensor out(grad.shape());
  const std::size_t slices = grad.size() / grid;
  for (std::size_t s = 0; s < slices; ++s) {
    const double* g = grad.data() + s * grid;
    double* o = out.data() + s * grid;
    for (std::size_t t = 0; t < grid; ++t)
      for (const auto& [src, wgt] : rows_[t]) o[src] += wgt * g[t];
  }
  return out;
}

RotationOperator RotationOperator::compose_after(const RotationOperator& other) const {
  if (h_ != other.h_ || w_ != other.w_)
    throw DimensionError("rotation composition: grid mismatch");
  RotationOperator out;
  out.h_ = h_;
  out.w_ = w_;
  out.angle_ = std::fmod(angle_ + other.angle_, 360.0);
  out.kind_ = (kind_ == RotationKind::QuarterTurn && other.kind_ == RotationKind::QuarterTurn)
                  ? RotationKind::QuarterTurn
                  : RotationKind::Bilinear;
  out.rows_.resize(h_ * w_);
  for (std::size_t t = 0; t < rows_.size(); ++t) {
    std::map<std::uint32_t, double> acc;
    for (const auto& [mid, w1] : rows_[t])
      for (const auto& [src, w2] : other.rows_[mid]) acc[src] += w1 * w2;
    auto& row = out.rows_[t];
    row.reserve(acc.size());
    for (const auto& [src, wgt] : acc) row.emplace_back(src, wgt);
  }
  return out;
}

CyclicGroup CyclicGroup::make(int order, std::size_t h, std::size_t w) {
  if (order < 1) throw UsageError("cyclic group order must be >= 1");
  if (order > 1 && 360 % order != 0)
    throw UsageError("cyclic group order must divide 360");
  CyclicGroup g;
  g.elements_.push_back(RotationOperator::identity(h, w));
  if (order == 1) return g;
  const double theta = 360.0 / static_cast<double>(order);
  const RotationOperator gen = RotationOperator::make(theta, h, w);
  for (int i = 1; i < order; ++i)
    g.elements_.push_back(gen.compose_after(g.elements_.back()));
  return g;
}

double check_conv_rotation_relation(const Tensor& x, const Tensor& h,
                                    const RotationOperator& op) {
  if (x.rank() != 2 || h.rank() != 2)
    throw DimensionError("check_conv_rotation_relation expects 2-D x and h");
  const Tensor xc({1, x.dim(0), x.dim(1)}, {x.data(), x.data() + x.size()});
  auto filt = [&](const Tensor& f) {
    return Tensor({1, 1, f.dim(0), f.dim(1)}, {f.data(), f.data() + f.size()});
  };
  // inverse rotation: for quarter turns the adjoint is the inverse; in
  // general rotate by 360 - angle.
  const double inv_angle = op.angle_degrees() == 0.0 ? 0.0 : 360.0 - op.angle_degrees();
  const RotationOperator inv = RotationOperator::make(inv_angle, h.dim(0), h.dim(1));

  const Tensor lhs = conv2d_correlate(op.apply(xc), filt(h), Padding::Same);
  const Tensor rhs_inner = conv2d_correlate(xc, filt(inv.apply(h)), Padding::Same);
  const Tensor rhs = op.apply(rhs_inner);
  return max_abs_diff(lhs, rhs);
}

}  // namespace rotunroll
