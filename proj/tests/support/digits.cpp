// SPDX-License-Identifier: Apache-2.0
#include "digits.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rotunroll::testsupport {

namespace {

constexpr std::size_t kSize = 28;
constexpr double kPi = 3.14159265358979323846;

struct Point {
  double x, y;
};
using Stroke = std::vector<Point>;

Stroke arc(double cx, double cy, double rx, double ry, double a0, double a1, int n) {
  Stroke s(n);
  for (int i = 0; i < n; ++i) {
    const double t = (a0 + (a1 - a0) * i / (n - 1)) * kPi / 180.0;
    s[i] = {cx + rx * std::cos(t), cy + ry * std::sin(t)};
  }
  return s;
}

Stroke seg(Point a, Point b, int n = 12) {
  Stroke s(n);
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    s[i] = {(1 - t) * a.x + t * b.x, (1 - t) * a.y + t * b.y};
  }
  return s;
}

// Stroke skeletons per digit, coordinates in [0,1]^2 with y pointing up.
const std::vector<std::vector<Stroke>>& skeletons() {
  static const std::vector<std::vector<Stroke>> k = {
      /*0*/ {arc(0.5, 0.5, 0.28, 0.40, 0, 360, 48)},
      /*1*/ {seg({0.35, 0.72}, {0.52, 0.92}), seg({0.52, 0.92}, {0.52, 0.08})},
      /*2*/
      {arc(0.5, 0.70, 0.25, 0.22, 160, -20, 24), seg({0.72, 0.60}, {0.26, 0.10}),
       seg({0.26, 0.10}, {0.76, 0.10})},
      /*3*/
      {arc(0.48, 0.70, 0.24, 0.20, 150, -90, 24),
       arc(0.48, 0.30, 0.26, 0.22, 90, -150, 24)},
      /*4*/
      {seg({0.64, 0.92}, {0.24, 0.36}), seg({0.24, 0.36}, {0.80, 0.36}),
       seg({0.66, 0.60}, {0.66, 0.08})},
      /*5*/
      {seg({0.74, 0.90}, {0.30, 0.90}), seg({0.30, 0.90}, {0.28, 0.55}),
       arc(0.50, 0.32, 0.26, 0.26, 110, -120, 24)},
      /*6*/
      {arc(0.52, 0.30, 0.24, 0.24, 0, 360, 36), arc(0.60, 0.62, 0.34, 0.40, 60, 150, 18)},
      /*7*/ {seg({0.24, 0.90}, {0.78, 0.90}), seg({0.78, 0.90}, {0.40, 0.08})},
      /*8*/
      {arc(0.5, 0.68, 0.20, 0.20, 0, 360, 32), arc(0.5, 0.28, 0.24, 0.22, 0, 360, 32)},
      /*9*/
      {arc(0.48, 0.66, 0.23, 0.23, 0, 360, 36), seg({0.71, 0.62}, {0.62, 0.10})},
  };
  return k;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace

Tensor render_digit(int digit, std::mt19937_64& rng) {
  if (digit < 0 || digit > 9) throw UsageError("digit must be 0-9");
  const auto& strokes = skeletons()[static_cast<std::size_t>(digit)];

  // Random affine jitter: scale * rotation * shear, plus a translation.
  const double s = uniform(rng, 0.82, 1.12);
  const double th = uniform(rng, -12, 12) * kPi / 180.0;
  const double sh = uniform(rng, -0.15, 0.15);
  const double c = std::cos(th), sn = std::sin(th);
  const double a00 = s * c, a01 = s * (c * sh - sn);
  const double a10 = s * sn, a11 = s * (sn * sh + c);
  const double tx = uniform(rng, -0.08, 0.08), ty = uniform(rng, -0.08, 0.08);
  const double rad = uniform(rng, 0.9, 1.5);
  const double sigma2 = 2.0 * (rad * 0.55) * (rad * 0.55);

  Tensor img({1, kSize, kSize});
  const auto splat = [&](double x, double y) {
    const int x0 = static_cast<int>(std::floor(x)) - 2;
    const int y0 = static_cast<int>(std::floor(y)) - 2;
    for (int yy = y0; yy < y0 + 5; ++yy) {
      for (int xx = x0; xx < x0 + 5; ++xx) {
        if (xx < 0 || yy < 0 || xx >= static_cast<int>(kSize) || yy >= static_cast<int>(kSize))
          continue;
        const double d2 = (xx - x) * (xx - x) + (yy - y) * (yy - y);
        double& px = img[static_cast<std::size_t>(yy) * kSize + static_cast<std::size_t>(xx)];
        px = std::max(px, std::exp(-d2 / sigma2));
      }
    }
  };

  for (const Stroke& stroke : strokes) {
    std::vector<Point> q(stroke.size());
    for (std::size_t i = 0; i < stroke.size(); ++i) {
      const double ux = stroke[i].x - 0.5, uy = stroke[i].y - 0.5;
      const double wx = a00 * ux + a01 * uy + 0.5 + tx;
      const double wy = a10 * ux + a11 * uy + 0.5 + ty;
      // pixel coordinates: column from x, row from (1 - y)
      q[i] = {wx * (kSize - 1), (1.0 - wy) * (kSize - 1)};
    }
    for (std::size_t i = 0; i + 1 < q.size(); ++i) {
      const int n =
          static_cast<int>(std::max(std::abs(q[i + 1].x - q[i].x),
                                    std::abs(q[i + 1].y - q[i].y)) * 2.0) + 2;
      for (int j = 0; j < n; ++j) {
        const double t = static_cast<double>(j) / (n - 1);
        splat(q[i].x + (q[i + 1].x - q[i].x) * t, q[i].y + (q[i + 1].y - q[i].y) * t);
      }
    }
  }
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
  return img;
}

Dataset make_digit_dataset(std::size_t n, std::uint64_t seed, const std::string& split) {
  std::mt19937_64 rng(seed);
  Dataset ds;
  ds.images = Tensor({n, 1, kSize, kSize});
  ds.labels.resize(n);
  ds.split = split;
  ds.seed = seed;
  ds.provenance = "synthetic digits, seed " + std::to_string(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const int digit = static_cast<int>(rng() % 10);
    ds.labels[i] = static_cast<std::uint8_t>(digit);
    const Tensor img = render_digit(digit, rng);
    std::copy(img.data(), img.data() + img.size(),
              ds.images.data() + i * kSize * kSize);
  }
  return ds;
}

}  // namespace rotunroll::testsupport
