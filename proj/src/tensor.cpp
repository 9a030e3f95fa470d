// SPDX-License-Identifier: Apache-2.0
#include "rotunroll/tensor.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

namespace rotunroll {
namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor extent must be >= 1");
    n *= e;
  }
  return n;
}

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

struct ConvGeom {
  std::size_t cin, h_in, w_in, cout, kh, kw, h_out, w_out;
  long long pad_top, pad_left;
};

ConvGeom conv_geometry(const std::vector<std::size_t>& input_chw,
                       const std::vector<std::size_t>& filter_shape, Padding padding) {
  if (filter_shape.size() != 4) throw DimensionError("filters must be [Cout,Cin,h,w]");
  ConvGeom g{};
  g.cin = input_chw[0];
  g.h_in = input_chw[1];
  g.w_in = input_chw[2];
  g.cout = filter_shape[0];
  g.kh = filter_shape[2];
  g.kw = filter_shape[3];
  if (filter_shape[1] != g.cin)
    throw DimensionError("filter Cin=" + std::to_string(filter_shape[1]) +
                         " does not match input channels=" + std::to_string(g.cin));
  if (padding == Padding::Valid) {
    if (g.kh > g.h_in || g.kw > g.w_in)
      throw DimensionError("valid padding: kernel exceeds input extent");
    g.h_out = g.h_in - g.kh + 1;
    g.w_out = g.w_in - g.kw + 1;
    g.pad_top = 0;
    g.pad_left = 0;
  } else {
    g.h_out = g.h_in;
    g.w_out = g.w_in;
    // even kernels put the extra pad on the bottom/right
    g.pad_top = static_cast<long long>((g.kh - 1) / 2);
    g.pad_left = static_cast<long long>((g.kw - 1) / 2);
  }
  return g;
}

// cols is K x (h_out*w_out) with K = cin*kh*kw, row-major.
void im2col(const double* img, const ConvGeom& g, double* cols) {
  const std::size_t n_out = g.h_out * g.w_out;
  for (std::size_t c = 0; c < g.cin; ++c) {
    const double* plane = img + c * g.h_in * g.w_in;
    for (std::size_t u = 0; u < g.kh; ++u) {
      for (std::size_t v = 0; v < g.kw; ++v) {
        double* row = cols + ((c * g.kh + u) * g.kw + v) * n_out;
        for (std::size_t i = 0; i < g.h_out; ++i) {
          const long long si = static_cast<long long>(i + u) - g.pad_top;
          if (si < 0 || si >= static_cast<long long>(g.h_in)) {
            std::memset(row + i * g.w_out, 0, g.w_out * sizeof(double));
            continue;
          }
          const double* src = plane + si * g.w_in;
          for (std::size_t j = 0; j < g.w_out; ++j) {
            const long long sj = static_cast<long long>(j + v) - g.pad_left;
            row[i * g.w_out + j] =
                (sj < 0 || sj >= static_cast<long long>(g.w_in)) ? 0.0 : src[sj];
          }
        }
      }
    }
  }
}

// Scatter-add transpose of im2col.
void col2im_add(const double* cols, const ConvGeom& g, double* img) {
  const std::size_t n_out = g.h_out * g.w_out;
  for (std::size_t c = 0; c < g.cin; ++c) {
    double* plane = img + c * g.h_in * g.w_in;
    for (std::size_t u = 0; u < g.kh; ++u) {
      for (std::size_t v = 0; v < g.kw; ++v) {
        const double* row = cols + ((c * g.kh + u) * g.kw + v) * n_out;
        for (std::size_t i = 0; i < g.h_out; ++i) {
          const long long si = static_cast<long long>(i + u) - g.pad_top;
          if (si < 0 || si >= static_cast<long long>(g.h_in)) continue;
          double* dst = plane + si * g.w_in;
          for (std::size_t j = 0; j < g.w_out; ++j) {
            const long long sj = static_cast<long long>(j + v) - g.pad_left;
            if (sj >= 0 && sj < static_cast<long long>(g.w_in)) dst[sj] += row[i * g.w_out + j];
          }
        }
      }
    }
  }
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
              beta, c, static_cast<int>(ldc));
}

struct BatchView {
  std::size_t batch;
  std::vector<std::size_t> chw;
  bool batched;
};

BatchView batch_view(const Tensor& t, const char* what) {
  if (t.rank() == 3) return {1, {t.dim(0), t.dim(1), t.dim(2)}, false};
  if (t.rank() == 4) return {t.dim(0), {t.dim(1), t.dim(2), t.dim(3)}, true};
  throw DimensionError(std::string(what) + " must be rank 3 [C,H,W] or rank 4 [B,C,H,W]");
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)) {
  if (checked_numel(shape_) != data.size())
    throw DimensionError("tensor data length does not match shape product");
  data_.assign(data.begin(), data.end());
}

Tensor Tensor::uninit(std::vector<std::size_t> shape) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_.resize(checked_numel(t.shape_));
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t = uninit(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::randn(std::vector<std::size_t> shape, std::mt19937_64& rng, double stddev) {
  Tensor t = uninit(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data_) v = dist(rng);
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::uninit(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::uninit(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::uninit(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

Tensor axpby(double a, const Tensor& x, double b, const Tensor& y) {
  require_same_shape(x, y, "axpby");
  Tensor out = Tensor::uninit(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
  return out;
}

void add_inplace(Tensor& dst, const Tensor& src) {
  require_same_shape(dst, src, "add_inplace");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double inner(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "inner");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i]));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

double l1_norm(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i]);
  return s;
}

Tensor conv2d_correlate(const Tensor& input, const Tensor& filters, Padding padding) {
  const BatchView bv = batch_view(input, "conv2d_correlate input");
  const ConvGeom g = conv_geometry(bv.chw, filters.shape(), padding);
  const std::size_t k = g.cin * g.kh * g.kw;
  const std::size_t n_out = g.h_out * g.w_out;

  std::vector<std::size_t> out_shape =
      bv.batched ? std::vector<std::size_t>{bv.batch, g.cout, g.h_out, g.w_out}
                 : std::vector<std::size_t>{g.cout, g.h_out, g.w_out};
  Tensor out = Tensor::uninit(std::move(out_shape));  // gemm writes every entry
  std::vector<double> cols(k * n_out);
  const std::size_t in_stride = g.cin * g.h_in * g.w_in;
  const std::size_t out_stride = g.cout * n_out;
  for (std::size_t b = 0; b < bv.batch; ++b) {
    im2col(input.data() + b * in_stride, g, cols.data());
    gemm(false, false, g.cout, n_out, k, 1.0, filters.data(), k, cols.data(), n_out, 0.0,
         out.data() + b * out_stride, n_out);
  }
  return out;
}

Tensor conv2d_transpose(const Tensor& codes, const Tensor& filters, Padding padding) {
  const BatchView bv = batch_view(codes, "conv2d_transpose codes");
  if (filters.rank() != 4) throw DimensionError("filters must be [Cout,Cin,h,w]");
  if (bv.chw[0] != filters.dim(0))
    throw DimensionError("code channels=" + std::to_string(bv.chw[0]) +
                         " do not match filter Cout=" + std::to_string(filters.dim(0)));
  // Recover the forward-correlation geometry that produced these codes.
  std::size_t h_in, w_in;
  if (padding == Padding::Valid) {
    h_in = bv.chw[1] + filters.dim(2) - 1;
    w_in = bv.chw[2] + filters.dim(3) - 1;
  } else {
    h_in = bv.chw[1];
    w_in = bv.chw[2];
  }
  const ConvGeom g = conv_geometry({filters.dim(1), h_in, w_in}, filters.shape(), padding);
  if (g.h_out != bv.chw[1] || g.w_out != bv.chw[2])
    throw DimensionError("code geometry inconsistent with declared padding");

  const std::size_t k = g.cin * g.kh * g.kw;
  const std::size_t n_out = g.h_out * g.w_out;
  std::vector<std::size_t> out_shape =
      bv.batched ? std::vector<std::size_t>{bv.batch, g.cin, g.h_in, g.w_in}
                 : std::vector<std::size_t>{g.cin, g.h_in, g.w_in};
  Tensor out(std::move(out_shape));
  std::vector<double> cols(k * n_out);
  const std::size_t code_stride = g.cout * n_out;
  const std::size_t img_stride = g.cin * g.h_in * g.w_in;
  for (std::size_t b = 0; b < bv.batch; ++b) {
    gemm(true, false, k, n_out, g.cout, 1.0, filters.data(), k,
         codes.data() + b * code_stride, n_out, 0.0, cols.data(), n_out);
    col2im_add(cols.data(), g, out.data() + b * img_stride);
  }
  return out;
}

Tensor conv2d_filter_grad(const Tensor& input, const Tensor& grad_output,
                          std::size_t filter_h, std::size_t filter_w, Padding padding) {
  const BatchView bi = batch_view(input, "conv2d_filter_grad input");
  const BatchView bo = batch_view(grad_output, "conv2d_filter_grad grad");
  if (bi.batch != bo.batch) throw DimensionError("conv2d_filter_grad: batch mismatch");
  const std::size_t cout = bo.chw[0];
  const ConvGeom g =
      conv_geometry(bi.chw, {cout, bi.chw[0], filter_h, filter_w}, padding);
  if (g.h_out != bo.chw[1] || g.w_out != bo.chw[2])
    throw DimensionError("conv2d_filter_grad: grad geometry inconsistent");

  const std::size_t k = g.cin * g.kh * g.kw;
  const std::size_t n_out = g.h_out * g.w_out;
  Tensor df({cout, g.cin, filter_h, filter_w});
  std::vector<double> cols(k * n_out);
  const std::size_t in_stride = g.cin * g.h_in * g.w_in;
  const std::size_t out_stride = cout * n_out;
  for (std::size_t b = 0; b < bi.batch; ++b) {
    im2col(input.data() + b * in_stride, g, cols.data());
    gemm(false, true, cout, k, n_out, 1.0, grad_output.data() + b * out_stride, n_out,
         cols.data(), n_out, 1.0, df.data(), k);
  }
  return df;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul operands must be rank 2");
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner dimensions disagree (" + std::to_string(a.dim(1)) +
                         " vs " + std::to_string(b.dim(0)) + ")");
  Tensor out = Tensor::uninit({a.dim(0), b.dim(1)});
  gemm(false, false, a.dim(0), b.dim(1), a.dim(1), 1.0, a.data(), a.dim(1), b.data(),
       b.dim(1), 0.0, out.data(), b.dim(1));
  return out;
}

SigmaMaxResult power_iteration_sigma_max(
    const std::function<Tensor(const Tensor&)>& apply,
    const std::function<Tensor(const Tensor&)>& apply_adjoint,
    const std::vector<std::size_t>& dim, int iters, std::uint64_t seed) {
  if (iters < 1) throw UsageError("power_iteration_sigma_max: iters must be >= 1");
  std::mt19937_64 rng(seed);
  Tensor v = Tensor::randn(dim, rng);
  double nv = std::sqrt(inner(v, v));
  if (nv == 0.0) return {0.0, true};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] /= nv;

  double eig = 0.0;
  for (int it = 0; it < iters; ++it) {
    Tensor w = apply_adjoint(apply(v));
    eig = inner(v, w);  // Rayleigh quotient for W^T W (v is unit norm)
    double nw = std::sqrt(inner(w, w));
    if (nw == 0.0) return {0.0, true};
    for (std::size_t i = 0; i < w.size(); ++i) w[i] /= nw;
    v = std::move(w);
  }
  return {eig, false};
}

}  // namespace rotunroll
