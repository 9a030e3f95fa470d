// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "rotunroll/errors.hpp"

namespace rotunroll {

namespace detail {
// Allocator that leaves value-less construct() as default-init, so a
// vector<double> resize does not zero memory the caller will overwrite.
template <class T>
struct NoInitAlloc {
  using value_type = T;
  NoInitAlloc() noexcept = default;
  template <class U>
  NoInitAlloc(const NoInitAlloc<U>&) noexcept {}
  T* allocate(std::size_t n) { return std::allocator<T>().allocate(n); }
  void deallocate(T* p, std::size_t n) noexcept { std::allocator<T>().deallocate(p, n); }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    if constexpr (sizeof...(Args) == 0)
      ::new (static_cast<void*>(p)) U;
    else
      ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
  template <class U>
  bool operator==(const NoInitAlloc<U>&) const noexcept {
    return true;
  }
};
}  // namespace detail

// Dense N-dimensional array of doubles, row-major, immutable shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  // Storage is allocated but not initialized; every element must be
  // written before it is read. For operation outputs on the hot path.
  static Tensor uninit(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor randn(std::vector<std::size_t> shape, std::mt19937_64& rng, double stddev = 1.0);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool empty() const { return data_.empty(); }

  // Releases storage; used by the tape to bound backward-pass memory.
  void release() {
    data_.clear();
    data_.shrink_to_fit();
    shape_.clear();
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double, detail::NoInitAlloc<double>> data_;
};

// Elementwise arithmetic. Shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor axpby(double a, const Tensor& x, double b, const Tensor& y);
void add_inplace(Tensor& dst, const Tensor& src);

double inner(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
double l1_norm(const Tensor& a);

enum class Padding { Valid, Same };

// Cross-correlation of input [Cin,H,W] (or batched [B,Cin,H,W]) with
// filters [Cout,Cin,h,w]. "same" zero-pads with the extra pad for even
// kernels placed on the bottom/right. Stride is 1.
Tensor conv2d_correlate(const Tensor& input, const Tensor& filters, Padding padding);

// Exact linear adjoint of conv2d_correlate with the same padding mode.
// Maps codes [Cout,H',W'] (or [B,Cout,H',W']) back to [Cin,H,W].
Tensor conv2d_transpose(const Tensor& codes, const Tensor& filters, Padding padding);

// d(correlate)/d(filters): given the input and the gradient w.r.t. the
// correlation output, returns the filter gradient [Cout,Cin,h,w].
Tensor conv2d_filter_grad(const Tensor& input, const Tensor& grad_output,
                          std::size_t filter_h, std::size_t filter_w, Padding padding);

// a [M,K] times b [K,N].
Tensor matmul(const Tensor& a, const Tensor& b);

struct SigmaMaxResult {
  double value = 0.0;        // estimate of sigma_max(W^T W) == sigma_max(W)^2
  bool zero_operator = false;
};

// Power iteration on W^T W for an adjoint pair (apply = W, apply_adjoint = W^T).
// `dim` is the shape of the operator's input (code) space.
SigmaMaxResult power_iteration_sigma_max(
    const std::function<Tensor(const Tensor&)>& apply,
    const std::function<Tensor(const Tensor&)>& apply_adjoint,
    const std::vector<std::size_t>& dim, int iters, std::uint64_t seed);

}  // namespace rotunroll
