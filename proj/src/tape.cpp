// SPDX-License-Identifier: Apache-2.0
#include "rotunroll/tape.hpp"

#include <cmath>
#include <string>

namespace rotunroll {
namespace {

Tensor transpose2d(const Tensor& a) {
  Tensor out = Tensor::uninit({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) out[j * a.dim(0) + i] = a[i * a.dim(1) + j];
  return out;
}

}  // namespace

Var GradTape::push(Tensor value, std::function<void()> back, bool leaf) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  n.leaf = leaf;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var GradTape::leaf(Tensor value) { return push(std::move(value), nullptr, true); }

const Tensor& GradTape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (!n.grad_set) throw UsageError("gradient not available; run backward() first");
  return n.grad;
}

Tensor& GradTape::grad_buf(std::size_t id) { return nodes_[id].grad; }

void GradTape::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.grad_set) {
    n.grad = g;
    n.grad_set = true;
  } else {
    add_inplace(n.grad, g);
  }
}

void GradTape::accumulate(std::size_t id, Tensor&& g) {
  Node& n = nodes_[id];
  if (!n.grad_set) {
    n.grad = std::move(g);
    n.grad_set = true;
  } else {
    add_inplace(n.grad, g);
  }
}

Var GradTape::add(Var a, Var b) {
  Var out = push(rotunroll::add(value(a), value(b)), nullptr);
  nodes_[out.id].back = [this, a, b, out] {
    accumulate(a.id, grad_buf(out.id));
    // out's gradient is dead after this lambda; hand the buffer over
    accumulate(b.id, std::move(nodes_[out.id].grad));
  };
  return out;
}

Var GradTape::sub(Var a, Var b) {
  Var out = push(rotunroll::sub(value(a), value(b)), nullptr);
  nodes_[out.id].back = [this, a, b, out] {
    accumulate(a.id, grad_buf(out.id));
    Tensor g = std::move(nodes_[out.id].grad);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = -g[i];
    accumulate(b.id, std::move(g));
  };
  return out;
}

Var GradTape::scale(Var a, double s) {
  Var out = push(rotunroll::scale(value(a), s), nullptr);
  nodes_[out.id].back = [this, a, s, out] {
    Tensor g = std::move(nodes_[out.id].grad);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
    accumulate(a.id, std::move(g));
  };
  return out;
}

Var GradTape::axpby(double a, Var x, double b, Var y) {
  Var out = push(rotunroll::axpby(a, value(x), b, value(y)), nullptr);
  nodes_[out.id].back = [this, a, x, b, y, out] {
    accumulate(x.id, rotunroll::scale(grad_buf(out.id), a));
    Tensor g = std::move(nodes_[out.id].grad);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= b;
    accumulate(y.id, std::move(g));
  };
  return out;
}

Var GradTape::correlate(Var input, Var filters, Padding padding) {
  const Tensor& f = value(filters);
  const std::size_t kh = f.dim(2), kw = f.dim(3);
  Var out = push(conv2d_correlate(value(input), f, padding), nullptr);
  nodes_[out.id].back = [this, input, filters, padding, kh, kw, out] {
    const Tensor& g = grad_buf(out.id);
    accumulate(input.id, conv2d_transpose(g, value(filters), padding));
    accumulate(filters.id, conv2d_filter_grad(value(input), g, kh, kw, padding));
  };
  return out;
}

Var GradTape::conv_transpose(Var codes, Var filters, Padding padding) {
  const Tensor& f = value(filters);
  const std::size_t kh = f.dim(2), kw = f.dim(3);
  Var out = push(conv2d_transpose(value(codes), f, padding), nullptr);
  nodes_[out.id].back = [this, codes, filters, padding, kh, kw, out] {
    const Tensor& g = grad_buf(out.id);
    accumulate(codes.id, conv2d_correlate(g, value(filters), padding));
    // d/d filters of the synthesis: same contraction as the correlation
    // filter gradient with the image/code roles exchanged.
    accumulate(filters.id, conv2d_filter_grad(g, value(codes), kh, kw, padding));
  };
  return out;
}

Var GradTape::matmul(Var a, Var b) {
  Var out = push(rotunroll::matmul(value(a), value(b)), nullptr);
  nodes_[out.id].back = [this, a, b, out] {
    const Tensor& g = grad_buf(out.id);
    accumulate(a.id, rotunroll::matmul(g, transpose2d(value(b))));
    accumulate(b.id, rotunroll::matmul(transpose2d(value(a)), g));
  };
  return out;
}

Var GradTape::soft_threshold(Var u, double lambda) {
  if (lambda < 0.0) throw UsageError("soft_threshold: lambda must be nonnegative");
  const Tensor& uv = value(u);
  Tensor out_val = Tensor::uninit(uv.shape());
  std::vector<char> mask(uv.size());
  for (std::size_t i = 0; i < uv.size(); ++i) {
    const double a = std::fabs(uv[i]) - lambda;
    mask[i] = a > 0.0;  // subgradient 0 at the kink
    out_val[i] = mask[i] ? (uv[i] > 0.0 ? a : -a) : 0.0;
  }
  Var out = push(std::move(out_val), nullptr);
  nodes_[out.id].back = [this, u, out, mask = std::move(mask)] {
    Tensor g = std::move(nodes_[out.id].grad);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = mask[i] ? g[i] : 0.0;
    accumulate(u.id, std::move(g));
  };
  return out;
}

Var GradTape::expand_bank(Var basis, const CyclicGroup& group) {
  const std::size_t m = value(basis).dim(0);
  Var out = push(expand_basis(value(basis), group), nullptr);
  nodes_[out.id].back = [this, basis, &group, m, out] {
    accumulate(basis.id, accumulate_basis_gradient(grad_buf(out.id), group, m));
  };
  return out;
}

Var GradTape::batch_norm(Var x, Var gamma, Var beta, bool training, Tensor* running_mean,
                         Tensor* running_var, const BatchNormParams& p) {
  const Tensor& xv = value(x);
  if (xv.rank() != 4) throw DimensionError("batch_norm expects [B,C,H,W]");
  const std::size_t B = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
  const std::size_t n = B * HW;
  const Tensor& gv = value(gamma);
  const Tensor& bv = value(beta);
  if (gv.size() != C || bv.size() != C)
    throw DimensionError("batch_norm: gamma/beta must have one entry per channel");

  std::vector<double> mean(C), istd(C);
  if (training) {
    for (std::size_t c = 0; c < C; ++c) {
      double mu = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* px = xv.data() + (b * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) mu += px[i];
      }
      mu /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* px = xv.data() + (b * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) var += (px[i] - mu) * (px[i] - mu);
      }
      var /= static_cast<double>(n);
      mean[c] = mu;
      istd[c] = 1.0 / std::sqrt(var + p.eps);
      if (running_mean && running_var) {
        (*running_mean)[c] = (1.0 - p.momentum) * (*running_mean)[c] + p.momentum * mu;
        (*running_var)[c] = (1.0 - p.momentum) * (*running_var)[c] + p.momentum * var;
      }
    }
  } else {
    if (!running_mean || !running_var)
      throw UsageError("batch_norm eval mode requires running statistics");
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = (*running_mean)[c];
      istd[c] = 1.0 / std::sqrt((*running_var)[c] + p.eps);
    }
  }

  Tensor xhat = Tensor::uninit(xv.shape());
  Tensor out_val = Tensor::uninit(xv.shape());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* px = xv.data() + (b * C + c) * HW;
      double* ph = xhat.data() + (b * C + c) * HW;
      double* po = out_val.data() + (b * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) {
        ph[i] = (px[i] - mean[c]) * istd[c];
        po[i] = gv[c] * ph[i] + bv[c];
      }
    }
  }

  Var out = push(std::move(out_val), nullptr);
  nodes_[out.id].back = [this, x, gamma, beta, training, out, B, C, HW,
                         xhat = std::move(xhat), istd = std::move(istd)] {
    const Tensor& g = grad_buf(out.id);
    const Tensor& gv = value(gamma);
    const std::size_t n = B * HW;
    Tensor dgamma({C}), dbeta({C});
    std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const double* pg = g.data() + (b * C + c) * HW;
        const double* ph = xhat.data() + (b * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) {
          sum_g[c] += pg[i];
          sum_gx[c] += pg[i] * ph[i];
        }
      }
    }
    for (std::size_t c = 0; c < C; ++c) {
      dgamma[c] = sum_gx[c];
      dbeta[c] = sum_g[c];
    }
    Tensor dx = Tensor::uninit(g.shape());
    const double invn = 1.0 / static_cast<double>(n);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const double* pg = g.data() + (b * C + c) * HW;
        const double* ph = xhat.data() + (b * C + c) * HW;
        double* pd = dx.data() + (b * C + c) * HW;
        if (training) {
          for (std::size_t i = 0; i < HW; ++i)
            pd[i] = gv[c] * istd[c] *
                    (pg[i] - invn * sum_g[c] - ph[i] * invn * sum_gx[c]);
        } else {
          for (std::size_t i = 0; i < HW; ++i) pd[i] = gv[c] * istd[c] * pg[i];
        }
      }
    }
    accumulate(x.id, std::move(dx));
    accumulate(gamma.id, std::move(dgamma));
    accumulate(beta.id, std::move(dbeta));
  };
  return out;
}

Var GradTape::global_avg_pool(Var x) {
  const Tensor& xv = value(x);
  if (xv.rank() != 4) throw DimensionError("global_avg_pool expects [B,C,H,W]");
  const std::size_t B = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
  Tensor out_val({B, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* px = xv.data() + (b * C + c) * HW;
      double s = 0.0;
      for (std::size_t i = 0; i < HW; ++i) s += px[i];
      out_val[b * C + c] = s / static_cast<double>(HW);
    }
  const std::vector<std::size_t> xshape = xv.shape();
  Var out = push(std::move(out_val), nullptr);
  nodes_[out.id].back = [this, x, out, B, C, HW, xshape] {
    const Tensor& g = grad_buf(out.id);
    Tensor dx = Tensor::uninit(xshape);
    const double w = 1.0 / static_cast<double>(HW);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) {
        double* pd = dx.data() + (b * C + c) * HW;
        const double gv = g[b * C + c] * w;
        for (std::size_t i = 0; i < HW; ++i) pd[i] = gv;
      }
    accumulate(x.id, std::move(dx));
  };
  return out;
}

Var GradTape::linear(Var x, Var weight, Var bias) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(weight);
  const Tensor& bv = value(bias);
  if (xv.rank() != 2 || wv.rank() != 2)
    throw DimensionError("linear expects x [B,F] and weight [C,F]");
  if (xv.dim(1) != wv.dim(1) || bv.size() != wv.dim(0))
    throw DimensionError("linear: feature dimensions disagree");
  Tensor out_val = rotunroll::matmul(xv, transpose2d(wv));
  const std::size_t B = xv.dim(0), C = wv.dim(0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) out_val[b * C + c] += bv[c];
  Var out = push(std::move(out_val), nullptr);
  nodes_[out.id].back = [this, x, weight, bias, out, B, C] {
    const Tensor& g = grad_buf(out.id);
    accumulate(x.id, rotunroll::matmul(g, value(weight)));
    accumulate(weight.id, rotunroll::matmul(transpose2d(g), value(x)));
    Tensor db({C});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) db[c] += g[b * C + c];
    accumulate(bias.id, std::move(db));
  };
  return out;
}

Var GradTape::cross_entropy_mean(Var logits, const std::vector<int>& labels) {
  const Tensor& lv = value(logits);
  if (lv.rank() != 2) throw DimensionError("cross_entropy_mean expects logits [B,C]");
  const std::size_t B = lv.dim(0), C = lv.dim(1);
  if (labels.size() != B) throw DimensionError("cross_entropy_mean: label count mismatch");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= C)
      throw UsageError("cross_entropy_mean: label " + std::to_string(y) + " out of range");

  Tensor probs({B, C});
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = lv.data() + b * C;
    double mx = row[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    loss += lse - row[static_cast<std::size_t>(labels[b])];
    for (std::size_t c = 0; c < C; ++c) probs[b * C + c] = std::exp(row[c] - lse);
  }
  loss /= static_cast<double>(B);

  Var out = push(Tensor({1}, {loss}), nullptr);
  nodes_[out.id].back = [this, logits, out, labels, B, C, probs = std::move(probs)] {
    const double gs = grad_buf(out.id)[0] / static_cast<double>(B);
    Tensor dl({B, C});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        dl[b * C + c] =
            gs * (probs[b * C + c] -
                  (static_cast<std::size_t>(labels[b]) == c ? 1.0 : 0.0));
    accumulate(logits.id, std::move(dl));
  };
  return out;
}

Var GradTape::sum_all(Var x) {
  const std::vector<std::size_t> xshape = value(x).shape();
  Var out = push(Tensor({1}, {rotunroll::sum(value(x))}), nullptr);
  nodes_[out.id].back = [this, x, out, xshape] {
    accumulate(x.id, Tensor::full(xshape, grad_buf(out.id)[0]));
  };
  return out;
}

Var GradTape::inner_product(Var a, Var b) {
  Var out = push(Tensor({1}, {rotunroll::inner(value(a), value(b))}), nullptr);
  nodes_[out.id].back = [this, a, b, out] {
    const double g = grad_buf(out.id)[0];
    accumulate(a.id, rotunroll::scale(value(b), g));
    accumulate(b.id, rotunroll::scale(value(a), g));
  };
  return out;
}

void GradTape::backward(Var loss) {
  if (consumed_) throw UsageError("tape already consumed by a previous backward()");
  if (loss.id >= nodes_.size()) throw UsageError("backward: unknown variable");
  if (nodes_[loss.id].value.size() != 1)
    throw UsageError("backward: loss must be a scalar");
  consumed_ = true;
  accumulate(loss.id, Tensor({1}, {1.0}));
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad_set && n.back) n.back();
    if (!n.leaf) {
      // values above i can no longer be referenced by remaining adjoints
      n.value.release();
      n.grad.release();
      n.grad_set = false;
      n.back = nullptr;
    }
  }
  // unreached leaves get zero gradients
  for (Node& n : nodes_) {
    if (n.leaf && !n.grad_set) {
      n.grad = Tensor::zeros(n.value.shape());
      n.grad_set = true;
    }
  }
}

}  // namespace rotunroll
