// Copyright 2026 The MergeMix Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mergemix/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mergemix/error.hpp"
#include "mergemix/numerics/kernels.hpp"

namespace mergemix::nx {
namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw ShapeError(std::string(op) + ": operands live on different tapes");
  }
  return a.tape();
}

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), op,
          "shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.rank() == 2 && B.rank() == 2, "matmul", "operands must be matrices");
  require(A.dim(1) == B.dim(0), "matmul",
          "inner dims differ: " + shape_string(A.shape()) + " x " + shape_string(B.shape()));
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out({m, n});
  kernels::active().gemm_nn(m, n, k, A.data().data(), B.data().data(), out.data().data());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("matmul", std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const auto& kern = kernels::active();
    const double* g = t.grad_buffer(self).data();
    if (t.needs_grad(ia)) {
      kern.gemm_nt(m, k, n, g, t.value(ib).data().data(), t.grad_buffer(ia).data());
    }
    if (t.needs_grad(ib)) {
      kern.gemm_tn(k, n, m, t.value(ia).data().data(), g, t.grad_buffer(ib).data());
    }
  });
}

Var linear(Var x, Var w, Var bias) {
  Tape& t = same_tape(x, w, "linear");
  same_tape(x, bias, "linear");
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const Tensor& Bv = bias.value();
  require(W.rank() == 2, "linear", "weight must be a matrix");
  require(X.cols() == W.dim(0), "linear",
          "input width " + std::to_string(X.cols()) + " vs weight " + shape_string(W.shape()));
  require(Bv.size() == W.dim(1), "linear", "bias length must equal output width");
  const std::size_t rows = X.rows(), in = W.dim(0), outw = W.dim(1);
  Shape shape = X.shape();
  shape.back() = outw;
  Tensor out(shape);
  double* o = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(Bv.data().begin(), Bv.data().end(), o + r * outw);
  }
  kernels::active().gemm_nn(rows, outw, in, X.data().data(), W.data().data(), o);
  const std::size_t ix = x.id(), iw = w.id(), ib = bias.id();
  return t.record("linear", std::move(out), {ix, iw, ib}, [=](Tape& t, std::size_t self) {
    const auto& kern = kernels::active();
    const double* g = t.grad_buffer(self).data();
    if (t.needs_grad(ix)) {
      kern.gemm_nt(rows, in, outw, g, t.value(iw).data().data(), t.grad_buffer(ix).data());
    }
    if (t.needs_grad(iw)) {
      kern.gemm_tn(in, outw, rows, t.value(ix).data().data(), g, t.grad_buffer(iw).data());
    }
    if (t.needs_grad(ib)) {
      auto gb = t.grad_buffer(ib);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < outw; ++c) gb[c] += g[r * outw + c];
      }
    }
  });
}

Var bmm(Var a, Var b, bool transpose_b) {
  Tape& t = same_tape(a, b, "bmm");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.rank() == 3 && B.rank() == 3, "bmm", "operands must be rank 3");
  require(A.dim(0) == B.dim(0), "bmm", "batch sizes differ");
  const std::size_t batch = A.dim(0), m = A.dim(1), k = A.dim(2);
  const std::size_t n = transpose_b ? B.dim(1) : B.dim(2);
  require((transpose_b ? B.dim(2) : B.dim(1)) == k, "bmm",
          "inner dims differ: " + shape_string(A.shape()) + " x " + shape_string(B.shape()));
  Tensor out({batch, m, n});
  const auto& kern = kernels::active();
  for (std::size_t i = 0; i < batch; ++i) {
    const double* ai = A.data().data() + i * m * k;
    const double* bi = B.data().data() + i * k * n;
    double* oi = out.data().data() + i * m * n;
    if (transpose_b) {
      kern.gemm_nt(m, n, k, ai, bi, oi);
    } else {
      kern.gemm_nn(m, n, k, ai, bi, oi);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("bmm", std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const auto& kern = kernels::active();
    const double* g = t.grad_buffer(self).data();
    const double* av = t.value(ia).data().data();
    const double* bv = t.value(ib).data().data();
    const bool ga = t.needs_grad(ia), gb = t.needs_grad(ib);
    double* da = ga ? t.grad_buffer(ia).data() : nullptr;
    double* db = gb ? t.grad_buffer(ib).data() : nullptr;
    for (std::size_t i = 0; i < batch; ++i) {
      const double* gi = g + i * m * n;
      const double* ai = av + i * m * k;
      const double* bi = bv + i * k * n;
      if (transpose_b) {
        if (ga) kern.gemm_nn(m, k, n, gi, bi, da + i * m * k);
        if (gb) kern.gemm_tn(n, k, m, gi, ai, db + i * k * n);
      } else {
        if (ga) kern.gemm_nt(m, k, n, gi, bi, da + i * m * k);
        if (gb) kern.gemm_tn(k, n, m, ai, gi, db + i * k * n);
      }
    }
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  out.set_requires_grad(false);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("add", std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    for (std::size_t p : {ia, ib}) {
      if (!t.needs_grad(p)) continue;
      auto d = t.grad_buffer(p);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  out.set_requires_grad(false);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("sub", std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    if (t.needs_grad(ia)) {
      auto d = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      auto d = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  out.set_requires_grad(false);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("mul", std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    if (t.needs_grad(ia)) {
      auto d = t.grad_buffer(ia);
      const auto o = t.value(ib).data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * o[i];
    }
    if (t.needs_grad(ib)) {
      auto d = t.grad_buffer(ib);
      const auto o = t.value(ia).data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * o[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  out.set_requires_grad(false);
  const std::size_t ia = a.id();
  return a.tape().record("scale", std::move(out), {ia}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    auto d = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += s * g[i];
  });
}

Var add_scalar(Var a, double c) {
  Tensor out = a.value();
  for (double& v : out.data()) v += c;
  out.set_requires_grad(false);
  const std::size_t ia = a.id();
  return a.tape().record("add_scalar", std::move(out), {ia}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    auto d = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

Var add_bias(Var x, Var bias) {
  Tape& t = same_tape(x, bias, "add_bias");
  const std::size_t n = x.value().cols();
  require(bias.value().size() == n, "add_bias", "bias length must equal trailing dim");
  Tensor out = x.value();
  out.set_requires_grad(false);
  const auto bv = bias.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % n];
  const std::size_t ix = x.id(), ib = bias.id();
  return t.record("add_bias", std::move(out), {ix, ib}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    if (t.needs_grad(ix)) {
      auto d = t.grad_buffer(ix);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      auto d = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) d[i % n] += g[i];
    }
  });
}

Var reshape(Var x, Shape shape) {
  require(shape_size(shape) == x.value().size(), "reshape",
          shape_string(x.value().shape()) + " -> " + shape_string(shape));
  Tensor out = x.value().reshaped(std::move(shape));
  out.set_requires_grad(false);
  const std::size_t ix = x.id();
  return x.tape().record("reshape", std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    auto d = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

Var layernorm(Var x, Var gain, Var bias, double eps) {
  Tape& t = same_tape(x, gain, "layernorm");
  same_tape(x, bias, "layernorm");
  const Tensor& X = x.value();
  const std::size_t n = X.cols(), rows = X.rows();
  require(gain.value().size() == n && bias.value().size() == n, "layernorm",
          "gain/bias length must equal trailing dim");
  const auto gv = gain.value().data();
  const auto bv = bias.value().data();
  Tensor out(X.shape());
  std::vector<double> xhat(X.size());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data().data() + r * n;
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += xr[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(n);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t c = 0; c < n; ++c) {
      const double h = (xr[c] - mu) * rs;
      xhat[r * n + c] = h;
      out[r * n + c] = gv[c] * h + bv[c];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return t.record("layernorm", std::move(out), {ix, ig, ib},
                  [=, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, std::size_t self) {
                    const auto g = t.grad_buffer(self);
                    const auto gv = t.value(ig).data();
                    if (t.needs_grad(ig)) {
                      auto d = t.grad_buffer(ig);
                      for (std::size_t i = 0; i < g.size(); ++i) d[i % n] += g[i] * xhat[i];
                    }
                    if (t.needs_grad(ib)) {
                      auto d = t.grad_buffer(ib);
                      for (std::size_t i = 0; i < g.size(); ++i) d[i % n] += g[i];
                    }
                    if (!t.needs_grad(ix)) return;
                    auto dx = t.grad_buffer(ix);
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double m1 = 0.0, m2 = 0.0;
                      for (std::size_t c = 0; c < n; ++c) {
                        const double dh = g[r * n + c] * gv[c];
                        m1 += dh;
                        m2 += dh * xhat[r * n + c];
                      }
                      m1 *= inv_n;
                      m2 *= inv_n;
                      for (std::size_t c = 0; c < n; ++c) {
                        const double dh = g[r * n + c] * gv[c];
                        dx[r * n + c] += rstd[r] * (dh - m1 - xhat[r * n + c] * m2);
                      }
                    }
                  });
}

Var gelu(Var x) {
  Tensor out = x.value();
  out.set_requires_grad(false);
  for (double& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  const std::size_t ix = x.id();
  return x.tape().record("gelu", std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    const auto xv = t.value(ix).data();
    auto d = t.grad_buffer(ix);
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      d[i] += g[i] * (cdf + v * pdf);
    }
  });
}

Var softplus(Var x) {
  Tensor out = x.value();
  out.set_requires_grad(false);
  for (double& v : out.data()) v = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  const std::size_t ix = x.id();
  return x.tape().record("softplus", std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    const auto xv = t.value(ix).data();
    auto d = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = xv[i];
      const double sig = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      d[i] += g[i] * sig;
    }
  });
}

Tensor softmax_rows(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t n = x.cols(), rows = x.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * n;
    double* o = out.data().data() + r * n;
    const double mx = *std::max_element(xr, xr + n);
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      o[c] = std::exp(xr[c] - mx);
      s += o[c];
    }
    const double inv = 1.0 / s;
    for (std::size_t c = 0; c < n; ++c) o[c] *= inv;
  }
  return out;
}

Var softmax_rows(Var x) {
  Tensor out = softmax_rows(x.value());
  const std::size_t ix = x.id(), n = x.value().cols(), rows = x.value().rows();
  return x.tape().record("softmax_rows", std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    const auto y = t.value(self).data();
    auto d = t.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      double dotgy = 0.0;
      for (std::size_t c = 0; c < n; ++c) dotgy += g[r * n + c] * y[r * n + c];
      for (std::size_t c = 0; c < n; ++c) {
        d[r * n + c] += y[r * n + c] * (g[r * n + c] - dotgy);
      }
    }
  });
}

Var log_softmax_rows(Var x) {
  const Tensor& X = x.value();
  const std::size_t n = X.cols(), rows = X.rows();
  Tensor out(X.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data().data() + r * n;
    const double mx = *std::max_element(xr, xr + n);
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += std::exp(xr[c] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = xr[c] - lse;
  }
  const std::size_t ix = x.id();
  return x.tape().record("log_softmax_rows", std::move(out), {ix},
                         [=](Tape& t, std::size_t self) {
                           const auto g = t.grad_buffer(self);
                           const auto y = t.value(self).data();
                           auto d = t.grad_buffer(ix);
                           for (std::size_t r = 0; r < rows; ++r) {
                             double gs = 0.0;
                             for (std::size_t c = 0; c < n; ++c) gs += g[r * n + c];
                             for (std::size_t c = 0; c < n; ++c) {
                               d[r * n + c] += g[r * n + c] - std::exp(y[r * n + c]) * gs;
                             }
                           }
                         });
}

Var split_heads(Var x, std::size_t batch, std::size_t len, std::size_t heads) {
  const Tensor& X = x.value();
  require(heads > 0 && X.cols() % heads == 0, "split_heads", "width not divisible by heads");
  require(X.rows() == batch * len, "split_heads", "rows must equal batch * len");
  const std::size_t width = X.cols(), dh = width / heads;
  Tensor out({batch * heads, len, dh});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t l = 0; l < len; ++l) {
      const double* src = X.data().data() + (b * len + l) * width;
      for (std::size_t h = 0; h < heads; ++h) {
        std::copy(src + h * dh, src + (h + 1) * dh,
                  out.data().data() + ((b * heads + h) * len + l) * dh);
      }
    }
  }
  const std::size_t ix = x.id();
  return x.tape().record("split_heads", std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    auto d = t.grad_buffer(ix);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t l = 0; l < len; ++l) {
        for (std::size_t h = 0; h < heads; ++h) {
          const double* gs = g.data() + ((b * heads + h) * len + l) * dh;
          double* ds = d.data() + (b * len + l) * width + h * dh;
          for (std::size_t c = 0; c < dh; ++c) ds[c] += gs[c];
        }
      }
    }
  });
}

Var merge_heads(Var x, std::size_t batch, std::size_t len, std::size_t heads) {
  const Tensor& X = x.value();
  require(X.rank() == 3 && X.dim(0) == batch * heads && X.dim(1) == len, "merge_heads",
          "expected [(B*H) x L x dh], got " + shape_string(X.shape()));
  const std::size_t dh = X.dim(2), width = dh * heads;
  Tensor out({batch * len, width});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t l = 0; l < len; ++l) {
        const double* src = X.data().data() + ((b * heads + h) * len + l) * dh;
        std::copy(src, src + dh, out.data().data() + (b * len + l) * width + h * dh);
      }
    }
  }
  const std::size_t ix = x.id();
  return x.tape().record("merge_heads", std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    auto d = t.grad_buffer(ix);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t l = 0; l < len; ++l) {
          const double* gs = g.data() + (b * len + l) * width + h * dh;
          double* ds = d.data() + ((b * heads + h) * len + l) * dh;
          for (std::size_t c = 0; c < dh; ++c) ds[c] += gs[c];
        }
      }
    }
  });
}

Var combine_rows(Var x, const RowMix& mix) {
  const Tensor& X = x.value();
  const std::size_t cols = X.cols(), rows = X.rows();
  require(mix.offsets.size() >= 1 && mix.offsets.back() == mix.src.size() &&
              mix.src.size() == mix.weight.size(),
          "combine_rows", "malformed row mix");
  for (std::size_t s : mix.src) {
    require(s < rows, "combine_rows",
            "source row " + std::to_string(s) + " out of range " + std::to_string(rows));
  }
  const std::size_t out_rows = mix.out_rows();
  Tensor out({out_rows, cols});
  const auto& kern = kernels::active();
  for (std::size_t r = 0; r < out_rows; ++r) {
    for (std::size_t e = mix.offsets[r]; e < mix.offsets[r + 1]; ++e) {
      kern.axpy(cols, mix.weight[e], X.data().data() + mix.src[e] * cols,
                out.data().data() + r * cols);
    }
  }
  const std::size_t ix = x.id();
  return x.tape().record("combine_rows", std::move(out), {ix},
                         [=, mix = mix](Tape& t, std::size_t self) {
                           const auto& kern = kernels::active();
                           const auto g = t.grad_buffer(self);
                           auto d = t.grad_buffer(ix);
                           for (std::size_t r = 0; r < out_rows; ++r) {
                             for (std::size_t e = mix.offsets[r]; e < mix.offsets[r + 1]; ++e) {
                               kern.axpy(cols, mix.weight[e], g.data() + r * cols,
                                         d.data() + mix.src[e] * cols);
                             }
                           }
                         });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  Tape& t = parts.front().tape();
  const std::size_t cols = parts.front().value().cols();
  std::size_t total = 0;
  std::vector<std::size_t> ids, starts;
  for (const Var& p : parts) {
    same_tape(parts.front(), p, "concat_rows");
    require(p.value().cols() == cols, "concat_rows", "column counts differ");
    ids.push_back(p.id());
    starts.push_back(total * cols);
    total += p.value().rows();
  }
  Tensor out({total, cols});
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto src = parts[i].value().data();
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(starts[i]));
  }
  return t.record("concat_rows", std::move(out), ids,
                  [ids, starts](Tape& t, std::size_t self) {
                    const auto g = t.grad_buffer(self);
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                      if (!t.needs_grad(ids[i])) continue;
                      auto d = t.grad_buffer(ids[i]);
                      for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[starts[i] + j];
                    }
                  });
}

Var pick(Var x, std::span<const std::size_t> ids) {
  const Tensor& X = x.value();
  const std::size_t cols = X.cols(), rows = X.rows();
  require(ids.size() == rows, "pick", "need one index per row");
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    if (ids[r] >= cols) {
      throw DomainError("pick: index " + std::to_string(ids[r]) + " out of range [0, " +
                        std::to_string(cols) + ")");
    }
    out[r] = X[r * cols + ids[r]];
  }
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  const std::size_t ix = x.id();
  return x.tape().record("pick", std::move(out), {ix},
                         [=, idv = std::move(idv)](Tape& t, std::size_t self) {
                           const auto g = t.grad_buffer(self);
                           auto d = t.grad_buffer(ix);
                           for (std::size_t r = 0; r < rows; ++r) d[r * cols + idv[r]] += g[r];
                         });
}

Var nll_rows(Var logits, std::span<const std::size_t> labels) {
  const Tensor& X = logits.value();
  const std::size_t cols = X.cols(), rows = X.rows();
  require(labels.size() == rows, "nll_rows", "need one label per row");
  Tensor probs = softmax_rows(X);
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] >= cols) {
      throw DomainError("cross_entropy: label " + std::to_string(labels[r]) +
                        " out of range [0, " + std::to_string(cols) + ")");
    }
    const double* xr = X.data().data() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(xr[c] - mx);
    out[r] = mx + std::log(s) - xr[labels[r]];
  }
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  const std::size_t ix = logits.id();
  return logits.tape().record(
      "nll_rows", std::move(out), {ix},
      [=, lab = std::move(lab), probs = std::move(probs)](Tape& t, std::size_t self) {
        const auto g = t.grad_buffer(self);
        auto d = t.grad_buffer(ix);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[r] * probs[r * cols + c];
          d[r * cols + lab[r]] -= g[r];
        }
      });
}

Var cross_entropy(Var logits, std::span<const std::size_t> labels) {
  return mean(nll_rows(logits, labels));
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t ix = x.id();
  return x.tape().record("sum", Tensor::scalar(s), {ix}, [=](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0];
    for (double& d : t.grad_buffer(ix)) d += g;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  require(n > 0, "mean", "empty input");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var weighted_sum(Var x, std::span<const double> weights) {
  const auto xv = x.value().data();
  require(weights.size() == xv.size(), "weighted_sum", "need one weight per element");
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += weights[i] * xv[i];
  std::vector<double> w(weights.begin(), weights.end());
  const std::size_t ix = x.id();
  return x.tape().record("weighted_sum", Tensor::scalar(s), {ix},
                         [=, w = std::move(w)](Tape& t, std::size_t self) {
                           const double g = t.grad_buffer(self)[0];
                           auto d = t.grad_buffer(ix);
                           for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * w[i];
                         });
}

}  // namespace mergemix::nx
