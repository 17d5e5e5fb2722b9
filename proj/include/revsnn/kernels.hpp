#pragma once

#include <cmath>
#include <optional>
#include <type_traits>
#include <span>
#include <utility>
#include <vector>

#include "revsnn/errors.hpp"
#include "revsnn/opcount.hpp"
#include "revsnn/tensor.hpp"

// Deterministic scalar kernels with explicit forward and vector-Jacobian
// product entry points. Every reduction runs left-to-right in a fixed loop
// order; there is no pairwise/tree reordering, so two executions on identical
// inputs are bit-identical and a replayed pass reproduces the original bits.

namespace revsnn::kernels {

inline void count(OpCounter* ops, OpKind kind, u64 n) {
  if (ops) ops->add(kind, n);
}

// ---------------------------------------------------------------------------
// conv2d

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w,
                 std::type_identity_t<const Tensor<S>*> bias, i64 stride, i64 pad,
                 OpCounter* ops = nullptr) {
  if (x.ndim() != 4) throw ShapeError("conv2d", "input must be [B,C,H,W], got " + shape_str(x.shape()));
  if (w.ndim() != 4) throw ShapeError("conv2d", "weight must be [Co,Ci,kh,kw], got " + shape_str(w.shape()));
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  const i64 B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const i64 Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != Ci) throw ShapeError("conv2d", 1, w.dim(1), Ci);
  if (kh > H + 2 * pad) throw ShapeError("conv2d", 2, H + 2 * pad, kh);
  if (kw > W + 2 * pad) throw ShapeError("conv2d", 3, W + 2 * pad, kw);
  if (bias && bias->numel() != Co) throw ShapeError("conv2d", 0, Co, bias->numel());
  const i64 Ho = (H + 2 * pad - kh) / stride + 1;
  const i64 Wo = (W + 2 * pad - kw) / stride + 1;

  Tensor<S> y({B, Co, Ho, Wo});
  const S* xd = x.data();
  const S* wd = w.data();
  S* yd = y.data();
  for (i64 b = 0; b < B; ++b)
    for (i64 co = 0; co < Co; ++co)
      for (i64 oh = 0; oh < Ho; ++oh)
        for (i64 ow = 0; ow < Wo; ++ow) {
          S acc = bias ? (*bias)[co] : S(0);
          for (i64 ci = 0; ci < Ci; ++ci)
            for (i64 i = 0; i < kh; ++i) {
              const i64 ih = oh * stride - pad + i;
              if (ih < 0 || ih >= H) continue;
              const S* xrow = xd + ((b * Ci + ci) * H + ih) * W;
              const S* wrow = wd + ((co * Ci + ci) * kh + i) * kw;
              for (i64 j = 0; j < kw; ++j) {
                const i64 iw = ow * stride - pad + j;
                if (iw < 0 || iw >= W) continue;
                acc += xrow[iw] * wrow[j];
              }
            }
          yd[((b * Co + co) * Ho + oh) * Wo + ow] = acc;
        }
  count(ops, OpKind::conv, static_cast<u64>(B * Co * Ho * Wo * Ci * kh * kw));
  return y;
}

template <typename S>
struct Conv2dGrads {
  Tensor<S> dx, dw, dbias;  // dbias undefined when the forward had no bias
};

template <typename S>
Conv2dGrads<S> conv2d_vjp(const Tensor<S>& x, const Tensor<S>& w, bool has_bias, i64 stride,
                          i64 pad, const Tensor<S>& gout, OpCounter* ops = nullptr) {
  const i64 B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const i64 Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const i64 Ho = gout.dim(2), Wo = gout.dim(3);
  if (gout.dim(0) != B) throw ShapeError("conv2d_vjp", 0, B, gout.dim(0));
  if (gout.dim(1) != Co) throw ShapeError("conv2d_vjp", 1, Co, gout.dim(1));

  Conv2dGrads<S> g;
  g.dx = Tensor<S>::zeros(x.shape());
  g.dw = Tensor<S>::zeros(w.shape());
  const S* xd = x.data();
  const S* wd = w.data();
  const S* gd = gout.data();
  S* dxd = g.dx.data();
  S* dwd = g.dw.data();

  // Input gradient: scatter in a fixed (b, co, oh, ow, ci, i, j) order.
  for (i64 b = 0; b < B; ++b)
    for (i64 co = 0; co < Co; ++co)
      for (i64 oh = 0; oh < Ho; ++oh)
        for (i64 ow = 0; ow < Wo; ++ow) {
          const S gv = gd[((b * Co + co) * Ho + oh) * Wo + ow];
          for (i64 ci = 0; ci < Ci; ++ci)
            for (i64 i = 0; i < kh; ++i) {
              const i64 ih = oh * stride - pad + i;
              if (ih < 0 || ih >= H) continue;
              S* dxrow = dxd + ((b * Ci + ci) * H + ih) * W;
              const S* wrow = wd + ((co * Ci + ci) * kh + i) * kw;
              for (i64 j = 0; j < kw; ++j) {
                const i64 iw = ow * stride - pad + j;
                if (iw < 0 || iw >= W) continue;
                dxrow[iw] += gv * wrow[j];
              }
            }
          // Weight gradient shares the same traversal so the whole vjp is
          // one pass over the output.
          for (i64 ci = 0; ci < Ci; ++ci)
            for (i64 i = 0; i < kh; ++i) {
              const i64 ih = oh * stride - pad + i;
              if (ih < 0 || ih >= H) continue;
              const S* xrow = xd + ((b * Ci + ci) * H + ih) * W;
              S* dwrow = dwd + ((co * Ci + ci) * kh + i) * kw;
              for (i64 j = 0; j < kw; ++j) {
                const i64 iw = ow * stride - pad + j;
                if (iw < 0 || iw >= W) continue;
                dwrow[j] += gv * xrow[iw];
              }
            }
        }
  if (has_bias) {
    g.dbias = Tensor<S>::zeros({Co});
    for (i64 b = 0; b < B; ++b)
      for (i64 co = 0; co < Co; ++co)
        for (i64 k = 0; k < Ho * Wo; ++k)
          g.dbias[co] += gd[(b * Co + co) * Ho * Wo + k];
    count(ops, OpKind::elementwise, static_cast<u64>(B * Co * Ho * Wo));
  }
  count(ops, OpKind::conv, 2 * static_cast<u64>(B * Co * Ho * Wo * Ci * kh * kw));
  return g;
}

// ---------------------------------------------------------------------------
// batch normalization

template <typename S>
struct BnStats {
  Tensor<S> mean;  // [C]
  Tensor<S> var;   // [C], biased
};

enum class BnMode { train, replay, eval };

namespace detail {
template <typename S>
inline std::pair<i64, i64> channel_strides(const Tensor<S>& x, int channel_axis) {
  if (channel_axis < 0 || channel_axis >= x.ndim())
    throw ShapeError("batchnorm", "channel axis " + std::to_string(channel_axis) +
                                      " out of range for " + shape_str(x.shape()));
  i64 inner = 1;
  for (int a = channel_axis + 1; a < x.ndim(); ++a) inner *= x.dim(a);
  return {x.dim(channel_axis), inner};
}
}  // namespace detail

/// Batch statistics over all non-channel axes of every tensor in `xs`,
/// accumulated left-to-right across the list (the unrolled time axis folds
/// into the batch axis this way).
template <typename S>
BnStats<S> batchnorm_stats(std::span<const Tensor<S>* const> xs, int channel_axis,
                           OpCounter* ops = nullptr) {
  if (xs.empty()) throw ContractError("batchnorm: empty input list");
  auto [C, inner] = detail::channel_strides(*xs[0], channel_axis);
  BnStats<S> st;
  st.mean = Tensor<S>::zeros({C});
  st.var = Tensor<S>::zeros({C});
  u64 m = 0;
  for (const Tensor<S>* x : xs) {
    auto [c2, inner2] = detail::channel_strides(*x, channel_axis);
    if (c2 != C) throw ShapeError("batchnorm", channel_axis, C, c2);
    m += static_cast<u64>(x->numel() / C);
  }
  for (const Tensor<S>* x : xs) {
    const S* xd = x->data();
    const i64 n = x->numel();
    for (i64 idx = 0; idx < n; ++idx) st.mean[(idx / inner) % C] += xd[idx];
  }
  for (i64 c = 0; c < C; ++c) st.mean[c] /= static_cast<S>(m);
  for (const Tensor<S>* x : xs) {
    const S* xd = x->data();
    const i64 n = x->numel();
    for (i64 idx = 0; idx < n; ++idx) {
      const S d = xd[idx] - st.mean[(idx / inner) % C];
      st.var[(idx / inner) % C] += d * d;
    }
  }
  for (i64 c = 0; c < C; ++c) st.var[c] /= static_cast<S>(m);
  count(ops, OpKind::norm, 2 * static_cast<u64>(m) * static_cast<u64>(C));
  return st;
}

template <typename S>
Tensor<S> batchnorm_apply(const Tensor<S>& x, const BnStats<S>& st, const Tensor<S>& gamma,
                          const Tensor<S>& beta, S eps, int channel_axis,
                          OpCounter* ops = nullptr,
                          std::type_identity_t<Tensor<S>*> xhat_out = nullptr) {
  auto [C, inner] = detail::channel_strides(x, channel_axis);
  if (gamma.numel() != C) throw ShapeError("batchnorm", channel_axis, C, gamma.numel());
  if (beta.numel() != C) throw ShapeError("batchnorm", channel_axis, C, beta.numel());
  std::vector<S> inv_std(static_cast<std::size_t>(C));
  for (i64 c = 0; c < C; ++c) inv_std[static_cast<std::size_t>(c)] = S(1) / std::sqrt(st.var[c] + eps);
  Tensor<S> y(x.shape());
  if (xhat_out) *xhat_out = Tensor<S>(x.shape());
  const S* xd = x.data();
  S* yd = y.data();
  const i64 n = x.numel();
  for (i64 idx = 0; idx < n; ++idx) {
    const i64 c = (idx / inner) % C;
    const S xh = (xd[idx] - st.mean[c]) * inv_std[static_cast<std::size_t>(c)];
    if (xhat_out) (*xhat_out)[idx] = xh;
    yd[idx] = gamma[c] * xh + beta[c];
  }
  count(ops, OpKind::norm, 2 * static_cast<u64>(n));
  return y;
}

/// Per-channel reductions the train-mode backward needs: dgamma += sum(dy *
/// xhat), dbeta += sum(dy). Accumulated left-to-right.
template <typename S>
void batchnorm_vjp_reduce(const Tensor<S>& dy, const Tensor<S>& xhat, int channel_axis,
                          Tensor<S>& dgamma, Tensor<S>& dbeta, OpCounter* ops = nullptr) {
  auto [C, inner] = detail::channel_strides(dy, channel_axis);
  const S* dyd = dy.data();
  const S* xh = xhat.data();
  const i64 n = dy.numel();
  for (i64 idx = 0; idx < n; ++idx) {
    const i64 c = (idx / inner) % C;
    dgamma[c] += dyd[idx] * xh[idx];
    dbeta[c] += dyd[idx];
  }
  count(ops, OpKind::norm, 2 * static_cast<u64>(n));
}

/// Train-mode input gradient given the full-fold reductions. `m_total` is
/// the number of folded samples per channel across the whole sequence.
template <typename S>
Tensor<S> batchnorm_vjp_dx(const Tensor<S>& dy, const Tensor<S>& xhat, const BnStats<S>& st,
                           const Tensor<S>& gamma, S eps, int channel_axis,
                           const Tensor<S>& sum_dy_xhat, const Tensor<S>& sum_dy, u64 m_total,
                           OpCounter* ops = nullptr) {
  auto [C, inner] = detail::channel_strides(dy, channel_axis);
  std::vector<S> coef(static_cast<std::size_t>(C));
  for (i64 c = 0; c < C; ++c)
    coef[static_cast<std::size_t>(c)] = gamma[c] / std::sqrt(st.var[c] + eps);
  const S inv_m = S(1) / static_cast<S>(m_total);
  Tensor<S> dx(dy.shape());
  const S* dyd = dy.data();
  const S* xh = xhat.data();
  S* dxd = dx.data();
  const i64 n = dy.numel();
  for (i64 idx = 0; idx < n; ++idx) {
    const i64 c = (idx / inner) % C;
    dxd[idx] = coef[static_cast<std::size_t>(c)] *
               (dyd[idx] - sum_dy[c] * inv_m - xh[idx] * sum_dy_xhat[c] * inv_m);
  }
  count(ops, OpKind::norm, 3 * static_cast<u64>(n));
  return dx;
}

template <typename S>
struct BnResult {
  Tensor<S> y;
  BnStats<S> stats;
};

/// Single-tensor convenience form of the normalization contract: train mode
/// computes batch statistics (and updates running statistics when given),
/// replay applies `cached` exactly, eval uses `running`.
template <typename S>
BnResult<S> batchnorm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                      BnMode mode, const BnStats<S>* cached = nullptr,
                      BnStats<S>* running = nullptr, S eps = S(1e-5), S momentum = S(0.1),
                      int channel_axis = 1, OpCounter* ops = nullptr) {
  BnResult<S> r;
  switch (mode) {
    case BnMode::train: {
      const Tensor<S>* one[1] = {&x};
      r.stats = batchnorm_stats<S>(std::span<const Tensor<S>* const>(one, 1), channel_axis, ops);
      if (running) {
        for (i64 c = 0; c < r.stats.mean.numel(); ++c) {
          running->mean[c] = (S(1) - momentum) * running->mean[c] + momentum * r.stats.mean[c];
          running->var[c] = (S(1) - momentum) * running->var[c] + momentum * r.stats.var[c];
        }
      }
      break;
    }
    case BnMode::replay:
      if (!cached)
        throw ContractError("batchnorm: replay mode requires cached batch statistics");
      r.stats.mean = cached->mean;
      r.stats.var = cached->var;
      break;
    case BnMode::eval:
      if (!running) throw ContractError("batchnorm: eval mode requires running statistics");
      r.stats.mean = running->mean;
      r.stats.var = running->var;
      break;
  }
  r.y = batchnorm_apply(x, r.stats, gamma, beta, eps, channel_axis, ops, nullptr);
  return r;
}

// ---------------------------------------------------------------------------
// pooling

template <typename S>
Tensor<S> avgpool2d(const Tensor<S>& x, i64 k, i64 stride, i64 pad = 0,
                    OpCounter* ops = nullptr) {
  if (x.ndim() != 4) throw ShapeError("avgpool2d", "input must be [B,C,H,W]");
  const i64 B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (k > H + 2 * pad) throw ShapeError("avgpool2d", 2, H + 2 * pad, k);
  if (k > W + 2 * pad) throw ShapeError("avgpool2d", 3, W + 2 * pad, k);
  const i64 Ho = (H + 2 * pad - k) / stride + 1;
  const i64 Wo = (W + 2 * pad - k) / stride + 1;
  Tensor<S> y({B, C, Ho, Wo});
  const S inv = S(1) / static_cast<S>(k * k);
  const S* xd = x.data();
  S* yd = y.data();
  for (i64 bc = 0; bc < B * C; ++bc)
    for (i64 oh = 0; oh < Ho; ++oh)
      for (i64 ow = 0; ow < Wo; ++ow) {
        S acc = 0;
        for (i64 i = 0; i < k; ++i) {
          const i64 ih = oh * stride - pad + i;
          if (ih < 0 || ih >= H) continue;
          for (i64 j = 0; j < k; ++j) {
            const i64 iw = ow * stride - pad + j;
            if (iw < 0 || iw >= W) continue;
            acc += xd[(bc * H + ih) * W + iw];
          }
        }
        yd[(bc * Ho + oh) * Wo + ow] = acc * inv;
      }
  count(ops, OpKind::pool, static_cast<u64>(B * C * Ho * Wo * k * k));
  return y;
}

template <typename S>
Tensor<S> avgpool2d_vjp(const std::vector<i64>& x_shape, i64 k, i64 stride, i64 pad,
                        const Tensor<S>& gout, OpCounter* ops = nullptr) {
  const i64 B = x_shape[0], C = x_shape[1], H = x_shape[2], W = x_shape[3];
  const i64 Ho = gout.dim(2), Wo = gout.dim(3);
  Tensor<S> dx = Tensor<S>::zeros(x_shape);
  const S inv = S(1) / static_cast<S>(k * k);
  const S* gd = gout.data();
  S* dxd = dx.data();
  for (i64 bc = 0; bc < B * C; ++bc)
    for (i64 oh = 0; oh < Ho; ++oh)
      for (i64 ow = 0; ow < Wo; ++ow) {
        const S gv = gd[(bc * Ho + oh) * Wo + ow] * inv;
        for (i64 i = 0; i < k; ++i) {
          const i64 ih = oh * stride - pad + i;
          if (ih < 0 || ih >= H) continue;
          for (i64 j = 0; j < k; ++j) {
            const i64 iw = ow * stride - pad + j;
            if (iw < 0 || iw >= W) continue;
            dxd[(bc * H + ih) * W + iw] += gv;
          }
        }
      }
  count(ops, OpKind::pool, static_cast<u64>(B * C * Ho * Wo * k * k));
  return dx;
}

/// Max pooling; returns (values, flat argmax indices within each [H,W]
/// plane). Ties resolve to the first maximum in row-major order.
template <typename S>
std::pair<Tensor<S>, Tensor<S>> maxpool2d(const Tensor<S>& x, i64 k, i64 stride,
                                          OpCounter* ops = nullptr) {
  (void)ops;  // comparisons, no multiply-adds
  if (x.ndim() != 4) throw ShapeError("maxpool2d", "input must be [B,C,H,W]");
  const i64 B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (k > H) throw ShapeError("maxpool2d", 2, H, k);
  if (k > W) throw ShapeError("maxpool2d", 3, W, k);
  const i64 Ho = (H - k) / stride + 1;
  const i64 Wo = (W - k) / stride + 1;
  Tensor<S> y({B, C, Ho, Wo});
  Tensor<S> idx({B, C, Ho, Wo});
  const S* xd = x.data();
  for (i64 bc = 0; bc < B * C; ++bc)
    for (i64 oh = 0; oh < Ho; ++oh)
      for (i64 ow = 0; ow < Wo; ++ow) {
        i64 best = (oh * stride) * W + ow * stride;
        S bv = xd[bc * H * W + best];
        for (i64 i = 0; i < k; ++i)
          for (i64 j = 0; j < k; ++j) {
            const i64 fl = (oh * stride + i) * W + (ow * stride + j);
            const S v = xd[bc * H * W + fl];
            if (v > bv) {
              bv = v;
              best = fl;
            }
          }
        y[(bc * Ho + oh) * Wo + ow] = bv;
        idx[(bc * Ho + oh) * Wo + ow] = static_cast<S>(best);
      }
  return {std::move(y), std::move(idx)};
}

template <typename S>
Tensor<S> maxpool2d_vjp(const std::vector<i64>& x_shape, const Tensor<S>& idx,
                        const Tensor<S>& gout, OpCounter* ops = nullptr) {
  (void)ops;
  const i64 planes = x_shape[0] * x_shape[1];
  const i64 hw = x_shape[2] * x_shape[3];
  const i64 per = gout.numel() / planes;
  Tensor<S> dx = Tensor<S>::zeros(x_shape);
  for (i64 bc = 0; bc < planes; ++bc)
    for (i64 o = 0; o < per; ++o)
      dx[bc * hw + static_cast<i64>(idx[bc * per + o])] += gout[bc * per + o];
  return dx;
}

// ---------------------------------------------------------------------------
// linear

template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w,
                 std::type_identity_t<const Tensor<S>*> bias, OpCounter* ops = nullptr) {
  if (x.ndim() != 2) throw ShapeError("linear", "input must be [N,Din], got " + shape_str(x.shape()));
  if (w.ndim() != 2) throw ShapeError("linear", "weight must be [Dout,Din]");
  const i64 N = x.dim(0), Di = x.dim(1), Do = w.dim(0);
  if (w.dim(1) != Di) throw ShapeError("linear", 1, Di, w.dim(1));
  if (bias && bias->numel() != Do) throw ShapeError("linear", 0, Do, bias->numel());
  Tensor<S> y({N, Do});
  for (i64 n = 0; n < N; ++n)
    for (i64 o = 0; o < Do; ++o) {
      S acc = bias ? (*bias)[o] : S(0);
      const S* xr = x.data() + n * Di;
      const S* wr = w.data() + o * Di;
      for (i64 i = 0; i < Di; ++i) acc += xr[i] * wr[i];
      y[n * Do + o] = acc;
    }
  count(ops, OpKind::linear, static_cast<u64>(N * Di * Do));
  return y;
}

template <typename S>
struct LinearGrads {
  Tensor<S> dx, dw, dbias;
};

template <typename S>
LinearGrads<S> linear_vjp(const Tensor<S>& x, const Tensor<S>& w, bool has_bias,
                          const Tensor<S>& gout, OpCounter* ops = nullptr) {
  const i64 N = x.dim(0), Di = x.dim(1), Do = w.dim(0);
  if (gout.dim(0) != N) throw ShapeError("linear_vjp", 0, N, gout.dim(0));
  if (gout.dim(1) != Do) throw ShapeError("linear_vjp", 1, Do, gout.dim(1));
  LinearGrads<S> g;
  g.dx = Tensor<S>::zeros({N, Di});
  g.dw = Tensor<S>::zeros({Do, Di});
  for (i64 n = 0; n < N; ++n)
    for (i64 o = 0; o < Do; ++o) {
      const S gv = gout[n * Do + o];
      const S* wr = w.data() + o * Di;
      const S* xr = x.data() + n * Di;
      S* dxr = g.dx.data() + n * Di;
      S* dwr = g.dw.data() + o * Di;
      for (i64 i = 0; i < Di; ++i) {
        dxr[i] += gv * wr[i];
        dwr[i] += gv * xr[i];
      }
    }
  if (has_bias) {
    g.dbias = Tensor<S>::zeros({Do});
    for (i64 n = 0; n < N; ++n)
      for (i64 o = 0; o < Do; ++o) g.dbias[o] += gout[n * Do + o];
    count(ops, OpKind::elementwise, static_cast<u64>(N * Do));
  }
  count(ops, OpKind::linear, 2 * static_cast<u64>(N * Di * Do));
  return g;
}

// ---------------------------------------------------------------------------
// spike attention products (softmax-free). q, k, v: [B,N,D] split into heads.

template <typename S>
Tensor<S> attn_scores(const Tensor<S>& q, const Tensor<S>& k, i64 heads,
                      OpCounter* ops = nullptr) {
  check_same_shape("attn_scores", q, k);
  const i64 B = q.dim(0), N = q.dim(1), D = q.dim(2);
  if (D % heads != 0) throw ShapeError("attn_scores", 2, heads * (D / heads), D);
  const i64 dh = D / heads;
  Tensor<S> a({B, heads, N, N});
  for (i64 b = 0; b < B; ++b)
    for (i64 h = 0; h < heads; ++h)
      for (i64 i = 0; i < N; ++i)
        for (i64 j = 0; j < N; ++j) {
          S acc = 0;
          const S* qr = q.data() + (b * N + i) * D + h * dh;
          const S* kr = k.data() + (b * N + j) * D + h * dh;
          for (i64 d = 0; d < dh; ++d) acc += qr[d] * kr[d];
          a[((b * heads + h) * N + i) * N + j] = acc;
        }
  count(ops, OpKind::matmul, static_cast<u64>(B * heads * N * N * dh));
  return a;
}

template <typename S>
struct AttnScoresGrads {
  Tensor<S> dq, dk;
};

template <typename S>
AttnScoresGrads<S> attn_scores_vjp(const Tensor<S>& q, const Tensor<S>& k, i64 heads,
                                   const Tensor<S>& da, OpCounter* ops = nullptr) {
  const i64 B = q.dim(0), N = q.dim(1), D = q.dim(2), dh = D / heads;
  AttnScoresGrads<S> g;
  g.dq = Tensor<S>::zeros(q.shape());
  g.dk = Tensor<S>::zeros(k.shape());
  for (i64 b = 0; b < B; ++b)
    for (i64 h = 0; h < heads; ++h)
      for (i64 i = 0; i < N; ++i)
        for (i64 j = 0; j < N; ++j) {
          const S gv = da[((b * heads + h) * N + i) * N + j];
          const S* qr = q.data() + (b * N + i) * D + h * dh;
          const S* kr = k.data() + (b * N + j) * D + h * dh;
          S* dqr = g.dq.data() + (b * N + i) * D + h * dh;
          S* dkr = g.dk.data() + (b * N + j) * D + h * dh;
          for (i64 d = 0; d < dh; ++d) {
            dqr[d] += gv * kr[d];
            dkr[d] += gv * qr[d];
          }
        }
  count(ops, OpKind::matmul, 2 * static_cast<u64>(B * heads * N * N * dh));
  return g;
}

template <typename S>
Tensor<S> attn_apply(const Tensor<S>& a, const Tensor<S>& v, i64 heads, S scale,
                     OpCounter* ops = nullptr) {
  const i64 B = v.dim(0), N = v.dim(1), D = v.dim(2), dh = D / heads;
  if (a.dim(2) != N) throw ShapeError("attn_apply", 2, N, a.dim(2));
  Tensor<S> y(v.shape());
  for (i64 b = 0; b < B; ++b)
    for (i64 h = 0; h < heads; ++h)
      for (i64 i = 0; i < N; ++i)
        for (i64 d = 0; d < dh; ++d) {
          S acc = 0;
          for (i64 j = 0; j < N; ++j)
            acc += a[((b * heads + h) * N + i) * N + j] * v[(b * N + j) * D + h * dh + d];
          y[(b * N + i) * D + h * dh + d] = acc * scale;
        }
  count(ops, OpKind::matmul, static_cast<u64>(B * heads * N * N * dh));
  return y;
}

template <typename S>
struct AttnApplyGrads {
  Tensor<S> da, dv;
};

template <typename S>
AttnApplyGrads<S> attn_apply_vjp(const Tensor<S>& a, const Tensor<S>& v, i64 heads, S scale,
                                 const Tensor<S>& gout, OpCounter* ops = nullptr) {
  const i64 B = v.dim(0), N = v.dim(1), D = v.dim(2), dh = D / heads;
  AttnApplyGrads<S> g;
  g.da = Tensor<S>::zeros(a.shape());
  g.dv = Tensor<S>::zeros(v.shape());
  for (i64 b = 0; b < B; ++b)
    for (i64 h = 0; h < heads; ++h)
      for (i64 i = 0; i < N; ++i)
        for (i64 d = 0; d < dh; ++d) {
          const S gv = gout[(b * N + i) * D + h * dh + d] * scale;
          for (i64 j = 0; j < N; ++j) {
            g.da[((b * heads + h) * N + i) * N + j] += gv * v[(b * N + j) * D + h * dh + d];
            g.dv[(b * N + j) * D + h * dh + d] += gv * a[((b * heads + h) * N + i) * N + j];
          }
        }
  count(ops, OpKind::matmul, 2 * static_cast<u64>(B * heads * N * N * dh));
  return g;
}

// ---------------------------------------------------------------------------
// elementwise and layout helpers

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b, OpCounter* ops = nullptr) {
  check_same_shape("add", a, b);
  Tensor<S> y(a.shape());
  for (i64 i = 0; i < a.numel(); ++i) y[i] = a[i] + b[i];
  count(ops, OpKind::elementwise, static_cast<u64>(a.numel()));
  return y;
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b, OpCounter* ops = nullptr) {
  check_same_shape("sub", a, b);
  Tensor<S> y(a.shape());
  for (i64 i = 0; i < a.numel(); ++i) y[i] = a[i] - b[i];
  count(ops, OpKind::elementwise, static_cast<u64>(a.numel()));
  return y;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S s, OpCounter* ops = nullptr) {
  Tensor<S> y(a.shape());
  for (i64 i = 0; i < a.numel(); ++i) y[i] = a[i] * s;
  count(ops, OpKind::elementwise, static_cast<u64>(a.numel()));
  return y;
}

/// [B,C,H,W] -> token layout [B,H*W,C].
template <typename S>
Tensor<S> tokens_from_image(const Tensor<S>& x) {
  const i64 B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor<S> y({B, H * W, C});
  for (i64 b = 0; b < B; ++b)
    for (i64 c = 0; c < C; ++c)
      for (i64 p = 0; p < H * W; ++p) y[(b * H * W + p) * C + c] = x[(b * C + c) * H * W + p];
  return y;
}

template <typename S>
Tensor<S> tokens_from_image_vjp(const Tensor<S>& dtok, i64 C, i64 H, i64 W) {
  const i64 B = dtok.dim(0);
  Tensor<S> dx({B, C, H, W});
  for (i64 b = 0; b < B; ++b)
    for (i64 c = 0; c < C; ++c)
      for (i64 p = 0; p < H * W; ++p) dx[(b * C + c) * H * W + p] = dtok[(b * H * W + p) * C + c];
  return dx;
}

/// Mean over the token axis: [B,N,D] -> [B,D].
template <typename S>
Tensor<S> mean_tokens(const Tensor<S>& x, OpCounter* ops = nullptr) {
  const i64 B = x.dim(0), N = x.dim(1), D = x.dim(2);
  Tensor<S> y({B, D});
  for (i64 b = 0; b < B; ++b)
    for (i64 n = 0; n < N; ++n)
      for (i64 d = 0; d < D; ++d) y[b * D + d] += x[(b * N + n) * D + d];
  for (i64 i = 0; i < y.numel(); ++i) y[i] /= static_cast<S>(N);
  count(ops, OpKind::elementwise, static_cast<u64>(x.numel()));
  return y;
}

template <typename S>
Tensor<S> mean_tokens_vjp(const Tensor<S>& dy, i64 N, OpCounter* ops = nullptr) {
  const i64 B = dy.dim(0), D = dy.dim(1);
  Tensor<S> dx({B, N, D});
  for (i64 b = 0; b < B; ++b)
    for (i64 n = 0; n < N; ++n)
      for (i64 d = 0; d < D; ++d) dx[(b * N + n) * D + d] = dy[b * D + d] / static_cast<S>(N);
  count(ops, OpKind::elementwise, static_cast<u64>(dx.numel()));
  return dx;
}

/// Global average pool: [B,C,H,W] -> [B,C].
template <typename S>
Tensor<S> global_avgpool(const Tensor<S>& x, OpCounter* ops = nullptr) {
  const i64 B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor<S> y({B, C});
  for (i64 bc = 0; bc < B * C; ++bc) {
    S acc = 0;
    for (i64 p = 0; p < HW; ++p) acc += x[bc * HW + p];
    y[bc] = acc / static_cast<S>(HW);
  }
  count(ops, OpKind::pool, static_cast<u64>(x.numel()));
  return y;
}

template <typename S>
Tensor<S> global_avgpool_vjp(const Tensor<S>& dy, i64 H, i64 W, OpCounter* ops = nullptr) {
  const i64 B = dy.dim(0), C = dy.dim(1);
  Tensor<S> dx({B, C, H, W});
  for (i64 bc = 0; bc < B * C; ++bc)
    for (i64 p = 0; p < H * W; ++p) dx[bc * H * W + p] = dy[bc] / static_cast<S>(H * W);
  count(ops, OpKind::pool, static_cast<u64>(dx.numel()));
  return dx;
}

/// Channel split into equal halves (two-stream partition of ResNet blocks).
template <typename S>
std::pair<Tensor<S>, Tensor<S>> split_channels(const Tensor<S>& x) {
  const i64 B = x.dim(0), C = x.dim(1);
  if (C % 2 != 0) throw ShapeError("split_channels", 1, (C / 2) * 2, C);
  const i64 inner = x.numel() / (B * C);
  const i64 h = C / 2;
  Tensor<S> a({B, h, x.dim(2), x.dim(3)});
  Tensor<S> b({B, h, x.dim(2), x.dim(3)});
  for (i64 n = 0; n < B; ++n)
    for (i64 c = 0; c < h; ++c)
      for (i64 p = 0; p < inner; ++p) {
        a[(n * h + c) * inner + p] = x[(n * C + c) * inner + p];
        b[(n * h + c) * inner + p] = x[(n * C + h + c) * inner + p];
      }
  return {std::move(a), std::move(b)};
}

template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  check_same_shape("concat_channels", a, b);
  const i64 B = a.dim(0), C = a.dim(1);
  const i64 inner = a.numel() / (B * C);
  Tensor<S> y({B, 2 * C, a.dim(2), a.dim(3)});
  for (i64 n = 0; n < B; ++n)
    for (i64 c = 0; c < C; ++c)
      for (i64 p = 0; p < inner; ++p) {
        y[(n * 2 * C + c) * inner + p] = a[(n * C + c) * inner + p];
        y[(n * 2 * C + C + c) * inner + p] = b[(n * C + c) * inner + p];
      }
  return y;
}

}  // namespace revsnn::kernels
