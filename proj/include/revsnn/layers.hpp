#pragma once

#include <array>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "revsnn/kernels.hpp"
#include "revsnn/module.hpp"
#include "revsnn/neurons.hpp"
#include "revsnn/rng.hpp"

namespace revsnn {

// ---------------------------------------------------------------------------
// primitive layers

template <typename S>
class ConvLayer : public Module<S> {
public:
  ConvLayer(i64 in_ch, i64 out_ch, i64 k, i64 stride, i64 pad, Rng& rng, bool bias = false)
      : stride_(stride), pad_(pad), has_bias_(bias) {
    Tensor<S> w({out_ch, in_ch, k, k});
    rng.fill_normal(w, 0.0, std::sqrt(2.0 / static_cast<double>(in_ch * k * k)));
    weight_ = Param<S>("weight", std::move(w));
    if (bias) bias_ = Param<S>("bias", Tensor<S>::zeros({out_ch}));
  }

  Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>* replay,
                 RunContext& ctx) override {
    (void)replay;
    Seq<S> out;
    out.reserve(xs.size());
    for (int t = 0; t < static_cast<int>(xs.size()); ++t) {
      if (mode_caches_tensors(mode) && tape)
        tape->put(this->id(), t, "x", xs[static_cast<std::size_t>(t)], MemCategory::activations);
      out.push_back(kernels::conv2d(xs[static_cast<std::size_t>(t)], weight_.value,
                                    has_bias_ ? &bias_.value : nullptr, stride_, pad_, &ctx.ops));
    }
    return out;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) override {
    Seq<S> dxs(dys.size());
    for (int t = static_cast<int>(dys.size()) - 1; t >= 0; --t) {
      const Tensor<S>& x = tape.get(this->id(), t, "x");
      auto g = kernels::conv2d_vjp(x, weight_.value, has_bias_, stride_, pad_,
                                   dys[static_cast<std::size_t>(t)], &ctx.ops);
      for (i64 i = 0; i < weight_.grad.numel(); ++i) weight_.grad[i] += g.dw[i];
      if (has_bias_)
        for (i64 i = 0; i < bias_.grad.numel(); ++i) bias_.grad[i] += g.dbias[i];
      dxs[static_cast<std::size_t>(t)] = std::move(g.dx);
    }
    return dxs;
  }

  void collect_params(std::vector<Param<S>*>& out) override {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }

  Param<S>& weight() { return weight_; }
  std::string kind() const override { return "conv2d"; }

private:
  Param<S> weight_, bias_;
  i64 stride_, pad_;
  bool has_bias_;
};

/// Batch normalization over the folded (T*B) leading axis: one statistics
/// pair per batch regardless of T, matching multi-step unrolled training.
/// Replay mode applies tape-cached statistics exactly and never touches the
/// running estimates; backward always differentiates the train-mode graph.
template <typename S>
class BatchNormLayer : public Module<S> {
public:
  BatchNormLayer(i64 channels, int channel_axis = 1, S eps = S(1e-5), S momentum = S(0.1))
      : channel_axis_(channel_axis), eps_(eps), momentum_(momentum) {
    gamma_ = Param<S>("gamma", Tensor<S>::ones({channels}));
    beta_ = Param<S>("beta", Tensor<S>::zeros({channels}));
    running_.mean = Tensor<S>::zeros({channels});
    running_.var = Tensor<S>::ones({channels});
  }

  Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>* replay,
                 RunContext& ctx) override {
    kernels::BnStats<S> st;
    if (mode == RunMode::eval) {
      st = running_;
    } else if (mode == RunMode::replay_cached) {
      if (!replay || !replay->has_stats(this->id()))
        throw ContractError("batchnorm: replay without cached batch statistics");
      st.mean = replay->stats(this->id()).mean;
      st.var = replay->stats(this->id()).var;
    } else {
      std::vector<const Tensor<S>*> ptrs;
      ptrs.reserve(xs.size());
      for (const auto& x : xs) ptrs.push_back(&x);
      st = kernels::batchnorm_stats<S>(std::span<const Tensor<S>* const>(ptrs.data(), ptrs.size()),
                                       channel_axis_, &ctx.ops);
      for (i64 c = 0; c < st.mean.numel(); ++c) {
        running_.mean[c] = (S(1) - momentum_) * running_.mean[c] + momentum_ * st.mean[c];
        running_.var[c] = (S(1) - momentum_) * running_.var[c] + momentum_ * st.var[c];
      }
    }
    Seq<S> out;
    out.reserve(xs.size());
    for (int t = 0; t < static_cast<int>(xs.size()); ++t) {
      Tensor<S> xhat;
      const bool want_xhat = mode_caches_tensors(mode) && tape;
      out.push_back(kernels::batchnorm_apply(xs[static_cast<std::size_t>(t)], st, gamma_.value,
                                             beta_.value, eps_, channel_axis_, &ctx.ops,
                                             want_xhat ? &xhat : nullptr));
      if (want_xhat)
        tape->put(this->id(), t, "xhat", std::move(xhat), MemCategory::activations);
    }
    if (mode != RunMode::eval && tape) tape->put_stats(this->id(), st.mean, st.var);
    return out;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) override {
    const auto& st = tape.stats(this->id());
    kernels::BnStats<S> stats{st.mean, st.var};
    const i64 C = st.mean.numel();
    Tensor<S> sum_dy_xhat = Tensor<S>::zeros({C});
    Tensor<S> sum_dy = Tensor<S>::zeros({C});
    u64 m_total = 0;
    for (int t = 0; t < static_cast<int>(dys.size()); ++t) {
      const Tensor<S>& xhat = tape.get(this->id(), t, "xhat");
      kernels::batchnorm_vjp_reduce(dys[static_cast<std::size_t>(t)], xhat, channel_axis_,
                                    sum_dy_xhat, sum_dy, &ctx.ops);
      m_total += static_cast<u64>(dys[static_cast<std::size_t>(t)].numel() / C);
    }
    for (i64 c = 0; c < C; ++c) {
      gamma_.grad[c] += sum_dy_xhat[c];
      beta_.grad[c] += sum_dy[c];
    }
    Seq<S> dxs(dys.size());
    for (int t = static_cast<int>(dys.size()) - 1; t >= 0; --t) {
      const Tensor<S>& xhat = tape.get(this->id(), t, "xhat");
      dxs[static_cast<std::size_t>(t)] = kernels::batchnorm_vjp_dx(
          dys[static_cast<std::size_t>(t)], xhat, stats, gamma_.value, eps_, channel_axis_,
          sum_dy_xhat, sum_dy, m_total, &ctx.ops);
    }
    return dxs;
  }

  void collect_params(std::vector<Param<S>*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

  Param<S>& gamma() { return gamma_; }
  Param<S>& beta() { return beta_; }
  kernels::BnStats<S>& running() { return running_; }
  std::string kind() const override { return "batchnorm"; }

private:
  Param<S> gamma_, beta_;
  kernels::BnStats<S> running_;
  int channel_axis_;
  S eps_, momentum_;
};

template <typename S>
class LinearLayer : public Module<S> {
public:
  LinearLayer(i64 din, i64 dout, Rng& rng, bool bias = true) : din_(din), has_bias_(bias) {
    Tensor<S> w({dout, din});
    rng.fill_normal(w, 0.0, std::sqrt(2.0 / static_cast<double>(din)));
    weight_ = Param<S>("weight", std::move(w));
    if (bias) bias_ = Param<S>("bias", Tensor<S>::zeros({dout}));
  }

  Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>* replay,
                 RunContext& ctx) override {
    (void)replay;
    Seq<S> out;
    out.reserve(xs.size());
    for (int t = 0; t < static_cast<int>(xs.size()); ++t) {
      const Tensor<S>& x = xs[static_cast<std::size_t>(t)];
      Tensor<S> x2 = as2d(x);
      if (mode_caches_tensors(mode) && tape)
        tape->put(this->id(), t, "x", x2, MemCategory::activations);
      Tensor<S> y = kernels::linear(x2, weight_.value, has_bias_ ? &bias_.value : nullptr,
                                    &ctx.ops);
      out.push_back(restore_shape(x, std::move(y)));
    }
    return out;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) override {
    Seq<S> dxs(dys.size());
    for (int t = static_cast<int>(dys.size()) - 1; t >= 0; --t) {
      const Tensor<S>& x2 = tape.get(this->id(), t, "x");
      const Tensor<S>& dy = dys[static_cast<std::size_t>(t)];
      Tensor<S> dy2 = dy.reshaped({x2.dim(0), weight_.value.dim(0)});
      auto g = kernels::linear_vjp(x2, weight_.value, has_bias_, dy2, &ctx.ops);
      for (i64 i = 0; i < weight_.grad.numel(); ++i) weight_.grad[i] += g.dw[i];
      if (has_bias_)
        for (i64 i = 0; i < bias_.grad.numel(); ++i) bias_.grad[i] += g.dbias[i];
      std::vector<i64> shape = dy.shape();
      shape.back() = din_;
      dxs[static_cast<std::size_t>(t)] = g.dx.reshaped(std::move(shape));
    }
    return dxs;
  }

  void collect_params(std::vector<Param<S>*>& out) override {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }

  Param<S>& weight() { return weight_; }
  std::string kind() const override { return "linear"; }

private:
  Tensor<S> as2d(const Tensor<S>& x) const {
    if (x.dim(x.ndim() - 1) != din_)
      throw ShapeError("linear", x.ndim() - 1, din_, x.dim(x.ndim() - 1));
    return x.reshaped({x.numel() / din_, din_});
  }
  Tensor<S> restore_shape(const Tensor<S>& x, Tensor<S> y2) const {
    std::vector<i64> shape = x.shape();
    shape.back() = weight_.value.dim(0);
    return y2.reshaped(std::move(shape));
  }

  Param<S> weight_, bias_;
  i64 din_;
  bool has_bias_;
};

template <typename S>
class AvgPoolLayer : public Module<S> {
public:
  AvgPoolLayer(i64 k, i64 stride, i64 pad = 0) : k_(k), stride_(stride), pad_(pad) {}

  Seq<S> forward(const Seq<S>& xs, RunMode, Tape<S>*, const Tape<S>*, RunContext& ctx) override {
    Seq<S> out;
    out.reserve(xs.size());
    if (!xs.empty()) in_shape_ = xs[0].shape();
    for (const auto& x : xs) out.push_back(kernels::avgpool2d(x, k_, stride_, pad_, &ctx.ops));
    return out;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>&, RunContext& ctx) override {
    Seq<S> dxs(dys.size());
    for (int t = static_cast<int>(dys.size()) - 1; t >= 0; --t)
      dxs[static_cast<std::size_t>(t)] = kernels::avgpool2d_vjp(
          in_shape_, k_, stride_, pad_, dys[static_cast<std::size_t>(t)], &ctx.ops);
    return dxs;
  }

  std::string kind() const override { return "avgpool"; }

private:
  i64 k_, stride_, pad_;
  std::vector<i64> in_shape_;
};

template <typename S>
class MaxPoolLayer : public Module<S> {
public:
  MaxPoolLayer(i64 k, i64 stride) : k_(k), stride_(stride) {}

  Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>*,
                 RunContext& ctx) override {
    Seq<S> out;
    out.reserve(xs.size());
    if (!xs.empty()) in_shape_ = xs[0].shape();
    for (int t = 0; t < static_cast<int>(xs.size()); ++t) {
      auto [y, idx] = kernels::maxpool2d(xs[static_cast<std::size_t>(t)], k_, stride_, &ctx.ops);
      if (mode_caches_tensors(mode) && tape)
        tape->put(this->id(), t, "idx", std::move(idx), MemCategory::activations);
      out.push_back(std::move(y));
    }
    return out;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) override {
    Seq<S> dxs(dys.size());
    for (int t = static_cast<int>(dys.size()) - 1; t >= 0; --t)
      dxs[static_cast<std::size_t>(t)] = kernels::maxpool2d_vjp(
          in_shape_, tape.get(this->id(), t, "idx"), dys[static_cast<std::size_t>(t)], &ctx.ops);
    return dxs;
  }

  std::string kind() const override { return "maxpool"; }

private:
  i64 k_, stride_;
  std::vector<i64> in_shape_;
};

/// [B,C,H,W] -> [B,C] global average pool.
template <typename S>
class GlobalPoolLayer : public Module<S> {
public:
  Seq<S> forward(const Seq<S>& xs, RunMode, Tape<S>*, const Tape<S>*, RunContext& ctx) override {
    Seq<S> out;
    out.reserve(xs.size());
    if (!xs.empty()) {
      h_ = xs[0].dim(2);
      w_ = xs[0].dim(3);
    }
    for (const auto& x : xs) out.push_back(kernels::global_avgpool(x, &ctx.ops));
    return out;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>&, RunContext& ctx) override {
    Seq<S> dxs(dys.size());
    for (int t = static_cast<int>(dys.size()) - 1; t >= 0; --t)
      dxs[static_cast<std::size_t>(t)] =
          kernels::global_avgpool_vjp(dys[static_cast<std::size_t>(t)], h_, w_, &ctx.ops);
    return dxs;
  }

  std::string kind() const override { return "global_avgpool"; }

private:
  i64 h_ = 1, w_ = 1;
};

/// Mean over the token axis, [B,N,D] -> [B,D].
template <typename S>
class TokenMeanLayer : public Module<S> {
public:
  Seq<S> forward(const Seq<S>& xs, RunMode, Tape<S>*, const Tape<S>*, RunContext& ctx) override {
    Seq<S> out;
    out.reserve(xs.size());
    if (!xs.empty()) n_ = xs[0].dim(1);
    for (const auto& x : xs) out.push_back(kernels::mean_tokens(x, &ctx.ops));
    return out;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>&, RunContext& ctx) override {
    Seq<S> dxs(dys.size());
    for (int t = static_cast<int>(dys.size()) - 1; t >= 0; --t)
      dxs[static_cast<std::size_t>(t)] =
          kernels::mean_tokens_vjp(dys[static_cast<std::size_t>(t)], n_, &ctx.ops);
    return dxs;
  }

  std::string kind() const override { return "token_mean"; }

private:
  i64 n_ = 1;
};

/// y = a * x with one scalar parameter. Minimal parameterized stage for
/// stub couplings and hand-derived gradient checks.
template <typename S>
class ScaleLayer : public Module<S> {
public:
  explicit ScaleLayer(S a) { a_ = Param<S>("scale", Tensor<S>::full({1}, a)); }

  Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>*,
                 RunContext& ctx) override {
    Seq<S> out;
    out.reserve(xs.size());
    for (int t = 0; t < static_cast<int>(xs.size()); ++t) {
      if (mode_caches_tensors(mode) && tape)
        tape->put(this->id(), t, "x", xs[static_cast<std::size_t>(t)], MemCategory::activations);
      out.push_back(kernels::scale(xs[static_cast<std::size_t>(t)], a_.value[0], &ctx.ops));
    }
    return out;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) override {
    Seq<S> dxs(dys.size());
    for (int t = static_cast<int>(dys.size()) - 1; t >= 0; --t) {
      const Tensor<S>& x = tape.get(this->id(), t, "x");
      const Tensor<S>& dy = dys[static_cast<std::size_t>(t)];
      for (i64 i = 0; i < x.numel(); ++i) a_.grad[0] += dy[i] * x[i];
      dxs[static_cast<std::size_t>(t)] = kernels::scale(dy, a_.value[0], &ctx.ops);
    }
    return dxs;
  }

  void collect_params(std::vector<Param<S>*>& out) override { out.push_back(&a_); }
  Param<S>& scale_param() { return a_; }
  std::string kind() const override { return "scale"; }

private:
  Param<S> a_;
};

/// Constant-zero submodule: F == 0 makes a coupling block the identity.
template <typename S>
class ZeroModule : public Module<S> {
public:
  Seq<S> forward(const Seq<S>& xs, RunMode, Tape<S>*, const Tape<S>*, RunContext&) override {
    return seq_zeros_like(xs);
  }
  Seq<S> backward(const Seq<S>& dys, const Tape<S>&, RunContext&) override {
    return seq_zeros_like(dys);
  }
  std::string kind() const override { return "zero"; }
};

// ---------------------------------------------------------------------------
// composite spiking layers

/// Residual function of the reversible ResNet block: two rounds of the
/// activation-conv-batchnorm stage order (SN -> conv3x3 -> BN), shape
/// preserving by construction.
template <typename S>
std::unique_ptr<Sequential<S>> make_residual_fn(i64 channels, const NeuronParams<S>& np,
                                                Rng& rng) {
  auto seq = std::make_unique<Sequential<S>>();
  seq->add(std::make_unique<SpikingNeuron<S>>(np));
  seq->add(std::make_unique<ConvLayer<S>>(channels, channels, 3, 1, 1, rng));
  seq->add(std::make_unique<BatchNormLayer<S>>(channels));
  seq->add(std::make_unique<SpikingNeuron<S>>(np));
  seq->add(std::make_unique<ConvLayer<S>>(channels, channels, 3, 1, 1, rng));
  seq->add(std::make_unique<BatchNormLayer<S>>(channels));
  seq->set_name("residual_fn");
  return seq;
}

/// Spiking MLP block over token tensors [B,N,D]: SN -> linear(D, r*D) -> BN
/// -> SN -> linear(r*D, D) -> BN. Shape preserving.
template <typename S>
std::unique_ptr<Sequential<S>> make_mlp_block(i64 embed_dim, double mlp_ratio,
                                              const NeuronParams<S>& np, Rng& rng) {
  const i64 hidden = static_cast<i64>(static_cast<double>(embed_dim) * mlp_ratio);
  if (hidden <= 0) throw ContractError("mlp: ratio produces empty hidden width");
  auto seq = std::make_unique<Sequential<S>>();
  seq->add(std::make_unique<SpikingNeuron<S>>(np));
  seq->add(std::make_unique<LinearLayer<S>>(embed_dim, hidden, rng));
  seq->add(std::make_unique<BatchNormLayer<S>>(hidden, 2));
  seq->add(std::make_unique<SpikingNeuron<S>>(np));
  seq->add(std::make_unique<LinearLayer<S>>(hidden, embed_dim, rng));
  seq->add(std::make_unique<BatchNormLayer<S>>(embed_dim, 2));
  seq->set_name("mlp_block");
  return seq;
}

/// Spiking self-attention over token tensors [B,N,D]. Softmax-free product
/// of binary spike operands: s = SN(x); q/k/v = SN(BN(linear(s)));
/// y = BN(linear(scale * (q k^T) v)).
template <typename S>
class SSABlock : public Module<S> {
public:
  SSABlock(i64 embed_dim, i64 heads, const NeuronParams<S>& np, Rng& rng, S attn_scale = S(0.125))
      : heads_(heads), scale_(attn_scale) {
    if (embed_dim % heads != 0) throw ShapeError("ssa", 2, (embed_dim / heads) * heads, embed_dim);
    sn_in_ = std::make_unique<SpikingNeuron<S>>(np);
    for (int b = 0; b < 3; ++b) {
      proj_[b] = std::make_unique<LinearLayer<S>>(embed_dim, embed_dim, rng);
      bn_[b] = std::make_unique<BatchNormLayer<S>>(embed_dim, 2);
      sn_[b] = std::make_unique<SpikingNeuron<S>>(np);
    }
    proj_out_ = std::make_unique<LinearLayer<S>>(embed_dim, embed_dim, rng);
    bn_out_ = std::make_unique<BatchNormLayer<S>>(embed_dim, 2);
  }

  Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>* replay,
                 RunContext& ctx) override {
    Seq<S> s = sn_in_->forward(xs, mode, tape, replay, ctx);
    std::array<Seq<S>, 3> qkv;
    for (int b = 0; b < 3; ++b) {
      Seq<S> p = proj_[b]->forward(s, mode, tape, replay, ctx);
      p = bn_[b]->forward(p, mode, tape, replay, ctx);
      qkv[static_cast<std::size_t>(b)] = sn_[b]->forward(p, mode, tape, replay, ctx);
    }
    Seq<S> attn_out;
    attn_out.reserve(xs.size());
    for (int t = 0; t < static_cast<int>(xs.size()); ++t) {
      Tensor<S> a = kernels::attn_scores(qkv[0][static_cast<std::size_t>(t)],
                                         qkv[1][static_cast<std::size_t>(t)], heads_, &ctx.ops);
      attn_out.push_back(kernels::attn_apply(a, qkv[2][static_cast<std::size_t>(t)], heads_,
                                             scale_, &ctx.ops));
      if (mode_caches_tensors(mode) && tape)
        tape->put(this->id(), t, "A", std::move(a), MemCategory::activations);
    }
    Seq<S> o = proj_out_->forward(attn_out, mode, tape, replay, ctx);
    return bn_out_->forward(o, mode, tape, replay, ctx);
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) override {
    Seq<S> d = bn_out_->backward(dys, tape, ctx);
    d = proj_out_->backward(d, tape, ctx);
    Seq<S> dq(d.size()), dk(d.size()), dv(d.size());
    for (int t = static_cast<int>(d.size()) - 1; t >= 0; --t) {
      const Tensor<S>& a = tape.get(this->id(), t, "A");
      const Tensor<S>& q = tape.get(sn_[0]->id(), t, "S");
      const Tensor<S>& k = tape.get(sn_[1]->id(), t, "S");
      const Tensor<S>& v = tape.get(sn_[2]->id(), t, "S");
      auto ga = kernels::attn_apply_vjp(a, v, heads_, scale_, d[static_cast<std::size_t>(t)],
                                        &ctx.ops);
      auto gs = kernels::attn_scores_vjp(q, k, heads_, ga.da, &ctx.ops);
      dq[static_cast<std::size_t>(t)] = std::move(gs.dq);
      dk[static_cast<std::size_t>(t)] = std::move(gs.dk);
      dv[static_cast<std::size_t>(t)] = std::move(ga.dv);
    }
    Seq<S> ds;
    std::array<Seq<S>*, 3> branch_d{&dq, &dk, &dv};
    for (int b = 0; b < 3; ++b) {
      Seq<S> cur = sn_[b]->backward(*branch_d[static_cast<std::size_t>(b)], tape, ctx);
      cur = bn_[b]->backward(cur, tape, ctx);
      cur = proj_[b]->backward(cur, tape, ctx);
      if (ds.empty()) {
        ds = std::move(cur);
      } else {
        for (std::size_t t = 0; t < ds.size(); ++t)
          ds[t] = kernels::add(ds[t], cur[t], &ctx.ops);
      }
    }
    return sn_in_->backward(ds, tape, ctx);
  }

  void reset_state(RunContext& ctx) override {
    sn_in_->reset_state(ctx);
    for (auto& s : sn_) s->reset_state(ctx);
  }

  bool state_is_reset() const override {
    if (!sn_in_->state_is_reset()) return false;
    for (const auto& s : sn_)
      if (!s->state_is_reset()) return false;
    return true;
  }

  void collect_params(std::vector<Param<S>*>& out) override {
    sn_in_->collect_params(out);
    for (int b = 0; b < 3; ++b) {
      proj_[b]->collect_params(out);
      bn_[b]->collect_params(out);
    }
    proj_out_->collect_params(out);
    bn_out_->collect_params(out);
  }

  void collect_modules(std::vector<Module<S>*>& out) override {
    out.push_back(this);
    sn_in_->collect_modules(out);
    for (int b = 0; b < 3; ++b) {
      proj_[b]->collect_modules(out);
      bn_[b]->collect_modules(out);
      sn_[b]->collect_modules(out);
    }
    proj_out_->collect_modules(out);
    bn_out_->collect_modules(out);
  }

  LinearLayer<S>& projection(int i) { return i < 3 ? *proj_[i] : *proj_out_; }
  BatchNormLayer<S>& norm(int i) { return i < 3 ? *bn_[i] : *bn_out_; }

  std::string kind() const override { return "ssa"; }

private:
  i64 heads_;
  S scale_;
  std::unique_ptr<SpikingNeuron<S>> sn_in_;
  std::array<std::unique_ptr<LinearLayer<S>>, 3> proj_;
  std::array<std::unique_ptr<BatchNormLayer<S>>, 3> bn_;
  std::array<std::unique_ptr<SpikingNeuron<S>>, 3> sn_;
  std::unique_ptr<LinearLayer<S>> proj_out_;
  std::unique_ptr<BatchNormLayer<S>> bn_out_;
};

/// Downsample block between reversible sequences: avgpool 3x3 stride 2 ->
/// conv 1x1 (channel expansion) -> BN -> SN. Halves spatial extent; not
/// reversible, so its inputs stay cached in every mode.
template <typename S>
std::unique_ptr<Sequential<S>> make_downsample_block(i64 in_ch, i64 out_ch,
                                                     const NeuronParams<S>& np, Rng& rng) {
  auto seq = std::make_unique<Sequential<S>>();
  seq->add(std::make_unique<AvgPoolLayer<S>>(3, 2, 1));
  seq->add(std::make_unique<ConvLayer<S>>(in_ch, out_ch, 1, 1, 0, rng));
  seq->add(std::make_unique<BatchNormLayer<S>>(out_ch));
  seq->add(std::make_unique<SpikingNeuron<S>>(np));
  seq->set_name("downsample");
  return seq;
}

/// Patch-embedding front end of the spiking transformer. Conv 3x3 -> BN ->
/// SN stages (each optionally followed by a stride-2 maxpool) project the
/// image onto [B, N_tokens, D_e] per step. All downsampling lives here.
template <typename S>
class SpikingTokenizer : public Module<S> {
public:
  SpikingTokenizer(i64 in_channels, std::vector<i64> stage_channels, std::vector<bool> pools,
                   const NeuronParams<S>& np, Rng& rng)
      : embed_dim_(stage_channels.empty() ? 0 : stage_channels.back()) {
    if (stage_channels.empty()) throw ContractError("tokenizer: no stages configured");
    if (pools.size() != stage_channels.size())
      throw ContractError("tokenizer: pool flags must match stage count");
    stages_ = std::make_unique<Sequential<S>>();
    i64 c = in_channels;
    for (std::size_t i = 0; i < stage_channels.size(); ++i) {
      stages_->add(std::make_unique<ConvLayer<S>>(c, stage_channels[i], 3, 1, 1, rng));
      stages_->add(std::make_unique<BatchNormLayer<S>>(stage_channels[i]));
      stages_->add(std::make_unique<SpikingNeuron<S>>(np));
      if (pools[i]) stages_->add(std::make_unique<MaxPoolLayer<S>>(2, 2));
      c = stage_channels[i];
    }
    pool_count_ = 0;
    for (bool p : pools) pool_count_ += p ? 1 : 0;
  }

  i64 embed_dim() const { return embed_dim_; }

  Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>* replay,
                 RunContext& ctx) override {
    if (!xs.empty()) {
      const i64 factor = i64(1) << pool_count_;
      if (xs[0].dim(2) % factor != 0)
        throw ShapeError("tokenizer", 2, (xs[0].dim(2) / factor) * factor, xs[0].dim(2));
      if (xs[0].dim(3) % factor != 0)
        throw ShapeError("tokenizer", 3, (xs[0].dim(3) / factor) * factor, xs[0].dim(3));
    }
    Seq<S> feats = stages_->forward(xs, mode, tape, replay, ctx);
    Seq<S> out;
    out.reserve(feats.size());
    if (!feats.empty()) {
      out_c_ = feats[0].dim(1);
      out_h_ = feats[0].dim(2);
      out_w_ = feats[0].dim(3);
    }
    for (const auto& f : feats) out.push_back(kernels::tokens_from_image(f));
    return out;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) override {
    Seq<S> dfeats(dys.size());
    for (int t = static_cast<int>(dys.size()) - 1; t >= 0; --t)
      dfeats[static_cast<std::size_t>(t)] = kernels::tokens_from_image_vjp(
          dys[static_cast<std::size_t>(t)], out_c_, out_h_, out_w_);
    return stages_->backward(dfeats, tape, ctx);
  }

  void reset_state(RunContext& ctx) override { stages_->reset_state(ctx); }
  bool state_is_reset() const override { return stages_->state_is_reset(); }
  void collect_params(std::vector<Param<S>*>& out) override { stages_->collect_params(out); }
  void collect_modules(std::vector<Module<S>*>& out) override {
    out.push_back(this);
    stages_->collect_modules(out);
  }

  std::string kind() const override { return "spiking_tokenizer"; }

private:
  std::unique_ptr<Sequential<S>> stages_;
  i64 embed_dim_;
  int pool_count_ = 0;
  i64 out_c_ = 1, out_h_ = 1, out_w_ = 1;
};

}  // namespace revsnn
