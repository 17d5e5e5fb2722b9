#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "revsnn/context.hpp"
#include "revsnn/kernels.hpp"
#include "revsnn/module.hpp"
#include "revsnn/tensor.hpp"

namespace revsnn {

enum class NeuronKind { lif, if_ };

inline const char* neuron_kind_name(NeuronKind k) { return k == NeuronKind::lif ? "lif" : "if"; }

template <typename S>
struct NeuronParams {
  NeuronKind kind = NeuronKind::lif;
  S tau_m = S(2);      // membrane time constant, > 1
  S v_th = S(1);       // firing threshold
  S v_reset = S(0);    // reset potential
  S sg_width = S(1);   // rectangular surrogate window width, > 0

  void validate() const {
    if (kind == NeuronKind::lif && !(tau_m > S(1)))
      throw ContractError("neuron: tau_m must be > 1");
    if (!(v_th > v_reset)) throw ContractError("neuron: v_th must exceed v_reset");
    if (!(sg_width > S(0))) throw ContractError("neuron: surrogate width must be positive");
  }
};

/// Explicit state of one multi-step neuron layer: membrane potential V after
/// the previous step, the pre-spike hidden potential H of the last step
/// (retained for backward), and the current time index.
template <typename S>
struct NeuronState {
  Tensor<S> v;
  Tensor<S> h;
  int t = 0;

  bool allocated() const { return v.defined(); }
};

namespace detail {

/// One integrate-fire-reset step. Updates v in place, writes H, returns the
/// binary spike tensor. The knife-edge monitor records min |H - v_th|.
template <typename S>
Tensor<S> neuron_step_core(const NeuronParams<S>& p, Tensor<S>& v, const Tensor<S>& input,
                           Tensor<S>& h_out, OpCounter* ops, double* knife_margin) {
  check_same_shape("neuron_step", v, input);
  Tensor<S> s(input.shape());
  h_out = Tensor<S>(input.shape());
  const S inv_tau = p.kind == NeuronKind::lif ? S(1) / p.tau_m : S(1);
  const i64 n = input.numel();
  double margin = std::numeric_limits<double>::infinity();
  for (i64 i = 0; i < n; ++i) {
    S h;
    if (p.kind == NeuronKind::lif)
      h = v[i] + inv_tau * (input[i] - (v[i] - p.v_reset));
    else
      h = v[i] + input[i];
    const double m = std::fabs(static_cast<double>(h - p.v_th));
    if (m < margin) margin = m;
    const S spike = h >= p.v_th ? S(1) : S(0);
    h_out[i] = h;
    s[i] = spike;
    v[i] = h * (S(1) - spike) + p.v_reset * spike;
  }
  if (knife_margin && margin < *knife_margin) *knife_margin = margin;
  kernels::count(ops, OpKind::neuron, 4 * static_cast<u64>(n));
  return s;
}

}  // namespace detail

/// LIF dynamics: H = V + (I - (V - V_reset)) / tau_m, threshold fire, hard
/// reset. Returns spikes; state carries V, H and the time index.
template <typename S>
Tensor<S> lif_step(const NeuronParams<S>& p, NeuronState<S>& st, const Tensor<S>& input,
                   OpCounter* ops = nullptr, double* knife_margin = nullptr) {
  NeuronParams<S> q = p;
  q.kind = NeuronKind::lif;
  if (!st.allocated()) st.v = Tensor<S>::full(input.shape(), q.v_reset);
  auto s = detail::neuron_step_core(q, st.v, input, st.h, ops, knife_margin);
  ++st.t;
  return s;
}

/// IF dynamics: H = V + I; fire and reset as in LIF.
template <typename S>
Tensor<S> if_step(const NeuronParams<S>& p, NeuronState<S>& st, const Tensor<S>& input,
                  OpCounter* ops = nullptr, double* knife_margin = nullptr) {
  NeuronParams<S> q = p;
  q.kind = NeuronKind::if_;
  if (!st.allocated()) st.v = Tensor<S>::full(input.shape(), q.v_reset);
  auto s = detail::neuron_step_core(q, st.v, input, st.h, ops, knife_margin);
  ++st.t;
  return s;
}

template <typename S>
Tensor<S> neuron_step(const NeuronParams<S>& p, NeuronState<S>& st, const Tensor<S>& input,
                      OpCounter* ops = nullptr, double* knife_margin = nullptr) {
  return p.kind == NeuronKind::lif ? lif_step(p, st, input, ops, knife_margin)
                                   : if_step(p, st, input, ops, knife_margin);
}

/// Rectangular surrogate dS/dH = (1/w) * [|H - v_th| < w/2]. Used only in
/// backward; the forward spike stays a hard threshold.
template <typename S>
Tensor<S> surrogate_grad(const NeuronParams<S>& p, const Tensor<S>& h, OpCounter* ops = nullptr) {
  Tensor<S> g(h.shape());
  const S half = p.sg_width / S(2);
  const S inv_w = S(1) / p.sg_width;
  for (i64 i = 0; i < h.numel(); ++i)
    g[i] = std::fabs(h[i] - p.v_th) < half ? inv_w : S(0);
  kernels::count(ops, OpKind::neuron, static_cast<u64>(h.numel()));
  return g;
}

/// Step the neuron through a whole input sequence, carrying state across
/// steps. `t_expected` is the declared sequence length; stepping past it
/// without a reset is a contract violation.
template <typename S>
Seq<S> multistep_forward(const NeuronParams<S>& p, NeuronState<S>& st, const Seq<S>& inputs,
                         int t_expected, OpCounter* ops = nullptr,
                         double* knife_margin = nullptr) {
  if (st.t + static_cast<int>(inputs.size()) > t_expected)
    throw ContractError("neuron: stepping past t=" + std::to_string(t_expected) +
                        " without reset (state at t=" + std::to_string(st.t) + ")");
  Seq<S> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(neuron_step(p, st, x, ops, knife_margin));
  return out;
}

/// The reset process: membrane potential back to V_reset everywhere, time
/// index to zero, cached hidden potential dropped. The potential tensor is
/// released; it is reallocated lazily on the next step.
template <typename S>
void reset_state(const NeuronParams<S>& p, NeuronState<S>& st) {
  (void)p;
  st.v = Tensor<S>();
  st.h = Tensor<S>();
  st.t = 0;
}

/// Multi-step spiking neuron layer. Owns its state; forward caches H (the
/// membrane potential record) and S (the spikes) per step when the mode
/// caches tensors. Backward runs BPTT: surrogate gradient at the cached H,
/// detached hard reset, temporal carry through dH * dV'/dV.
template <typename S>
class SpikingNeuron : public Module<S> {
public:
  explicit SpikingNeuron(NeuronParams<S> params) : params_(params) { params_.validate(); }

  const NeuronParams<S>& params() const { return params_; }

  Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>* replay,
                 RunContext& ctx) override {
    (void)replay;
    const int T = static_cast<int>(xs.size());
    // Each layer-level forward starts a new sequence; stale potentials are
    // only possible when a caller skipped the reset process.
    t_ = 0;
    if (!v_.defined() && T > 0) {
      v_ = Tensor<S>::full(xs[0].shape(), params_.v_reset);
      state_bytes_ = v_.bytes();
      state_ledger_ = &ctx.ledger;
      ctx.ledger.track(MemCategory::neuron_state, state_bytes_, MemEvent::alloc);
    }
    Seq<S> out;
    out.reserve(xs.size());
    for (int t = 0; t < T; ++t) {
      Tensor<S> h;
      Tensor<S> s = detail::neuron_step_core(params_, v_, xs[t], h, &ctx.ops,
                                             &ctx.knife_edge_margin);
      ++t_;
      if (mode_caches_tensors(mode) && tape) {
        tape->put(this->id(), t, "H", std::move(h), MemCategory::neuron_state);
        tape->put(this->id(), t, "S", s, MemCategory::activations);
      }
      out.push_back(std::move(s));
    }
    return out;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) override {
    const int T = static_cast<int>(dys.size());
    Seq<S> dxs(static_cast<std::size_t>(T));
    Tensor<S> gv;  // dL/dV[t] accumulated from future steps
    const S inv_tau = params_.kind == NeuronKind::lif ? S(1) / params_.tau_m : S(1);
    // dH[t+1]/dV[t]: 1 - 1/tau for LIF, 1 for IF.
    const S carry_eff = params_.kind == NeuronKind::lif ? S(1) - inv_tau : S(1);
    for (int t = T - 1; t >= 0; --t) {
      const Tensor<S>& h = tape.get(this->id(), t, "H");
      const Tensor<S>& s = tape.get(this->id(), t, "S");
      const Tensor<S> sg = surrogate_grad(params_, h, &ctx.ops);
      Tensor<S> dh(h.shape());
      const bool have_gv = gv.defined();
      for (i64 i = 0; i < h.numel(); ++i) {
        S v = dys[static_cast<std::size_t>(t)][i] * sg[i];
        if (have_gv) v += gv[i] * (S(1) - s[i]);  // detached reset path
        dh[i] = v;
      }
      Tensor<S> dx(h.shape());
      if (!gv.defined()) gv = Tensor<S>(h.shape());
      for (i64 i = 0; i < h.numel(); ++i) {
        dx[i] = dh[i] * inv_tau;
        gv[i] = dh[i] * carry_eff;
      }
      ctx.ops.add(OpKind::neuron, 4 * static_cast<u64>(h.numel()));
      dxs[static_cast<std::size_t>(t)] = std::move(dx);
    }
    return dxs;
  }

  void reset_state(RunContext& ctx) override {
    (void)ctx;
    if (v_.defined()) {
      if (state_ledger_) state_ledger_->track(MemCategory::neuron_state, state_bytes_, MemEvent::free_);
      v_ = Tensor<S>();
      state_bytes_ = 0;
      state_ledger_ = nullptr;
    }
    t_ = 0;
  }

  bool state_is_reset() const override { return t_ == 0 && !v_.defined(); }

  /// Current membrane potential (testing aid; empty when reset).
  const Tensor<S>& potential() const { return v_; }
  int time_index() const { return t_; }

  std::string kind() const override {
    return std::string("spiking_") + neuron_kind_name(params_.kind);
  }

private:
  NeuronParams<S> params_;
  Tensor<S> v_;
  int t_ = 0;
  u64 state_bytes_ = 0;
  MemoryLedger* state_ledger_ = nullptr;
};

}  // namespace revsnn
