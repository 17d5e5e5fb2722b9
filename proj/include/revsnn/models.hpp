#pragma once

#include <memory>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "revsnn/layers.hpp"
#include "revsnn/reveng.hpp"

namespace revsnn {

// ---------------------------------------------------------------------------
// configurations

template <typename S>
struct ResNetConfig {
  std::vector<i64> blocks_per_stage{1, 1, 1, 1};
  // Reversible nets: per-stream widths (the stem emits twice the first
  // entry). Vanilla nets: full widths.
  std::vector<i64> stream_channels{64, 128, 256, 448};
  i64 stem_channels = 128;
  i64 in_channels = 3;
  i64 num_classes = 10;
  int T = 4;
  i64 stem_stride = 1;  // 1 at desk scale (<= 32x32); 2 for large inputs
  NeuronParams<S> neuron{};

  void validate(bool reversible) const {
    if (blocks_per_stage.empty() || blocks_per_stage.size() != stream_channels.size())
      throw ContractError("resnet config: blocks_per_stage and channels must align");
    for (i64 n : blocks_per_stage)
      if (n < 1) throw ContractError("resnet config: each stage needs at least one block");
    if (reversible && stem_channels != 2 * stream_channels[0])
      throw ContractError("resnet config: stem must emit 2x the first stream width");
  }

  static ResNetConfig revsresnet21() {
    ResNetConfig c;
    c.blocks_per_stage = {1, 1, 1, 1};
    c.stream_channels = {64, 128, 256, 448};
    c.stem_channels = 128;
    c.neuron.kind = NeuronKind::if_;
    return c;
  }
  static ResNetConfig revsresnet37() {
    ResNetConfig c = revsresnet21();
    c.blocks_per_stage = {1, 2, 3, 2};
    return c;
  }
  /// Three-stage variant used on neuromorphic data.
  static ResNetConfig revsresnet24() {
    ResNetConfig c;
    c.blocks_per_stage = {1, 2, 2};
    c.stream_channels = {16, 32, 48};
    c.stem_channels = 32;
    c.in_channels = 2;
    return c;
  }
  static ResNetConfig ms_resnet18() {
    ResNetConfig c;
    c.blocks_per_stage = {2, 2, 2, 2};
    c.stream_channels = {64, 128, 256, 512};
    c.stem_channels = 64;
    c.neuron.kind = NeuronKind::if_;
    return c;
  }
};

template <typename S>
struct FormerConfig {
  int L = 4;
  i64 embed_dim = 384;
  i64 heads = 12;
  double mlp_ratio = 4.0;
  int T = 4;
  i64 num_classes = 10;
  i64 in_channels = 3;
  std::vector<i64> tokenizer_channels{48, 96, 192, 384, 384};
  std::vector<bool> tokenizer_pools{false, true, false, true, false};
  S attn_scale = S(0.125);
  NeuronParams<S> neuron{};

  void validate() const {
    if (L < 1) throw ContractError("former config: needs at least one block");
    if (embed_dim % heads != 0)
      throw ContractError("former config: embedding dim must divide by heads");
    if (tokenizer_channels.empty() || tokenizer_channels.back() != embed_dim)
      throw ContractError("former config: tokenizer must project onto the embedding dim");
    if (tokenizer_pools.size() != tokenizer_channels.size())
      throw ContractError("former config: pool flags must match tokenizer stages");
  }

  static FormerConfig revsformer(int L, i64 D) {
    FormerConfig c;
    c.L = L;
    c.embed_dim = D;
    c.tokenizer_channels = {D / 8, D / 4, D / 2, D, D};
    c.tokenizer_pools = {false, true, false, true, false};
    return c;
  }
  /// Small front end for 8x8-class inputs: two conv stages, two pools.
  static FormerConfig desk(int L, i64 D, i64 heads) {
    FormerConfig c;
    c.L = L;
    c.embed_dim = D;
    c.heads = heads;
    c.tokenizer_channels = {D / 2, D};
    c.tokenizer_pools = {true, true};
    return c;
  }
};

// ---------------------------------------------------------------------------
// vanilla (single-stream) blocks for the non-reversible counterparts

/// Pre-activation residual block: y = main(x) + shortcut(x), main being
/// SN -> conv3x3(stride) -> BN -> SN -> conv3x3 -> BN. The first block of a
/// downsampling stage carries a strided 1x1 projection shortcut.
template <typename S>
class VanillaResBlock : public Module<S> {
public:
  VanillaResBlock(i64 in_ch, i64 out_ch, i64 stride, const NeuronParams<S>& np, Rng& rng) {
    main_ = std::make_unique<Sequential<S>>();
    main_->add(std::make_unique<SpikingNeuron<S>>(np));
    main_->add(std::make_unique<ConvLayer<S>>(in_ch, out_ch, 3, stride, 1, rng));
    main_->add(std::make_unique<BatchNormLayer<S>>(out_ch));
    main_->add(std::make_unique<SpikingNeuron<S>>(np));
    main_->add(std::make_unique<ConvLayer<S>>(out_ch, out_ch, 3, 1, 1, rng));
    main_->add(std::make_unique<BatchNormLayer<S>>(out_ch));
    if (in_ch != out_ch || stride != 1) {
      shortcut_ = std::make_unique<Sequential<S>>();
      shortcut_->add(std::make_unique<ConvLayer<S>>(in_ch, out_ch, 1, stride, 0, rng));
      shortcut_->add(std::make_unique<BatchNormLayer<S>>(out_ch));
    }
  }

  Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>* replay,
                 RunContext& ctx) override {
    Seq<S> m = main_->forward(xs, mode, tape, replay, ctx);
    Seq<S> s = shortcut_ ? shortcut_->forward(xs, mode, tape, replay, ctx) : xs;
    Seq<S> y(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) y[t] = kernels::add(m[t], s[t], &ctx.ops);
    return y;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) override {
    Seq<S> dm = main_->backward(dys, tape, ctx);
    Seq<S> ds = shortcut_ ? shortcut_->backward(dys, tape, ctx) : dys;
    Seq<S> dx(dys.size());
    for (std::size_t t = 0; t < dys.size(); ++t) dx[t] = kernels::add(dm[t], ds[t], &ctx.ops);
    return dx;
  }

  void reset_state(RunContext& ctx) override {
    main_->reset_state(ctx);
    if (shortcut_) shortcut_->reset_state(ctx);
  }
  bool state_is_reset() const override {
    return main_->state_is_reset() && (!shortcut_ || shortcut_->state_is_reset());
  }
  void collect_params(std::vector<Param<S>*>& out) override {
    main_->collect_params(out);
    if (shortcut_) shortcut_->collect_params(out);
  }
  void collect_modules(std::vector<Module<S>*>& out) override {
    out.push_back(this);
    main_->collect_modules(out);
    if (shortcut_) shortcut_->collect_modules(out);
  }
  std::string kind() const override { return "vanilla_res_block"; }

private:
  std::unique_ptr<Sequential<S>> main_, shortcut_;
};

/// Standard spiking transformer block: x := x + SSA(x); y := x + MLP(x).
template <typename S>
class VanillaFormerBlock : public Module<S> {
public:
  VanillaFormerBlock(std::unique_ptr<Module<S>> ssa, std::unique_ptr<Module<S>> mlp)
      : ssa_(std::move(ssa)), mlp_(std::move(mlp)) {}

  Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>* replay,
                 RunContext& ctx) override {
    Seq<S> a = ssa_->forward(xs, mode, tape, replay, ctx);
    Seq<S> x1(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) x1[t] = kernels::add(xs[t], a[t], &ctx.ops);
    Seq<S> m = mlp_->forward(x1, mode, tape, replay, ctx);
    Seq<S> y(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) y[t] = kernels::add(x1[t], m[t], &ctx.ops);
    return y;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) override {
    Seq<S> dm = mlp_->backward(dys, tape, ctx);
    Seq<S> dx1(dys.size());
    for (std::size_t t = 0; t < dys.size(); ++t) dx1[t] = kernels::add(dys[t], dm[t], &ctx.ops);
    Seq<S> da = ssa_->backward(dx1, tape, ctx);
    Seq<S> dx(dys.size());
    for (std::size_t t = 0; t < dys.size(); ++t) dx[t] = kernels::add(dx1[t], da[t], &ctx.ops);
    return dx;
  }

  void reset_state(RunContext& ctx) override {
    ssa_->reset_state(ctx);
    mlp_->reset_state(ctx);
  }
  bool state_is_reset() const override {
    return ssa_->state_is_reset() && mlp_->state_is_reset();
  }
  void collect_params(std::vector<Param<S>*>& out) override {
    ssa_->collect_params(out);
    mlp_->collect_params(out);
  }
  void collect_modules(std::vector<Module<S>*>& out) override {
    out.push_back(this);
    ssa_->collect_modules(out);
    mlp_->collect_modules(out);
  }
  std::string kind() const override { return "vanilla_former_block"; }

private:
  std::unique_ptr<Module<S>> ssa_, mlp_;
};

// ---------------------------------------------------------------------------
// network container

/// A full model: an ordered chain of cached regions (stem, tokenizer,
/// downsample blocks, head), stream split/merge points, and reversible
/// sequences. Cached regions keep their tapes in both engines; reversible
/// sequences obey the selected engine.
template <typename S>
class Network {
public:
  int time_steps = 4;
  i64 num_classes = 2;
  std::string family;

  Module<S>* add_cached(std::unique_ptr<Module<S>> m) {
    parts_.push_back(Part{PartKind::cached, std::move(m), nullptr, nullptr});
    return parts_.back().chain.get();
  }
  void add_split_channel() { parts_.push_back(Part{PartKind::split_channel, nullptr, nullptr, nullptr}); }
  void add_split_duplicate() { parts_.push_back(Part{PartKind::split_duplicate, nullptr, nullptr, nullptr}); }
  ReversibleSequence<S>* add_reversible() {
    parts_.push_back(Part{PartKind::rev, nullptr, std::make_unique<ReversibleSequence<S>>(), nullptr});
    return parts_.back().seq.get();
  }
  void add_merge_concat() { parts_.push_back(Part{PartKind::merge_concat, nullptr, nullptr, nullptr}); }
  void add_merge_average() { parts_.push_back(Part{PartKind::merge_average, nullptr, nullptr, nullptr}); }

  Seq<S> forward_train(const Seq<S>& xs, EngineMode mode, RunContext& ctx) {
    release_step(ctx);
    reset_state(ctx);
    last_mode_ = mode;
    ctx.ops.set_phase(Phase::forward);
    Seq<S> single = xs;
    Seq<S> s1, s2;
    bool split = false;
    for (auto& p : parts_) {
      switch (p.kind) {
        case PartKind::cached: {
          ctx.ops.set_phase(Phase::forward);
          p.tape = std::make_unique<Tape<S>>(&ctx.ledger);
          single = p.chain->forward(single, RunMode::train_cached, p.tape.get(), nullptr, ctx);
          break;
        }
        case PartKind::split_channel: {
          s1.clear();
          s2.clear();
          for (auto& x : single) {
            auto [a, b] = kernels::split_channels(x);
            s1.push_back(std::move(a));
            s2.push_back(std::move(b));
          }
          split = true;
          break;
        }
        case PartKind::split_duplicate:
          s1 = single;
          s2 = single;
          split = true;
          break;
        case PartKind::rev:
          std::tie(s1, s2) = p.seq->forward(s1, s2, mode, ctx);
          break;
        case PartKind::merge_concat:
          single.clear();
          for (std::size_t t = 0; t < s1.size(); ++t)
            single.push_back(kernels::concat_channels(s1[t], s2[t]));
          split = false;
          break;
        case PartKind::merge_average: {
          single.clear();
          for (std::size_t t = 0; t < s1.size(); ++t)
            single.push_back(kernels::scale(kernels::add(s1[t], s2[t], &ctx.ops), S(0.5), &ctx.ops));
          split = false;
          break;
        }
      }
    }
    if (split) throw ContractError("network: streams left unmerged at the head");
    return single;
  }

  void backward(const Seq<S>& dlogits, RunContext& ctx) {
    Seq<S> d = dlogits;
    Seq<S> d1, d2;
    bool split = false;
    for (std::size_t i = parts_.size(); i-- > 0;) {
      Part& p = parts_[i];
      switch (p.kind) {
        case PartKind::cached:
          ctx.ops.set_phase(Phase::backward);
          if (!p.tape) throw ContractError("network: backward without a forward tape");
          d = p.chain->backward(d, *p.tape, ctx);
          p.tape.reset();
          break;
        case PartKind::split_channel:
          d.clear();
          for (std::size_t t = 0; t < d1.size(); ++t)
            d.push_back(kernels::concat_channels(d1[t], d2[t]));
          split = false;
          break;
        case PartKind::split_duplicate:
          d.clear();
          for (std::size_t t = 0; t < d1.size(); ++t)
            d.push_back(kernels::add(d1[t], d2[t], &ctx.ops));
          split = false;
          break;
        case PartKind::rev:
          std::tie(d1, d2) = p.seq->backward(d1, d2, ctx);
          break;
        case PartKind::merge_concat:
          d1.clear();
          d2.clear();
          for (auto& g : d) {
            auto [a, b] = kernels::split_channels(g);
            d1.push_back(std::move(a));
            d2.push_back(std::move(b));
          }
          split = true;
          break;
        case PartKind::merge_average:
          d1.clear();
          d2.clear();
          for (auto& g : d) {
            d1.push_back(kernels::scale(g, S(0.5), &ctx.ops));
            d2.push_back(kernels::scale(g, S(0.5), &ctx.ops));
          }
          split = true;
          break;
      }
    }
    (void)split;
    reset_state(ctx);
  }

  Seq<S> forward_eval(const Seq<S>& xs, RunContext& ctx) {
    release_step(ctx);
    reset_state(ctx);
    ctx.ops.set_phase(Phase::forward);
    Tape<S> scratch;  // unbound: eval caches nothing
    Seq<S> single = xs;
    Seq<S> s1, s2;
    for (auto& p : parts_) {
      switch (p.kind) {
        case PartKind::cached:
          single = p.chain->forward(single, RunMode::eval, nullptr, nullptr, ctx);
          break;
        case PartKind::split_channel: {
          s1.clear();
          s2.clear();
          for (auto& x : single) {
            auto [a, b] = kernels::split_channels(x);
            s1.push_back(std::move(a));
            s2.push_back(std::move(b));
          }
          break;
        }
        case PartKind::split_duplicate:
          s1 = single;
          s2 = single;
          break;
        case PartKind::rev:
          for (std::size_t b = 0; b < p.seq->size(); ++b)
            std::tie(s1, s2) = p.seq->block(b).forward(s1, s2, RunMode::eval, scratch, ctx);
          break;
        case PartKind::merge_concat:
          single.clear();
          for (std::size_t t = 0; t < s1.size(); ++t)
            single.push_back(kernels::concat_channels(s1[t], s2[t]));
          break;
        case PartKind::merge_average:
          single.clear();
          for (std::size_t t = 0; t < s1.size(); ++t)
            single.push_back(kernels::scale(kernels::add(s1[t], s2[t], &ctx.ops), S(0.5), &ctx.ops));
          break;
      }
    }
    reset_state(ctx);
    return single;
  }

  void reset_state(RunContext& ctx) {
    for (auto& p : parts_) {
      if (p.chain) p.chain->reset_state(ctx);
      if (p.seq) p.seq->reset_state(ctx);
    }
  }

  /// Drop any caches held from a previous (possibly abandoned) step.
  void release_step(RunContext& ctx) {
    for (auto& p : parts_) {
      if (p.tape) p.tape.reset();
      if (p.seq) p.seq->release_caches(ctx);
    }
  }

  std::vector<Param<S>*> params() {
    std::vector<Param<S>*> out;
    for (auto& p : parts_) {
      if (p.chain) p.chain->collect_params(out);
      if (p.seq) p.seq->collect_params(out);
    }
    return out;
  }

  std::vector<Module<S>*> modules() {
    std::vector<Module<S>*> out;
    for (auto& p : parts_) {
      if (p.chain) p.chain->collect_modules(out);
      if (p.seq) p.seq->collect_modules(out);
    }
    return out;
  }

  void zero_grads() {
    for (Param<S>* p : params()) p->grad.fill(S(0));
  }

  i64 param_count() {
    i64 n = 0;
    for (Param<S>* p : params()) n += p->value.numel();
    return n;
  }

  /// Parameterized compute layers (convolutions and fully connected), the
  /// count the N-layer naming uses.
  int layer_count() {
    int n = 0;
    for (Module<S>* m : modules())
      if (m->kind() == "conv2d" || m->kind() == "linear") ++n;
    return n;
  }

  /// Charge parameter and gradient storage to the ledger (call once per run).
  void register_memory(RunContext& ctx) {
    u64 bytes = 0;
    for (Param<S>* p : params()) bytes += p->value.bytes();
    ctx.ledger.track(MemCategory::parameters, bytes, MemEvent::alloc);
    ctx.ledger.track(MemCategory::gradients, bytes, MemEvent::alloc);
  }

private:
  enum class PartKind { cached, split_channel, split_duplicate, rev, merge_concat, merge_average };
  struct Part {
    PartKind kind;
    std::unique_ptr<Module<S>> chain;
    std::unique_ptr<ReversibleSequence<S>> seq;
    std::unique_ptr<Tape<S>> tape;
  };
  std::vector<Part> parts_;
  EngineMode last_mode_ = EngineMode::oracle;
};

// ---------------------------------------------------------------------------
// builders

template <typename S>
std::unique_ptr<Network<S>> build_revsresnet(const ResNetConfig<S>& cfg, u64 seed) {
  cfg.validate(true);
  Rng rng(seed);
  auto net = std::make_unique<Network<S>>();
  net->time_steps = cfg.T;
  net->num_classes = cfg.num_classes;
  net->family = "revsresnet";

  auto stem = std::make_unique<Sequential<S>>();
  stem->add(std::make_unique<ConvLayer<S>>(cfg.in_channels, cfg.stem_channels, 3, cfg.stem_stride, 1, rng));
  stem->add(std::make_unique<BatchNormLayer<S>>(cfg.stem_channels));
  stem->set_name("stem");
  net->add_cached(std::move(stem));

  const std::size_t stages = cfg.blocks_per_stage.size();
  for (std::size_t i = 0; i < stages; ++i) {
    if (i == 0) {
      net->add_split_channel();
    } else {
      net->add_merge_concat();
      net->add_cached(make_downsample_block<S>(2 * cfg.stream_channels[i - 1],
                                               2 * cfg.stream_channels[i], cfg.neuron, rng));
      net->add_split_channel();
    }
    ReversibleSequence<S>* seq = net->add_reversible();
    for (i64 b = 0; b < cfg.blocks_per_stage[i]; ++b)
      seq->add(std::make_unique<CouplingBlock<S>>(
          make_residual_fn<S>(cfg.stream_channels[i], cfg.neuron, rng),
          make_residual_fn<S>(cfg.stream_channels[i], cfg.neuron, rng)));
  }
  net->add_merge_concat();

  auto head = std::make_unique<Sequential<S>>();
  head->add(std::make_unique<GlobalPoolLayer<S>>());
  head->add(std::make_unique<LinearLayer<S>>(2 * cfg.stream_channels.back(), cfg.num_classes, rng));
  head->set_name("head");
  net->add_cached(std::move(head));
  return net;
}

template <typename S>
std::unique_ptr<Network<S>> build_revsformer(const FormerConfig<S>& cfg, u64 seed) {
  cfg.validate();
  Rng rng(seed);
  auto net = std::make_unique<Network<S>>();
  net->time_steps = cfg.T;
  net->num_classes = cfg.num_classes;
  net->family = "revsformer";

  net->add_cached(std::make_unique<SpikingTokenizer<S>>(cfg.in_channels, cfg.tokenizer_channels,
                                                        cfg.tokenizer_pools, cfg.neuron, rng));
  net->add_split_duplicate();
  ReversibleSequence<S>* seq = net->add_reversible();
  for (int b = 0; b < cfg.L; ++b)
    seq->add(std::make_unique<CouplingBlock<S>>(
        std::make_unique<SSABlock<S>>(cfg.embed_dim, cfg.heads, cfg.neuron, rng, cfg.attn_scale),
        make_mlp_block<S>(cfg.embed_dim, cfg.mlp_ratio, cfg.neuron, rng)));
  net->add_merge_average();

  auto head = std::make_unique<Sequential<S>>();
  head->add(std::make_unique<SpikingNeuron<S>>(cfg.neuron));
  head->add(std::make_unique<TokenMeanLayer<S>>());
  head->add(std::make_unique<LinearLayer<S>>(cfg.embed_dim, cfg.num_classes, rng));
  head->set_name("head");
  net->add_cached(std::move(head));
  return net;
}

/// Single-stream twin trained with the cached engine only. For ResNet
/// configs this is the standard strided-projection residual network; the
/// config's channels are full widths.
template <typename S>
std::unique_ptr<Network<S>> build_vanilla_counterpart(const ResNetConfig<S>& cfg, u64 seed) {
  cfg.validate(false);
  Rng rng(seed);
  auto net = std::make_unique<Network<S>>();
  net->time_steps = cfg.T;
  net->num_classes = cfg.num_classes;
  net->family = "vanilla_resnet";

  auto body = std::make_unique<Sequential<S>>();
  auto stem = std::make_unique<Sequential<S>>();
  stem->add(std::make_unique<ConvLayer<S>>(cfg.in_channels, cfg.stream_channels[0], 3,
                                           cfg.stem_stride, 1, rng));
  stem->add(std::make_unique<BatchNormLayer<S>>(cfg.stream_channels[0]));
  stem->set_name("stem");
  body->add(std::move(stem));
  i64 prev = cfg.stream_channels[0];
  for (std::size_t i = 0; i < cfg.blocks_per_stage.size(); ++i) {
    for (i64 b = 0; b < cfg.blocks_per_stage[i]; ++b) {
      const i64 stride = (i > 0 && b == 0) ? 2 : 1;
      body->add(std::make_unique<VanillaResBlock<S>>(prev, cfg.stream_channels[i], stride,
                                                     cfg.neuron, rng));
      prev = cfg.stream_channels[i];
    }
  }
  auto head = std::make_unique<Sequential<S>>();
  head->add(std::make_unique<GlobalPoolLayer<S>>());
  head->add(std::make_unique<LinearLayer<S>>(prev, cfg.num_classes, rng));
  head->set_name("head");
  body->add(std::move(head));
  net->add_cached(std::move(body));
  return net;
}

template <typename S>
std::unique_ptr<Network<S>> build_vanilla_counterpart(const FormerConfig<S>& cfg, u64 seed) {
  cfg.validate();
  Rng rng(seed);
  auto net = std::make_unique<Network<S>>();
  net->time_steps = cfg.T;
  net->num_classes = cfg.num_classes;
  net->family = "vanilla_former";

  auto body = std::make_unique<Sequential<S>>();
  body->add(std::make_unique<SpikingTokenizer<S>>(cfg.in_channels, cfg.tokenizer_channels,
                                                  cfg.tokenizer_pools, cfg.neuron, rng));
  for (int b = 0; b < cfg.L; ++b)
    body->add(std::make_unique<VanillaFormerBlock<S>>(
        std::make_unique<SSABlock<S>>(cfg.embed_dim, cfg.heads, cfg.neuron, rng, cfg.attn_scale),
        make_mlp_block<S>(cfg.embed_dim, cfg.mlp_ratio, cfg.neuron, rng)));
  auto head = std::make_unique<Sequential<S>>();
  head->add(std::make_unique<SpikingNeuron<S>>(cfg.neuron));
  head->add(std::make_unique<TokenMeanLayer<S>>());
  head->add(std::make_unique<LinearLayer<S>>(cfg.embed_dim, cfg.num_classes, rng));
  head->set_name("head");
  body->add(std::move(head));
  net->add_cached(std::move(body));
  return net;
}

/// Constant-current coding: repeat the analog batch at every time step.
template <typename S>
Seq<S> encode_constant(const Tensor<S>& batch, int T) {
  Seq<S> xs;
  xs.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) xs.push_back(batch);
  return xs;
}

/// Dense (conv + linear + attention) forward multiply-adds over T steps at
/// batch 1; the model-complexity figure of the summaries.
template <typename S>
u64 measure_dense_flops(Network<S>& net, const std::vector<i64>& input_chw, int T) {
  RunContext ctx;
  Rng rng(12345);
  Tensor<S> img({1, input_chw[0], input_chw[1], input_chw[2]});
  rng.fill_normal(img, 0.0, 1.0);
  net.forward_eval(encode_constant(img, T), ctx);
  return ctx.ops.dense_mult_adds(Phase::forward);
}

struct SummaryRow {
  std::string name;
  std::string kind;
  i64 params;
};

template <typename S>
std::vector<SummaryRow> summarize(Network<S>& net) {
  std::vector<SummaryRow> rows;
  for (Module<S>* m : net.modules()) {
    std::vector<Param<S>*> ps;
    m->collect_params(ps);
    i64 n = 0;
    for (auto* p : ps) n += p->value.numel();
    rows.push_back(SummaryRow{m->name().empty() ? m->kind() : m->name(), m->kind(), n});
  }
  return rows;
}

}  // namespace revsnn
