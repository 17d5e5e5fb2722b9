#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "revsnn/bench.hpp"
#include "revsnn/config.hpp"
#include "revsnn/train.hpp"

// The verification suite: every invariant of the engine run at fixed seeds
// with pinned tolerances, reported as pass/fail entries. Exact checks
// (reconstruction, gradients, finite differences) are separated from
// paper-qualitative checks (memory scaling slopes, compute ratios).

namespace revsnn::verify {

struct Options {
  u64 seed = 20240501;
  bool quick = false;  // reduced trial counts for smoke runs
  enum class Inject { none, skip_reset, corrupt_stats } inject = Inject::none;
  int threads = 1;
};

struct Property {
  std::string name;
  std::string kind;  // "exact" | "paper_qualitative"
  bool pass = false;
  nlohmann::json measured;
  nlohmann::json tolerance;
  std::string details;
};

struct Report {
  std::vector<Property> properties;
  u64 seed = 0;
  std::string precision;
  bool quick = false;
  std::string inject = "none";
  double wall_ms = 0;
  std::string timestamp;

  bool all_pass() const {
    for (const auto& p : properties)
      if (!p.pass) return false;
    return true;
  }

  const Property* find(const std::string& name) const {
    for (const auto& p : properties)
      if (p.name == name) return &p;
    return nullptr;
  }

  nlohmann::json to_json(bool include_volatile = true) const {
    nlohmann::json props = nlohmann::json::array();
    for (const auto& p : properties)
      props.push_back({{"name", p.name},
                       {"kind", p.kind},
                       {"pass", p.pass},
                       {"measured", p.measured},
                       {"tolerance", p.tolerance},
                       {"details", p.details}});
    nlohmann::json j{{"suite", "revsnn-verify"}, {"seed", seed},       {"precision", precision},
                     {"quick", quick},           {"inject", inject},   {"all_pass", all_pass()},
                     {"properties", props}};
    if (include_volatile) {
      j["timestamp"] = timestamp;
      j["wall_ms"] = wall_ms;
    }
    return j;
  }
};

/// Exact-check tolerances; 32-bit speed runs relax them by 1e3.
template <typename S>
struct Tolerances {
  static constexpr double scale = sizeof(S) == 8 ? 1.0 : 1e3;
  static constexpr double fd = 1e-5 * scale;
  static constexpr double fd_step = sizeof(S) == 8 ? 1e-6 : 3e-3;
  static constexpr double fd_loss = 1e-6 * scale;
  // the 64-bit bound scaled by 1e3 would sit below float epsilon
  static constexpr double linearity = sizeof(S) == 8 ? 1e-12 : 1e-5;
  static constexpr double hand_bptt = 1e-10 * scale;
  static constexpr double reconstruction = 1e-9 * scale;
  static constexpr double knife_edge = 1e-6 * scale;
  static constexpr double grad_equiv = 1e-8 * scale;
  static constexpr double hand_grad = 1e-10 * scale;
  static constexpr double param_trajectory = 1e-6 * scale;
};

namespace detail {

template <typename S>
double rel_diff(const Tensor<S>& a, const Tensor<S>& b) {
  double scale = 0, diff = 0;
  for (i64 i = 0; i < a.numel(); ++i) {
    scale = std::max({scale, std::fabs(static_cast<double>(a[i])),
                      std::fabs(static_cast<double>(b[i]))});
    diff = std::max(diff, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return diff / (scale + 1e-300);
}

template <typename S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  double diff = 0;
  for (i64 i = 0; i < a.numel(); ++i)
    diff = std::max(diff, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return diff;
}

template <typename S>
bool bit_equal(const Tensor<S>& a, const Tensor<S>& b) {
  if (!a.same_shape(b)) return false;
  for (i64 i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

/// Central finite differences of a scalar function of one tensor.
template <typename S>
Tensor<S> numeric_grad(const std::function<double(const Tensor<S>&)>& f, Tensor<S> x,
                       double h = 1e-6) {
  Tensor<S> g(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) {
    const S keep = x[i];
    x[i] = keep + static_cast<S>(h);
    const double up = f(x);
    x[i] = keep - static_cast<S>(h);
    const double dn = f(x);
    x[i] = keep;
    g[i] = static_cast<S>((up - dn) / (2 * h));
  }
  return g;
}

template <typename S>
double fd_rel_error(const Tensor<S>& analytic, const Tensor<S>& numeric) {
  double err = 0;
  for (i64 i = 0; i < analytic.numel(); ++i) {
    const double a = static_cast<double>(analytic[i]);
    const double n = static_cast<double>(numeric[i]);
    err = std::max(err, std::fabs(a - n) / std::max({1.0, std::fabs(a), std::fabs(n)}));
  }
  return err;
}

/// Random coupling block drawn from the acceptance distribution: residual,
/// SSA or MLP bodies, LIF or IF neurons, T in {1,2,4}, channels <= 16,
/// spatial <= 8x8.
template <typename S>
struct RandomBlock {
  std::unique_ptr<CouplingBlock<S>> block;
  std::vector<i64> stream_shape;
  int T = 1;
  std::string family;
};

template <typename S>
RandomBlock<S> sample_block(Rng& rng) {
  RandomBlock<S> rb;
  NeuronParams<S> np;
  np.kind = rng.uniform() < 0.5 ? NeuronKind::lif : NeuronKind::if_;
  const int t_choices[3] = {1, 2, 4};
  rb.T = t_choices[rng.below(3)];
  const int fam = static_cast<int>(rng.below(3));
  if (fam == 0) {
    const i64 c = 2 + 2 * rng.below(8);  // 2..16
    const i64 hw = 2 + rng.below(7);     // 2..8
    const i64 b = 1 + rng.below(2);
    rb.block = std::make_unique<CouplingBlock<S>>(make_residual_fn<S>(c, np, rng),
                                                  make_residual_fn<S>(c, np, rng));
    rb.stream_shape = {b, c, hw, hw};
    rb.family = "residual";
  } else {
    const i64 heads = 2;
    const i64 d = heads * (2 + 2 * rng.below(4));  // 4..16 per head block
    const i64 n = 2 + rng.below(7);
    const i64 b = 1 + rng.below(2);
    if (fam == 1) {
      rb.block = std::make_unique<CouplingBlock<S>>(
          std::make_unique<SSABlock<S>>(d, heads, np, rng),
          make_mlp_block<S>(d, 2.0, np, rng));
      rb.family = "ssa_mlp";
    } else {
      rb.block = std::make_unique<CouplingBlock<S>>(make_mlp_block<S>(d, 2.0, np, rng),
                                                    make_mlp_block<S>(d, 2.0, np, rng));
      rb.family = "mlp_mlp";
    }
    rb.stream_shape = {b, n, d};
  }
  return rb;
}

template <typename S>
Seq<S> random_seq(Rng& rng, const std::vector<i64>& shape, int T, double stddev = 1.0) {
  Seq<S> xs;
  for (int t = 0; t < T; ++t) {
    Tensor<S> x(shape);
    rng.fill_normal(x, 0.0, stddev);
    xs.push_back(std::move(x));
  }
  return xs;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// individual properties

/// Rerunning a kernel on identical inputs is bit-identical.
template <typename S>
Property check_kernel_determinism(u64 seed) {
  Property p{.name = "kernel_determinism", .kind = "exact"};
  Rng rng(seed);
  Tensor<S> x({2, 3, 6, 6}), w({4, 3, 3, 3});
  rng.fill_normal(x, 0.0, 1.0);
  rng.fill_normal(w, 0.0, 0.5);
  bool ok = detail::bit_equal(kernels::conv2d(x, w, nullptr, 1, 1),
                              kernels::conv2d(x, w, nullptr, 1, 1));
  Tensor<S> g({4}), b({4});
  g.fill(S(1.3));
  b.fill(S(-0.2));
  auto r1 = kernels::batchnorm(x.reshaped({2, 4, 27, 1}), g, b, kernels::BnMode::train);
  auto r2 = kernels::batchnorm(x.reshaped({2, 4, 27, 1}), g, b, kernels::BnMode::train);
  ok = ok && detail::bit_equal(r1.y, r2.y);
  Tensor<S> lx({3, 5}), lw({2, 5});
  rng.fill_normal(lx, 0.0, 1.0);
  rng.fill_normal(lw, 0.0, 1.0);
  ok = ok && detail::bit_equal(kernels::linear(lx, lw, nullptr), kernels::linear(lx, lw, nullptr));
  p.pass = ok;
  p.measured = {{"bit_identical", ok}};
  p.tolerance = {{"exact", true}};
  p.details = "conv2d/batchnorm/linear rerun bit-identically on identical inputs";
  return p;
}

/// Every smooth kernel matches central finite differences.
template <typename S>
Property check_finite_differences(u64 seed) {
  Property p{.name = "finite_difference_kernels", .kind = "exact"};
  Rng rng(seed);
  double worst = 0;
  std::string worst_op = "none";
  auto note = [&](const std::string& op, double err) {
    if (err > worst) {
      worst = err;
      worst_op = op;
    }
  };

  {  // conv2d (stride 1 and 2, with bias)
    for (i64 stride : {i64(1), i64(2)}) {
      Tensor<S> x({2, 2, 5, 5}), w({3, 2, 3, 3}), bias({3}), c;
      rng.fill_normal(x, 0.0, 1.0);
      rng.fill_normal(w, 0.0, 0.7);
      rng.fill_normal(bias, 0.0, 0.3);
      Tensor<S> y = kernels::conv2d(x, w, &bias, stride, 1);
      c = Tensor<S>(y.shape());
      rng.fill_normal(c, 0.0, 1.0);
      auto g = kernels::conv2d_vjp(x, w, true, stride, 1, c);
      auto lossx = [&](const Tensor<S>& xx) {
        Tensor<S> yy = kernels::conv2d(xx, w, &bias, stride, 1);
        double s = 0;
        for (i64 i = 0; i < yy.numel(); ++i) s += static_cast<double>(c[i] * yy[i]);
        return s;
      };
      auto lossw = [&](const Tensor<S>& ww) {
        Tensor<S> yy = kernels::conv2d(x, ww, &bias, stride, 1);
        double s = 0;
        for (i64 i = 0; i < yy.numel(); ++i) s += static_cast<double>(c[i] * yy[i]);
        return s;
      };
      note("conv2d.dx", detail::fd_rel_error(g.dx, detail::numeric_grad<S>(lossx, x, Tolerances<S>::fd_step)));
      note("conv2d.dw", detail::fd_rel_error(g.dw, detail::numeric_grad<S>(lossw, w, Tolerances<S>::fd_step)));
    }
  }
  {  // linear
    Tensor<S> x({3, 4}), w({2, 4}), bias({2});
    rng.fill_normal(x, 0.0, 1.0);
    rng.fill_normal(w, 0.0, 1.0);
    rng.fill_normal(bias, 0.0, 0.5);
    Tensor<S> c({3, 2});
    rng.fill_normal(c, 0.0, 1.0);
    auto g = kernels::linear_vjp(x, w, true, c);
    auto lossx = [&](const Tensor<S>& xx) {
      Tensor<S> yy = kernels::linear(xx, w, &bias);
      double s = 0;
      for (i64 i = 0; i < yy.numel(); ++i) s += static_cast<double>(c[i] * yy[i]);
      return s;
    };
    note("linear.dx", detail::fd_rel_error(g.dx, detail::numeric_grad<S>(lossx, x, Tolerances<S>::fd_step)));
  }
  {  // batchnorm layer (train mode, folded over two steps)
    RunContext ctx;
    BatchNormLayer<S> bn(3);
    Tensor<S> x0({2, 3, 2, 2}), x1({2, 3, 2, 2});
    rng.fill_normal(x0, 0.0, 1.0);
    rng.fill_normal(x1, 0.0, 1.0);
    Seq<S> c = detail::random_seq<S>(rng, {2, 3, 2, 2}, 2);
    auto run = [&](const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tp) {
      Seq<S> xs{a, b};
      return bn.forward(xs, RunMode::train_cached, tp, nullptr, ctx);
    };
    Tape<S> tape;
    Seq<S> ys = run(x0, x1, &tape);
    (void)ys;
    Seq<S> dx = bn.backward(c, tape, ctx);
    auto loss0 = [&](const Tensor<S>& xx) {
      Tape<S> tp;
      Seq<S> yy = run(xx, x1, &tp);
      double s = 0;
      for (int t = 0; t < 2; ++t)
        for (i64 i = 0; i < yy[0].numel(); ++i)
          s += static_cast<double>(c[static_cast<std::size_t>(t)][i] *
                                   yy[static_cast<std::size_t>(t)][i]);
      return s;
    };
    note("batchnorm.dx0", detail::fd_rel_error(dx[0], detail::numeric_grad<S>(loss0, x0, Tolerances<S>::fd_step)));
  }
  {  // avgpool
    Tensor<S> x({1, 2, 4, 4});
    rng.fill_normal(x, 0.0, 1.0);
    Tensor<S> y = kernels::avgpool2d(x, 3, 2, 1);
    Tensor<S> c(y.shape());
    rng.fill_normal(c, 0.0, 1.0);
    Tensor<S> dx = kernels::avgpool2d_vjp(x.shape(), 3, 2, 1, c);
    auto loss = [&](const Tensor<S>& xx) {
      Tensor<S> yy = kernels::avgpool2d(xx, 3, 2, 1);
      double s = 0;
      for (i64 i = 0; i < yy.numel(); ++i) s += static_cast<double>(c[i] * yy[i]);
      return s;
    };
    note("avgpool.dx", detail::fd_rel_error(dx, detail::numeric_grad<S>(loss, x, Tolerances<S>::fd_step)));
  }
  {  // attention products
    Tensor<S> q({1, 3, 4}), k({1, 3, 4}), v({1, 3, 4});
    rng.fill_uniform(q, 0.0, 1.0);
    rng.fill_uniform(k, 0.0, 1.0);
    rng.fill_uniform(v, 0.0, 1.0);
    Tensor<S> a = kernels::attn_scores(q, k, 2);
    Tensor<S> y = kernels::attn_apply(a, v, 2, S(0.125));
    Tensor<S> c(y.shape());
    rng.fill_normal(c, 0.0, 1.0);
    auto ga = kernels::attn_apply_vjp(a, v, 2, S(0.125), c);
    auto gs = kernels::attn_scores_vjp(q, k, 2, ga.da);
    auto lossq = [&](const Tensor<S>& qq) {
      Tensor<S> aa = kernels::attn_scores(qq, k, 2);
      Tensor<S> yy = kernels::attn_apply(aa, v, 2, S(0.125));
      double s = 0;
      for (i64 i = 0; i < yy.numel(); ++i) s += static_cast<double>(c[i] * yy[i]);
      return s;
    };
    note("attention.dq", detail::fd_rel_error(gs.dq, detail::numeric_grad<S>(lossq, q, Tolerances<S>::fd_step)));
  }
  {  // coupling addition
    Tensor<S> a({2, 3}), b({2, 3}), c({2, 3});
    rng.fill_normal(a, 0.0, 1.0);
    rng.fill_normal(b, 0.0, 1.0);
    rng.fill_normal(c, 0.0, 1.0);
    auto loss = [&](const Tensor<S>& aa) {
      Tensor<S> y = kernels::add(aa, b);
      double s = 0;
      for (i64 i = 0; i < y.numel(); ++i) s += static_cast<double>(c[i] * y[i]);
      return s;
    };
    note("coupling_add.da", detail::fd_rel_error(c, detail::numeric_grad<S>(loss, a, Tolerances<S>::fd_step)));
  }
  double loss_err = 0;
  {  // rate-decoded cross entropy (tighter 1e-6 tolerance)
    Seq<S> logits = detail::random_seq<S>(rng, {3, 4}, 2);
    std::vector<int> labels{1, 3, 0};
    auto lr = cross_entropy_rate_loss(logits, labels);
    for (int t = 0; t < 2; ++t) {
      auto loss = [&](const Tensor<S>& l) {
        Seq<S> ls = logits;
        ls[static_cast<std::size_t>(t)] = l;
        return cross_entropy_rate_loss(ls, labels).loss;
      };
      loss_err = std::max(loss_err,
                          detail::fd_rel_error(
                              lr.dlogits[static_cast<std::size_t>(t)],
                              detail::numeric_grad<S>(loss, logits[static_cast<std::size_t>(t)],
                                                      Tolerances<S>::fd_step)));
    }
  }

  p.pass = worst <= Tolerances<S>::fd && loss_err <= Tolerances<S>::fd_loss;
  p.measured = {{"max_rel_error", worst}, {"worst_kernel", worst_op}, {"loss_rel_error", loss_err}};
  p.tolerance = {{"max_rel_error", Tolerances<S>::fd}, {"loss_rel_error", Tolerances<S>::fd_loss}};
  p.details = "central differences against every smooth kernel vjp";
  return p;
}

/// Bias-free convolution is exactly linear in its input.
template <typename S>
Property check_conv_linearity(u64 seed) {
  Property p{.name = "conv_linearity", .kind = "exact"};
  Rng rng(seed);
  Tensor<S> x({1, 2, 5, 5}), w({3, 2, 3, 3});
  rng.fill_normal(x, 0.0, 1.0);
  rng.fill_normal(w, 0.0, 1.0);
  const S a = S(1.7346);
  Tensor<S> xs(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) xs[i] = a * x[i];
  Tensor<S> y1 = kernels::conv2d(xs, w, nullptr, 1, 0);
  Tensor<S> y0 = kernels::conv2d(x, w, nullptr, 1, 0);
  double err = 0;
  for (i64 i = 0; i < y1.numel(); ++i) {
    const double want = static_cast<double>(a) * static_cast<double>(y0[i]);
    err = std::max(err, std::fabs(static_cast<double>(y1[i]) - want) /
                            std::max(1.0, std::fabs(want)));
  }
  p.pass = err <= Tolerances<S>::linearity;
  p.measured = {{"max_rel_error", err}};
  p.tolerance = {{"max_rel_error", Tolerances<S>::linearity}};
  p.details = "conv2d(a*x) == a*conv2d(x) for bias-free convolution";
  return p;
}

/// Spikes are exactly binary; replay after reset is bit-identical.
template <typename S>
Property check_spikes_and_replay(u64 seed) {
  Property p{.name = "spike_binarity_replay", .kind = "exact"};
  Rng rng(seed);
  RunContext ctx;
  bool binary = true, replay_ok = true;
  for (int trial = 0; trial < 8; ++trial) {
    NeuronParams<S> np;
    np.kind = trial % 2 == 0 ? NeuronKind::lif : NeuronKind::if_;
    SpikingNeuron<S> sn(np);
    Seq<S> xs = detail::random_seq<S>(rng, {2, 3, 4, 4}, 3);
    Tape<S> t1, t2;
    Seq<S> s1 = sn.forward(xs, RunMode::train_cached, &t1, nullptr, ctx);
    sn.reset_state(ctx);
    Seq<S> s2 = sn.forward(xs, RunMode::train_cached, &t2, nullptr, ctx);
    sn.reset_state(ctx);
    for (std::size_t t = 0; t < s1.size(); ++t) {
      for (i64 i = 0; i < s1[t].numel(); ++i)
        if (s1[t][i] != S(0) && s1[t][i] != S(1)) binary = false;
      if (!detail::bit_equal(s1[t], s2[t])) replay_ok = false;
    }
  }
  p.pass = binary && replay_ok;
  p.measured = {{"binary_outputs", binary}, {"replay_bit_identical", replay_ok}};
  p.tolerance = {{"exact", true}};
  p.details = "every spike in {0,1}; reset + rerun reproduces spikes bit-exactly";
  return p;
}

/// Hand-derived two-step BPTT through the LIF dynamics for a single neuron.
template <typename S>
Property check_neuron_hand_bptt() {
  Property p{.name = "neuron_bptt_hand", .kind = "exact"};
  // tau=2, v_th=1, v_reset=0, inputs I=(1.5, 1.2), loss = 1.0*S1 + 0.5*S2.
  //   H1 = 0.75         S1 = 0   V1 = 0.75
  //   H2 = 0.975        S2 = 0
  // Backward (surrogate width 1 so sg=1 inside the window):
  //   dH2 = 0.5, dI2 = 0.25, gV = 0.25
  //   dH1 = 1.0 + 0.25 = 1.25, dI1 = 0.625
  NeuronParams<S> np;
  RunContext ctx;
  SpikingNeuron<S> sn(np);
  Seq<S> xs{Tensor<S>::full({1, 1}, S(1.5)), Tensor<S>::full({1, 1}, S(1.2))};
  Tape<S> tape;
  Seq<S> s = sn.forward(xs, RunMode::train_cached, &tape, nullptr, ctx);
  Seq<S> dys{Tensor<S>::full({1, 1}, S(1.0)), Tensor<S>::full({1, 1}, S(0.5))};
  Seq<S> dx = sn.backward(dys, tape, ctx);
  sn.reset_state(ctx);
  const double e1 = std::fabs(static_cast<double>(dx[0][0]) - 0.625);
  const double e2 = std::fabs(static_cast<double>(dx[1][0]) - 0.25);
  const double es = std::fabs(static_cast<double>(s[0][0])) + std::fabs(static_cast<double>(s[1][0]));
  const double err = std::max(e1, e2);
  p.pass = err <= Tolerances<S>::hand_bptt && es == 0.0;
  p.measured = {{"dI1", static_cast<double>(dx[0][0])},
                {"dI2", static_cast<double>(dx[1][0])},
                {"max_abs_error", err}};
  p.tolerance = {{"max_abs_error", Tolerances<S>::hand_bptt}};
  p.details = "engine BPTT equals the hand expansion of the membrane recursion at T=2";
  return p;
}

struct Theorem1Stats {
  int trials = 0;
  int excluded_knife_edge = 0;
  double max_real_error = 0;
  bool spikes_exact = true;
  bool shapes_match = true;
  int failures = 0;
};

/// Reconstruction: forward-reset-reverse reproduces inputs and every
/// intermediate. Spikes bit-exact, real values <= 1e-9 max-abs, knife-edge
/// guard active. Fault injection (skipped reset / corrupted statistics)
/// lands here and must flip the property.
template <typename S>
Property check_theorem1(u64 seed, int trials, Options::Inject inject) {
  Property p{.name = "theorem1_reconstruction", .kind = "exact"};
  Rng rng(seed);
  Theorem1Stats st;
  int attempts = 0;
  while (st.trials < trials && attempts < trials * 20) {
    ++attempts;
    Rng block_rng(seed + 7919u * static_cast<u64>(attempts));
    auto rb = detail::sample_block<S>(block_rng);
    RunContext ctx;
    Seq<S> x1 = detail::random_seq<S>(block_rng, rb.stream_shape, rb.T);
    Seq<S> x2 = detail::random_seq<S>(block_rng, rb.stream_shape, rb.T);

    // Oracle route: cached forward.
    Tape<S> tape_fwd(&ctx.ledger);
    auto [y1, y2] = rb.block->forward(x1, x2, RunMode::train_cached, tape_fwd, ctx);
    if (ctx.knife_edge_margin < Tolerances<S>::knife_edge) {
      ++st.excluded_knife_edge;  // excluded by construction, resample
      continue;
    }
    rb.block->reset_state(ctx);

    // Reversible route: stats-only forward, reset, reverse.
    Tape<S> tape_stats(&ctx.ledger);
    auto [y1b, y2b] = rb.block->forward(x1, x2, RunMode::train_stats_only, tape_stats, ctx);
    if (inject != Options::Inject::skip_reset) rb.block->reset_state(ctx);
    if (inject == Options::Inject::corrupt_stats) {
      std::vector<Module<S>*> mods;
      rb.block->collect_modules(mods);
      for (Module<S>* m : mods)
        if (m->kind() == "batchnorm" && tape_stats.has_stats(m->id())) {
          tape_stats.mutable_stats(m->id()).mean[0] += S(1e-3);
          break;
        }
    }
    Tape<S> tape_rev(&ctx.ledger);
    auto [rx1, rx2] =
        rb.block->reverse(y1b, y2b, tape_stats, tape_rev, ctx,
                          /*enforce_reset=*/inject != Options::Inject::skip_reset);
    rb.block->reset_state(ctx);

    double real_err = 0;
    bool spikes_ok = true, shapes_ok = true;
    for (int t = 0; t < rb.T; ++t) {
      real_err = std::max(real_err, detail::max_abs_diff(rx1[static_cast<std::size_t>(t)],
                                                         x1[static_cast<std::size_t>(t)]));
      real_err = std::max(real_err, detail::max_abs_diff(rx2[static_cast<std::size_t>(t)],
                                                         x2[static_cast<std::size_t>(t)]));
    }
    auto fwd_entries = tape_fwd.entries_sorted();
    auto rev_entries = tape_rev.entries_sorted();
    if (fwd_entries.size() != rev_entries.size()) {
      shapes_ok = false;
    } else {
      for (std::size_t i = 0; i < fwd_entries.size(); ++i) {
        const auto& a = fwd_entries[i];
        const auto& b = rev_entries[i];
        if (a.layer != b.layer || a.t != b.t || a.name != b.name ||
            !a.value->same_shape(*b.value)) {
          shapes_ok = false;
          break;
        }
        if (a.name == "S") {
          if (!detail::bit_equal(*a.value, *b.value)) spikes_ok = false;
        } else {
          real_err = std::max(real_err, detail::max_abs_diff(*a.value, *b.value));
        }
      }
    }
    ++st.trials;
    st.max_real_error = std::max(st.max_real_error, real_err);
    st.spikes_exact = st.spikes_exact && spikes_ok;
    st.shapes_match = st.shapes_match && shapes_ok;
    if (real_err > Tolerances<S>::reconstruction || !spikes_ok || !shapes_ok) ++st.failures;
  }
  p.pass = st.trials == trials && st.failures == 0;
  p.measured = {{"trials", st.trials},
                {"excluded_knife_edge", st.excluded_knife_edge},
                {"max_real_abs_error", st.max_real_error},
                {"spikes_bit_exact", st.spikes_exact},
                {"tape_shapes_match", st.shapes_match},
                {"failing_trials", st.failures}};
  p.tolerance = {{"max_real_abs_error", Tolerances<S>::reconstruction}, {"spikes", "bit-exact"}};
  p.details = "forward-reset-reverse rebuilds inputs, spikes, membrane potentials and tapes";
  return p;
}

/// Gradient equivalence: reversible-engine gradients vs cached-oracle
/// gradients on random 1-4 block sequences, plus the hand-derived
/// single-neuron weight gradient at T=2 through both engines.
template <typename S>
Property check_gradient_equivalence(u64 seed, int trials) {
  Property p{.name = "gradient_equivalence", .kind = "exact"};
  Rng rng(seed);
  double worst = 0;
  int done = 0, attempts = 0;
  while (done < trials && attempts < trials * 20) {
    ++attempts;
    Rng block_rng(seed + 104729u * static_cast<u64>(attempts));
    NeuronParams<S> np;
    np.kind = block_rng.uniform() < 0.5 ? NeuronKind::lif : NeuronKind::if_;
    const int depth = 1 + static_cast<int>(block_rng.below(4));
    const int T = 1 << block_rng.below(3);
    const i64 c = 2 + 2 * block_rng.below(4);
    const i64 hw = 2 + block_rng.below(5);
    const i64 b = 1 + block_rng.below(2);
    ReversibleSequence<S> seq;
    for (int k = 0; k < depth; ++k)
      seq.add(std::make_unique<CouplingBlock<S>>(make_residual_fn<S>(c, np, block_rng),
                                                 make_residual_fn<S>(c, np, block_rng)));
    std::vector<i64> shape{b, c, hw, hw};
    Seq<S> x1 = detail::random_seq<S>(block_rng, shape, T);
    Seq<S> x2 = detail::random_seq<S>(block_rng, shape, T);
    Seq<S> dy1 = detail::random_seq<S>(block_rng, shape, T, 0.5);
    Seq<S> dy2 = detail::random_seq<S>(block_rng, shape, T, 0.5);

    std::vector<Param<S>*> params;
    seq.collect_params(params);
    RunContext ctx;
    for (auto* pp : params) pp->grad.fill(S(0));
    oracle_step(seq, x1, x2, dy1, dy2, ctx);
    if (ctx.knife_edge_margin < Tolerances<S>::knife_edge) continue;
    std::vector<Tensor<S>> oracle_grads;
    for (auto* pp : params) oracle_grads.push_back(pp->grad);

    for (auto* pp : params) pp->grad.fill(S(0));
    sequence_train_step(seq, x1, x2, dy1, dy2, ctx);
    double err = 0;
    for (std::size_t i = 0; i < params.size(); ++i)
      err = std::max(err, detail::rel_diff(oracle_grads[i], params[i]->grad));
    worst = std::max(worst, err);
    ++done;
  }

  // Single presynaptic weight, T=2, hand expansion: dw = 0.825 with
  // w=1.5, x=(1.0, 0.8), dY1=(1.0, 0.5) through F(x)=SN(w*x), G=0.
  double hand_err = 0;
  for (EngineMode mode : {EngineMode::oracle, EngineMode::reversible}) {
    NeuronParams<S> np;
    auto f = std::make_unique<Sequential<S>>();
    auto* scale = static_cast<ScaleLayer<S>*>(f->add(std::make_unique<ScaleLayer<S>>(S(1.5))));
    f->add(std::make_unique<SpikingNeuron<S>>(np));
    ReversibleSequence<S> seq;
    seq.add(std::make_unique<CouplingBlock<S>>(std::move(f), std::make_unique<ZeroModule<S>>()));
    Seq<S> x1{Tensor<S>::zeros({1, 1}), Tensor<S>::zeros({1, 1})};
    Seq<S> x2{Tensor<S>::full({1, 1}, S(1.0)), Tensor<S>::full({1, 1}, S(0.8))};
    Seq<S> dy1{Tensor<S>::full({1, 1}, S(1.0)), Tensor<S>::full({1, 1}, S(0.5))};
    Seq<S> dy2{Tensor<S>::zeros({1, 1}), Tensor<S>::zeros({1, 1})};
    RunContext ctx;
    scale->scale_param().grad.fill(S(0));
    if (mode == EngineMode::oracle)
      oracle_step(seq, x1, x2, dy1, dy2, ctx);
    else
      sequence_train_step(seq, x1, x2, dy1, dy2, ctx);
    hand_err = std::max(hand_err,
                        std::fabs(static_cast<double>(scale->scale_param().grad[0]) - 0.825));
  }

  p.pass = done == trials && worst <= Tolerances<S>::grad_equiv &&
           hand_err <= Tolerances<S>::hand_grad;
  p.measured = {{"trials", done}, {"max_rel_error", worst}, {"hand_eq_weight_grad_error", hand_err}};
  p.tolerance = {{"max_rel_error", Tolerances<S>::grad_equiv},
                 {"hand_eq_weight_grad_error", Tolerances<S>::hand_grad}};
  p.details = "sequence_train_step grads match oracle grads; both match the hand expansion";
  return p;
}

/// Peak activation memory per image is flat in depth for the reversible
/// engine and a positive-slope line for the oracle.
inline Property check_memory_vs_depth(const bench::BenchResult& b) {
  Property p{.name = "memory_vs_depth", .kind = "paper_qualitative"};
  std::vector<double> depths, ora, rev;
  for (const auto& r : b.depth_rows) {
    if (r.mode == "oracle") {
      depths.push_back(r.depth);
      ora.push_back(r.peak_activation_bytes_per_img);
    } else {
      rev.push_back(r.peak_activation_bytes_per_img);
    }
  }
  const bench::LineFit fit = bench::fit_line(depths, ora);
  double mn = rev[0], mx = rev[0];
  for (double v : rev) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  const double spread = mx / mn;
  p.pass = spread <= 1.05 && fit.r2 > 0.99 && fit.slope > 0;
  p.measured = {{"reversible_peak_spread", spread},
                {"oracle_fit_r2", fit.r2},
                {"oracle_slope_bytes_per_block", fit.slope}};
  p.tolerance = {{"reversible_peak_spread", 1.05}, {"oracle_fit_r2_min", 0.99}};
  p.details = "depth sweep 1/2/4/8 blocks at T=4";
  return p;
}

/// Both engines grow linearly in T; the reversible slope is well under half
/// the oracle slope.
inline Property check_memory_vs_timestep(const bench::BenchResult& b) {
  Property p{.name = "memory_vs_timestep", .kind = "paper_qualitative"};
  std::vector<double> ts_o, peak_o, ts_r, peak_r;
  for (const auto& r : b.t_rows) {
    if (r.mode == "oracle") {
      ts_o.push_back(r.T);
      peak_o.push_back(r.peak_activation_bytes_per_img);
    } else {
      ts_r.push_back(r.T);
      peak_r.push_back(r.peak_activation_bytes_per_img);
    }
  }
  const bench::LineFit fo = bench::fit_line(ts_o, peak_o);
  const bench::LineFit fr = bench::fit_line(ts_r, peak_r);
  const double ratio = fo.slope != 0 ? fr.slope / fo.slope : 1.0;
  p.pass = fo.r2 > 0.99 && fr.r2 > 0.99 && ratio < 0.5 && fo.slope > 0 && fr.slope > 0;
  p.measured = {{"oracle_slope", fo.slope},
                {"reversible_slope", fr.slope},
                {"slope_ratio", ratio},
                {"oracle_r2", fo.r2},
                {"reversible_r2", fr.r2}};
  p.tolerance = {{"slope_ratio_max", 0.5}, {"r2_min", 0.99}};
  p.details = "time-step sweep 1/2/4/8 at depth 4";
  return p;
}

/// Training-step multiply-add ratio reversible/oracle lands in the
/// [1.25, 1.45] band at every benched configuration.
inline Property check_compute_overhead(const bench::BenchResult& b) {
  Property p{.name = "compute_overhead", .kind = "paper_qualitative"};
  double lo = 1e30, hi = 0;
  bool ok = true;
  for (const auto& entry : b.summary["op_ratios"]) {
    const double r = entry["op_ratio"].get<double>();
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    if (r < 1.25 || r > 1.45) ok = false;
  }
  p.pass = ok;
  p.measured = {{"min_ratio", lo}, {"max_ratio", hi}};
  p.tolerance = {{"band", {1.25, 1.45}}};
  p.details = "forward+reverse+backward ops over forward+backward ops, all sweep points";
  return p;
}

/// Layer-count formula, full-size parameter counts and model complexity
/// against the published configuration table.
inline Property check_structure_counts() {
  Property p{.name = "structure_counts", .kind = "exact"};
  nlohmann::json m;
  bool ok = true;
  auto pct = [](double got, double want) { return std::fabs(got - want) / want; };

  {
    auto net21 = build_revsresnet<float>(ResNetConfig<float>::revsresnet21(), 1);
    auto net37 = build_revsresnet<float>(ResNetConfig<float>::revsresnet37(), 1);
    auto net24 = build_revsresnet<float>(ResNetConfig<float>::revsresnet24(), 1);
    m["layers_n1111"] = net21->layer_count();
    m["layers_n1232"] = net37->layer_count();
    m["layers_3stage_n122"] = net24->layer_count();
    ok = ok && net21->layer_count() == 21 && net37->layer_count() == 37 &&
         net24->layer_count() == 24;

    const double p21 = static_cast<double>(net21->param_count());
    const double p37 = static_cast<double>(net37->param_count());
    m["params_revsresnet21_m"] = p21 / 1e6;
    m["params_revsresnet37_m"] = p37 / 1e6;
    ok = ok && pct(p21, 11.05e6) <= 0.05 && pct(p37, 23.59e6) <= 0.05;

    const double f21 = static_cast<double>(measure_dense_flops(*net21, {3, 32, 32}, 4));
    m["flops_revsresnet21_g"] = f21 / 1e9;
    ok = ok && pct(f21, 2.38e9) <= 0.10;

    auto ms18 = build_vanilla_counterpart<float>(ResNetConfig<float>::ms_resnet18(), 1);
    const double pms = static_cast<double>(ms18->param_count());
    const double fms = static_cast<double>(measure_dense_flops(*ms18, {3, 32, 32}, 4));
    m["params_ms_resnet18_m"] = pms / 1e6;
    m["flops_ms_resnet18_g"] = fms / 1e9;
    // Paired-config discipline: parameters within 5%, complexity within 10%.
    ok = ok && pct(pms, 11.22e6) <= 0.05;
    ok = ok && std::fabs(f21 - fms) / fms <= 0.10 && std::fabs(p21 - pms) / pms <= 0.05;
  }
  {
    auto f2 = build_revsformer<float>(FormerConfig<float>::revsformer(2, 384), 1);
    auto f4 = build_revsformer<float>(FormerConfig<float>::revsformer(4, 384), 1);
    const double p2 = static_cast<double>(f2->param_count());
    const double p4 = static_cast<double>(f4->param_count());
    m["params_revsformer_2_384_m"] = p2 / 1e6;
    m["params_revsformer_4_384_m"] = p4 / 1e6;
    ok = ok && pct(p2, 5.76e6) <= 0.05 && pct(p4, 9.32e6) <= 0.05;

    auto v4 = build_vanilla_counterpart<float>(FormerConfig<float>::revsformer(4, 384), 1);
    m["params_vanilla_former_4_384_m"] = static_cast<double>(v4->param_count()) / 1e6;
    ok = ok && v4->param_count() == f4->param_count();
  }
  p.pass = ok;
  p.measured = m;
  p.tolerance = {{"params_rel", 0.05}, {"flops_rel", 0.10}, {"layer_counts", "exact"}};
  p.details = "N = 5 + 4*sum(n_i); parameter and complexity targets at full size";
  return p;
}

template <typename S>
ResNetConfig<float> rev2float(const ResNetConfig<S>& c) {
  ResNetConfig<float> f;
  f.blocks_per_stage = c.blocks_per_stage;
  f.stream_channels = c.stream_channels;
  f.stem_channels = c.stem_channels;
  f.in_channels = c.in_channels;
  f.num_classes = c.num_classes;
  f.T = c.T;
  f.stem_stride = c.stem_stride;
  f.neuron.kind = c.neuron.kind;
  return f;
}

/// Cross-engine training equivalence and accuracy parity against the
/// complexity-matched single-stream counterpart on the toy task.
template <typename S>
Property check_training_parity(u64 seed, bool quick) {
  Property p{.name = "training_parity", .kind = "paper_qualitative"};
  const int seeds = quick ? 1 : 3;
  const i64 epochs = 24;
  const i64 batch = 8;

  ResNetConfig<S> rev_cfg;
  rev_cfg.blocks_per_stage = {1};
  rev_cfg.stream_channels = {8};
  rev_cfg.stem_channels = 16;
  rev_cfg.in_channels = 1;
  rev_cfg.num_classes = 2;
  rev_cfg.T = 2;
  ResNetConfig<S> van_cfg;
  van_cfg.blocks_per_stage = {1};
  van_cfg.stream_channels = {11};
  van_cfg.stem_channels = 11;
  van_cfg.in_channels = 1;
  van_cfg.num_classes = 2;
  van_cfg.T = 2;

  {  // complexity pairing of the two toy models
    auto a = build_revsresnet<float>(rev2float(rev_cfg), 1);
    auto b = build_vanilla_counterpart<float>(rev2float(van_cfg), 1);
    const double fa = static_cast<double>(measure_dense_flops(*a, {1, 8, 8}, 2));
    const double fb = static_cast<double>(measure_dense_flops(*b, {1, 8, 8}, 2));
    if (std::fabs(fa - fb) / fb > 0.10) {
      p.pass = false;
      p.measured = {{"flop_mismatch", std::fabs(fa - fb) / fb}};
      p.details = "toy pair is not complexity matched";
      return p;
    }
  }

  double max_param_rel = 0, worst_acc_gap = 0, min_train_acc = 1.0;
  double acc_rev_sum = 0, acc_van_sum = 0;
  for (int sd = 0; sd < seeds; ++sd) {
    const u64 s = seed + static_cast<u64>(sd);
    Dataset<S> data = make_synthetic<S>(SynthTask::two_gaussians, 64, 2, {1, 8, 8}, s);

    auto run = [&](std::unique_ptr<Network<S>> net, EngineMode mode) {
      TrainState<S> st;
      st.net = net.get();
      st.mode = mode;
      st.seed = s;
      st.opt.kind = OptKind::sgd;
      st.opt.lr = 0.05;
      st.opt.momentum = 0.9;
      net->register_memory(st.ctx);
      double best_train_acc = 0;
      for (i64 e = 0; e < epochs; ++e)
        best_train_acc = std::max(best_train_acc, train_epoch(st, data, batch).accuracy);
      std::vector<Tensor<S>> params;
      for (Param<S>* pp : net->params()) params.push_back(pp->value);
      RunContext ectx;
      const double acc = evaluate(*net, data, batch, ectx);
      return std::tuple<std::vector<Tensor<S>>, double, double>(std::move(params), acc,
                                                                best_train_acc);
    };

    auto [pr, acc_rev, tacc_r] = run(build_revsresnet<S>(rev_cfg, s), EngineMode::reversible);
    auto [po, acc_ora, tacc_o] = run(build_revsresnet<S>(rev_cfg, s), EngineMode::oracle);
    auto [pv, acc_van, tacc_v] = run(build_vanilla_counterpart<S>(van_cfg, s), EngineMode::oracle);
    (void)acc_ora;
    (void)tacc_v;
    for (std::size_t i = 0; i < pr.size(); ++i)
      max_param_rel = std::max(max_param_rel, detail::rel_diff(pr[i], po[i]));
    acc_rev_sum += acc_rev;
    acc_van_sum += acc_van;
    min_train_acc = std::min(min_train_acc, std::max(tacc_r, tacc_o));
  }
  worst_acc_gap = std::fabs(acc_rev_sum - acc_van_sum) / static_cast<double>(seeds);

  p.pass = max_param_rel <= Tolerances<S>::param_trajectory && worst_acc_gap <= 0.02 &&
           min_train_acc >= 0.95;
  p.measured = {{"cross_engine_param_rel", max_param_rel},
                {"accuracy_gap_points", worst_acc_gap * 100.0},
                {"min_best_train_accuracy", min_train_acc},
                {"seeds", seeds},
                {"epochs", epochs}};
  p.tolerance = {{"cross_engine_param_rel", Tolerances<S>::param_trajectory},
                 {"accuracy_gap_points", 2.0},
                 {"min_best_train_accuracy", 0.95}};
  p.details = "same-seed oracle vs reversible runs coincide; counterpart accuracy within 2 points";
  return p;
}

/// Config parser round-trips through its serializer.
inline Property check_config_roundtrip() {
  Property p{.name = "config_roundtrip", .kind = "exact"};
  RunConfig c = parse_config_text("[model]\nfamily = revsresnet\n");
  const std::string s1 = serialize_config(c);
  RunConfig c2 = parse_config_text(s1);
  const bool ok = config_equal(c, c2) && c.T == 4;
  p.pass = ok;
  p.measured = {{"roundtrip_equal", ok}, {"default_T", c.T}};
  p.tolerance = {{"exact", true}};
  p.details = "load -> serialize -> load is the identity; defaults fill missing keys";
  return p;
}

// ---------------------------------------------------------------------------

template <typename S = double>
Report run(const Options& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  Report rep;
  rep.seed = opt.seed;
  rep.precision = sizeof(S) == 8 ? "f64" : "f32";
  rep.quick = opt.quick;
  rep.inject = opt.inject == Options::Inject::none
                   ? "none"
                   : (opt.inject == Options::Inject::skip_reset ? "skip_reset" : "corrupt_stats");
  {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    rep.timestamp = buf;
  }

  const int th1_trials = opt.quick ? 10 : 50;
  const int grad_trials = opt.quick ? 5 : 20;

  rep.properties.push_back(check_kernel_determinism<S>(opt.seed));
  rep.properties.push_back(check_finite_differences<S>(opt.seed + 1));
  rep.properties.push_back(check_conv_linearity<S>(opt.seed + 2));
  rep.properties.push_back(check_spikes_and_replay<S>(opt.seed + 3));
  rep.properties.push_back(check_neuron_hand_bptt<S>());
  rep.properties.push_back(check_theorem1<S>(opt.seed + 4, th1_trials, opt.inject));
  rep.properties.push_back(check_gradient_equivalence<S>(opt.seed + 5, grad_trials));
  {
    bench::BenchResult b = bench::run_bench<S>(opt.seed + 6, opt.threads);
    rep.properties.push_back(check_memory_vs_depth(b));
    rep.properties.push_back(check_memory_vs_timestep(b));
    rep.properties.push_back(check_compute_overhead(b));
  }
  rep.properties.push_back(check_structure_counts());
  rep.properties.push_back(check_training_parity<S>(opt.seed + 7, opt.quick));
  rep.properties.push_back(check_config_roundtrip());

  rep.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace revsnn::verify
