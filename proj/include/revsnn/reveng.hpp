#pragma once

#include <memory>
#include <tuple>
#include <utility>
#include <vector>

#include "revsnn/kernels.hpp"
#include "revsnn/module.hpp"
#include "revsnn/tape.hpp"

// The reversible engine. A coupling block computes, per time step,
//   Y1[t] = X1[t] + F(X2)[t]
//   Y2[t] = X2[t] + G(Y1)[t]
// with F and G stateful multi-step spiking submodules. The inverse is
//   X2[t] = Y2[t] - G(Y1)[t]
//   X1[t] = Y1[t] - F(X2)[t]
// valid because after the reset process F and G replay bit-identically from
// zero-initialized membrane potentials. A single batch therefore runs
// forward (storing only outputs and batch statistics), reset, reverse
// (rebuilding every intermediate onto a tape), backward (consuming the
// tape). The cached oracle engine runs the standard forward-backward with
// full caching and serves as ground truth for gradients and as the
// depth-linear memory baseline.

namespace revsnn {

enum class EngineMode { oracle, reversible };

inline const char* engine_mode_name(EngineMode m) {
  return m == EngineMode::oracle ? "oracle" : "reversible";
}

template <typename S>
class CouplingBlock {
public:
  CouplingBlock(std::unique_ptr<Module<S>> f, std::unique_ptr<Module<S>> g)
      : f_(std::move(f)), g_(std::move(g)) {}

  Module<S>& f() { return *f_; }
  Module<S>& g() { return *g_; }

  /// Forward over the whole sequence. train_cached records everything the
  /// backward needs (oracle engine); train_stats_only records only batch
  /// statistics (reversible engine). Requires freshly reset neuron states.
  std::pair<Seq<S>, Seq<S>> forward(const Seq<S>& x1, const Seq<S>& x2, RunMode mode,
                                    Tape<S>& tape, RunContext& ctx) {
    if (!state_is_reset())
      throw ContractError("coupling: forward requires freshly reset neuron states");
    if (x1.size() != x2.size())
      throw ContractError("coupling: stream sequences differ in length");
    for (std::size_t t = 0; t < x1.size(); ++t) check_same_shape("coupling", x1[t], x2[t]);

    Seq<S> f_out = f_->forward(x2, mode, &tape, nullptr, ctx);
    Seq<S> y1(x1.size());
    for (std::size_t t = 0; t < x1.size(); ++t) y1[t] = kernels::add(x1[t], f_out[t], &ctx.ops);
    Seq<S> g_out = g_->forward(y1, mode, &tape, nullptr, ctx);
    Seq<S> y2(x2.size());
    for (std::size_t t = 0; t < x2.size(); ++t) y2[t] = kernels::add(x2[t], g_out[t], &ctx.ops);
    return {std::move(y1), std::move(y2)};
  }

  /// Reverse pass: reconstruct the inputs from the outputs while rebuilding
  /// the full tape. Batch statistics recorded by the forward are replayed
  /// from `stats_tape`. Preconditions: the reset process has run
  /// (`enforce_reset` exists only so negative controls can observe what
  /// happens when it has not).
  std::pair<Seq<S>, Seq<S>> reverse(const Seq<S>& y1, const Seq<S>& y2, const Tape<S>& stats_tape,
                                    Tape<S>& build, RunContext& ctx, bool enforce_reset = true) {
    if (enforce_reset && !state_is_reset())
      throw ContractError("coupling: reverse requires the reset process to have run");
    Seq<S> g_out = g_->forward(y1, RunMode::replay_cached, &build, &stats_tape, ctx);
    Seq<S> x2(y2.size());
    for (std::size_t t = 0; t < y2.size(); ++t) x2[t] = kernels::sub(y2[t], g_out[t], &ctx.ops);
    Seq<S> f_out = f_->forward(x2, RunMode::replay_cached, &build, &stats_tape, ctx);
    Seq<S> x1(y1.size());
    for (std::size_t t = 0; t < y1.size(); ++t) x1[t] = kernels::sub(y1[t], f_out[t], &ctx.ops);
    return {std::move(x1), std::move(x2)};
  }

  /// BPTT over the block given output gradients and a tape built either by
  /// the cached forward or by the reverse pass. dY1 has two consumers (the
  /// X1 residual and G's input); their contributions are summed in a fixed
  /// order. Parameter gradients accumulate into the owned modules.
  std::pair<Seq<S>, Seq<S>> backward(const Seq<S>& dy1, const Seq<S>& dy2, const Tape<S>& tape,
                                     RunContext& ctx) {
    Seq<S> dy1_from_g = g_->backward(dy2, tape, ctx);
    Seq<S> dy1_total(dy1.size());
    for (std::size_t t = 0; t < dy1.size(); ++t)
      dy1_total[t] = kernels::add(dy1[t], dy1_from_g[t], &ctx.ops);
    Seq<S> dx2_from_f = f_->backward(dy1_total, tape, ctx);
    Seq<S> dx2(dy2.size());
    for (std::size_t t = 0; t < dy2.size(); ++t)
      dx2[t] = kernels::add(dy2[t], dx2_from_f[t], &ctx.ops);
    return {std::move(dy1_total), std::move(dx2)};
  }

  /// The reset process: every spiking neuron in F and G back to the initial
  /// state (membrane potentials released). Idempotent.
  void reset_state(RunContext& ctx) {
    f_->reset_state(ctx);
    g_->reset_state(ctx);
  }

  bool state_is_reset() const { return f_->state_is_reset() && g_->state_is_reset(); }

  void collect_params(std::vector<Param<S>*>& out) {
    f_->collect_params(out);
    g_->collect_params(out);
  }
  void collect_modules(std::vector<Module<S>*>& out) {
    f_->collect_modules(out);
    g_->collect_modules(out);
  }

private:
  std::unique_ptr<Module<S>> f_, g_;
};

// Free-function surface mirroring the single-block schedule.

template <typename S>
void reset_all(CouplingBlock<S>& block, RunContext& ctx) {
  block.reset_state(ctx);
}

template <typename S>
std::pair<Seq<S>, Seq<S>> rev_forward(CouplingBlock<S>& block, const Seq<S>& x1, const Seq<S>& x2,
                                      Tape<S>& stats_tape, RunContext& ctx) {
  ctx.ops.set_phase(Phase::forward);
  return block.forward(x1, x2, RunMode::train_stats_only, stats_tape, ctx);
}

template <typename S>
std::pair<Seq<S>, Seq<S>> rev_reverse(CouplingBlock<S>& block, const Seq<S>& y1, const Seq<S>& y2,
                                      const Tape<S>& stats_tape, Tape<S>& build, RunContext& ctx,
                                      bool enforce_reset = true) {
  ctx.ops.set_phase(Phase::reverse);
  return block.reverse(y1, y2, stats_tape, build, ctx, enforce_reset);
}

template <typename S>
std::pair<Seq<S>, Seq<S>> rev_backward(CouplingBlock<S>& block, const Tape<S>& tape,
                                       const Seq<S>& dy1, const Seq<S>& dy2, RunContext& ctx) {
  ctx.ops.set_phase(Phase::backward);
  return block.backward(dy1, dy2, tape, ctx);
}

/// Chain of coupling blocks between irreversible boundaries. In reversible
/// mode only the sequence output is cached; during backward, at most one
/// block's tape is live at any instant.
template <typename S>
class ReversibleSequence {
public:
  ReversibleSequence() = default;

  CouplingBlock<S>* add(std::unique_ptr<CouplingBlock<S>> block) {
    blocks_.push_back(std::move(block));
    return blocks_.back().get();
  }

  std::size_t size() const { return blocks_.size(); }
  CouplingBlock<S>& block(std::size_t i) { return *blocks_[i]; }

  std::pair<Seq<S>, Seq<S>> forward(const Seq<S>& x1_in, const Seq<S>& x2_in, EngineMode mode,
                                    RunContext& ctx) {
    release_caches(ctx);
    ctx.ops.set_phase(Phase::forward);
    Seq<S> x1 = x1_in, x2 = x2_in;
    if (mode == EngineMode::oracle) {
      full_tapes_.clear();
      for (auto& b : blocks_) {
        Tape<S> tape(&ctx.ledger);
        std::tie(x1, x2) = b->forward(x1, x2, RunMode::train_cached, tape, ctx);
        full_tapes_.push_back(std::move(tape));
      }
    } else {
      stats_tapes_.clear();
      for (auto& b : blocks_) {
        Tape<S> tape(&ctx.ledger);
        std::tie(x1, x2) = b->forward(x1, x2, RunMode::train_stats_only, tape, ctx);
        stats_tapes_.push_back(std::move(tape));
      }
      // The reset process: drop all membrane potentials now that the
      // forward is done; the reverse pass rebuilds them per block.
      for (auto& b : blocks_) b->reset_state(ctx);
      // Only the output of the last block is stored.
      y1_cache_ = x1;
      y2_cache_ = x2;
      cached_bytes_ = seq_bytes(y1_cache_) + seq_bytes(y2_cache_);
      ctx.ledger.track(MemCategory::activations, cached_bytes_, MemEvent::alloc);
      have_output_ = true;
    }
    mode_ = mode;
    return {std::move(x1), std::move(x2)};
  }

  /// Backward through the whole sequence. Reversible mode walks blocks last
  /// to first: reset, reverse (which also yields the previous block's
  /// output), backward, drop the tape.
  std::pair<Seq<S>, Seq<S>> backward(const Seq<S>& dy1_in, const Seq<S>& dy2_in,
                                     RunContext& ctx) {
    Seq<S> dy1 = dy1_in, dy2 = dy2_in;
    if (mode_ == EngineMode::oracle) {
      ctx.ops.set_phase(Phase::backward);
      for (std::size_t i = blocks_.size(); i-- > 0;) {
        std::tie(dy1, dy2) = blocks_[i]->backward(dy1, dy2, full_tapes_[i], ctx);
        full_tapes_[i].clear();
      }
      full_tapes_.clear();
      return {std::move(dy1), std::move(dy2)};
    }
    if (!have_output_)
      throw ContractError("reversible sequence: backward before forward (no cached output)");
    Seq<S> y1 = std::move(y1_cache_);
    Seq<S> y2 = std::move(y2_cache_);
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      blocks_[i]->reset_state(ctx);
      Tape<S> tape(&ctx.ledger);
      ctx.ops.set_phase(Phase::reverse);
      auto [x1, x2] = blocks_[i]->reverse(y1, y2, stats_tapes_[i], tape, ctx);
      ctx.ops.set_phase(Phase::backward);
      std::tie(dy1, dy2) = blocks_[i]->backward(dy1, dy2, tape, ctx);
      blocks_[i]->reset_state(ctx);
      stats_tapes_[i].clear();
      y1 = std::move(x1);
      y2 = std::move(x2);
    }
    stats_tapes_.clear();
    ctx.ledger.track(MemCategory::activations, cached_bytes_, MemEvent::free_);
    cached_bytes_ = 0;
    have_output_ = false;
    return {std::move(dy1), std::move(dy2)};
  }

  void reset_state(RunContext& ctx) {
    for (auto& b : blocks_) b->reset_state(ctx);
  }

  bool state_is_reset() const {
    for (const auto& b : blocks_)
      if (!b->state_is_reset()) return false;
    return true;
  }

  void release_caches(RunContext& ctx) {
    full_tapes_.clear();
    stats_tapes_.clear();
    if (have_output_) {
      ctx.ledger.track(MemCategory::activations, cached_bytes_, MemEvent::free_);
      cached_bytes_ = 0;
      y1_cache_.clear();
      y2_cache_.clear();
      have_output_ = false;
    }
  }

  void collect_params(std::vector<Param<S>*>& out) {
    for (auto& b : blocks_) b->collect_params(out);
  }
  void collect_modules(std::vector<Module<S>*>& out) {
    for (auto& b : blocks_) b->collect_modules(out);
  }

  /// Test seam: per-block statistics tapes recorded by a reversible forward.
  Tape<S>& stats_tape(std::size_t i) { return stats_tapes_[i]; }

private:
  std::vector<std::unique_ptr<CouplingBlock<S>>> blocks_;
  std::vector<Tape<S>> full_tapes_;   // oracle mode
  std::vector<Tape<S>> stats_tapes_;  // reversible mode
  Seq<S> y1_cache_, y2_cache_;
  u64 cached_bytes_ = 0;
  bool have_output_ = false;
  EngineMode mode_ = EngineMode::oracle;
};

template <typename S>
struct EngineStepResult {
  Seq<S> y1, y2;    // sequence outputs
  Seq<S> dx1, dx2;  // input gradients
};

/// Ground-truth engine: forward with full caching, backward from the cached
/// tapes. O(D*T) live tape bytes by construction.
template <typename S>
EngineStepResult<S> oracle_step(ReversibleSequence<S>& seq, const Seq<S>& x1, const Seq<S>& x2,
                                const Seq<S>& dy1, const Seq<S>& dy2, RunContext& ctx) {
  EngineStepResult<S> r;
  std::tie(r.y1, r.y2) = seq.forward(x1, x2, EngineMode::oracle, ctx);
  std::tie(r.dx1, r.dx2) = seq.backward(dy1, dy2, ctx);
  seq.reset_state(ctx);
  return r;
}

/// Reversible engine: forward-reset-reverse-backward. Peak live tape count
/// during backward is one block.
template <typename S>
EngineStepResult<S> sequence_train_step(ReversibleSequence<S>& seq, const Seq<S>& x1,
                                        const Seq<S>& x2, const Seq<S>& dy1, const Seq<S>& dy2,
                                        RunContext& ctx) {
  EngineStepResult<S> r;
  std::tie(r.y1, r.y2) = seq.forward(x1, x2, EngineMode::reversible, ctx);
  std::tie(r.dx1, r.dx2) = seq.backward(dy1, dy2, ctx);
  return r;
}

}  // namespace revsnn
