#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <string>

#include "revsnn/tensor.hpp"

namespace revsnn {

/// Phase of the single-batch schedule an operation is charged to.
enum class Phase { forward = 0, reverse = 1, backward = 2 };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::forward: return "forward";
    case Phase::reverse: return "reverse";
    default: return "backward";
  }
}

/// Kernel family, so reports can separate convolution/attention arithmetic
/// (the FLOP-style totals) from bookkeeping kernels.
enum class OpKind {
  conv = 0,
  linear,
  matmul,
  norm,
  neuron,
  pool,
  elementwise,
};

/// Scalar multiply-accumulate counter, tagged by phase and kernel family.
/// Counts only grow within a phase; reset happens at batch boundaries.
/// Increments are lock-free so concurrent kernels may share one counter.
class OpCounter {
public:
  static constexpr int kPhases = 3;
  static constexpr int kKinds = 7;

  OpCounter() { reset(); }

  void set_phase(Phase p) { phase_.store(static_cast<int>(p), std::memory_order_relaxed); }
  Phase phase() const { return static_cast<Phase>(phase_.load(std::memory_order_relaxed)); }

  void add(OpKind kind, u64 n) {
    counts_[static_cast<std::size_t>(phase_.load(std::memory_order_relaxed))]
           [static_cast<std::size_t>(kind)]
               .fetch_add(n, std::memory_order_relaxed);
  }

  u64 total(Phase p, OpKind k) const {
    return counts_[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)].load(
        std::memory_order_relaxed);
  }

  u64 total(Phase p) const {
    u64 n = 0;
    for (int k = 0; k < kKinds; ++k) n += total(p, static_cast<OpKind>(k));
    return n;
  }

  u64 total() const {
    return total(Phase::forward) + total(Phase::reverse) + total(Phase::backward);
  }

  /// Convolution/linear/attention multiply-adds of one phase; the quantity
  /// reported as "FLOPs" in model summaries.
  u64 dense_mult_adds(Phase p) const {
    return total(p, OpKind::conv) + total(p, OpKind::linear) + total(p, OpKind::matmul);
  }

  void reset() {
    for (auto& row : counts_)
      for (auto& c : row) c.store(0, std::memory_order_relaxed);
    phase_.store(static_cast<int>(Phase::forward), std::memory_order_relaxed);
  }

private:
  std::array<std::array<std::atomic<u64>, kKinds>, kPhases> counts_;
  std::atomic<int> phase_{0};
};

}  // namespace revsnn
