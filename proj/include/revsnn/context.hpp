#pragma once

#include <limits>

#include "revsnn/memtrack.hpp"
#include "revsnn/opcount.hpp"

namespace revsnn {

/// How a layer's multi-step forward should behave.
///   train_cached      batch statistics from the batch, all intermediates taped
///   train_stats_only  batch statistics from the batch, only statistics taped
///   replay_cached     batch statistics replayed from a prior tape, all taped
///   eval              running statistics, nothing taped
enum class RunMode { train_cached, train_stats_only, replay_cached, eval };

inline bool mode_caches_tensors(RunMode m) {
  return m == RunMode::train_cached || m == RunMode::replay_cached;
}
inline bool mode_uses_batch_stats(RunMode m) {
  return m == RunMode::train_cached || m == RunMode::train_stats_only;
}

/// Per-run instrumentation shared by every kernel and layer of one training
/// run: the memory ledger, the operation counter and the knife-edge monitor
/// (smallest |H - V_th| margin seen, used by tests to exclude spike
/// decisions too close to the threshold for bit-exact replay).
struct RunContext {
  MemoryLedger ledger;
  OpCounter ops;
  double knife_edge_margin = std::numeric_limits<double>::infinity();

  void note_knife_edge(double margin) {
    if (margin < knife_edge_margin) knife_edge_margin = margin;
  }
  void reset_knife_edge() { knife_edge_margin = std::numeric_limits<double>::infinity(); }
};

}  // namespace revsnn
