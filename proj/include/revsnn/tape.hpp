#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "revsnn/context.hpp"
#include "revsnn/errors.hpp"
#include "revsnn/tensor.hpp"

namespace revsnn {

/// Ordered record of the values one block's backward pass needs: per-layer,
/// per-time-step tensors plus per-layer batch statistics. Entries are keyed
/// by (layer id, time step, name); layer ids increase in forward execution
/// order, so a tape rebuilt by the reverse pass enumerates identically to one
/// built by a cached forward. Stored bytes are charged to the ledger and
/// released on clear/destruction.
template <typename S>
class Tape {
public:
  struct Stats {
    Tensor<S> mean;
    Tensor<S> var;
  };

  Tape() = default;
  explicit Tape(MemoryLedger* ledger) : ledger_(ledger) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&& o) noexcept { *this = std::move(o); }
  Tape& operator=(Tape&& o) noexcept {
    if (this != &o) {
      clear();
      ledger_ = o.ledger_;
      entries_ = std::move(o.entries_);
      stats_ = std::move(o.stats_);
      o.entries_.clear();
      o.stats_.clear();
      o.ledger_ = nullptr;
    }
    return *this;
  }

  ~Tape() { clear(); }

  void bind_ledger(MemoryLedger* ledger) { ledger_ = ledger; }

  void put(int layer, int t, const std::string& name, Tensor<S> value, MemCategory cat) {
    Key k{layer, t, name};
    auto it = entries_.find(k);
    if (it != entries_.end())
      throw ContractError("tape: duplicate entry " + name + " for layer " +
                          std::to_string(layer) + " at t=" + std::to_string(t));
    if (ledger_) ledger_->track(cat, value.bytes(), MemEvent::alloc);
    entries_.emplace(std::move(k), Entry{std::move(value), cat});
  }

  bool has(int layer, int t, const std::string& name) const {
    return entries_.count(Key{layer, t, name}) > 0;
  }

  const Tensor<S>& get(int layer, int t, const std::string& name) const {
    auto it = entries_.find(Key{layer, t, name});
    if (it == entries_.end())
      throw ContractError("tape: missing entry " + name + " for layer " + std::to_string(layer) +
                          " at t=" + std::to_string(t) + " (tape/step mismatch)");
    return it->second.value;
  }

  void put_stats(int layer, Tensor<S> mean, Tensor<S> var) {
    u64 b = mean.bytes() + var.bytes();
    auto it = stats_.find(layer);
    if (it != stats_.end())
      throw ContractError("tape: duplicate statistics for layer " + std::to_string(layer));
    if (ledger_) ledger_->track(MemCategory::activations, b, MemEvent::alloc);
    stats_.emplace(layer, Stats{std::move(mean), std::move(var)});
  }

  bool has_stats(int layer) const { return stats_.count(layer) > 0; }

  const Stats& stats(int layer) const {
    auto it = stats_.find(layer);
    if (it == stats_.end())
      throw ContractError("tape: missing cached batch statistics for layer " +
                          std::to_string(layer));
    return it->second;
  }

  /// Test seam: mutable statistics access, used by fault-injection checks.
  Stats& mutable_stats(int layer) {
    auto it = stats_.find(layer);
    if (it == stats_.end())
      throw ContractError("tape: missing cached batch statistics for layer " +
                          std::to_string(layer));
    return it->second;
  }

  struct EntryView {
    int layer;
    int t;
    std::string name;
    const Tensor<S>* value;
    MemCategory category;
  };

  /// Entries in canonical (layer, t, name) order, i.e. forward execution
  /// order regardless of which pass built the tape.
  std::vector<EntryView> entries_sorted() const {
    std::vector<EntryView> out;
    out.reserve(entries_.size());
    for (const auto& [k, e] : entries_)
      out.push_back(EntryView{k.layer, k.t, k.name, &e.value, e.category});
    return out;
  }

  std::size_t entry_count() const { return entries_.size(); }

  u64 bytes() const {
    u64 b = 0;
    for (const auto& [k, e] : entries_) b += e.value.bytes();
    for (const auto& [l, s] : stats_) b += s.mean.bytes() + s.var.bytes();
    return b;
  }

  void clear() {
    if (ledger_) {
      for (const auto& [k, e] : entries_)
        ledger_->track(e.category, e.value.bytes(), MemEvent::free_);
      for (const auto& [l, s] : stats_)
        ledger_->track(MemCategory::activations, s.mean.bytes() + s.var.bytes(), MemEvent::free_);
    }
    entries_.clear();
    stats_.clear();
  }

private:
  struct Key {
    int layer;
    int t;
    std::string name;
    bool operator<(const Key& o) const {
      if (layer != o.layer) return layer < o.layer;
      if (t != o.t) return t < o.t;
      return name < o.name;
    }
  };
  struct Entry {
    Tensor<S> value;
    MemCategory category;
  };

  MemoryLedger* ledger_ = nullptr;
  std::map<Key, Entry> entries_;
  std::map<int, Stats> stats_;
};

}  // namespace revsnn
