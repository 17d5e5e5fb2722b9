#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "revsnn/errors.hpp"
#include "revsnn/tensor.hpp"

namespace revsnn {

enum class MemCategory { parameters = 0, activations = 1, neuron_state = 2, gradients = 3 };

inline const char* category_name(MemCategory c) {
  switch (c) {
    case MemCategory::parameters: return "parameters";
    case MemCategory::activations: return "activations";
    case MemCategory::neuron_state: return "neuron_state";
    default: return "gradients";
  }
}

enum class MemEvent { alloc, free_ };

/// Point-in-time view of the ledger, plus run metadata. Serializes to JSON.
struct MemoryReport {
  struct Entry {
    std::string category;
    u64 live = 0;
    u64 peak = 0;
  };
  std::array<Entry, 4> categories;
  int depth = 0;
  int timesteps = 0;
  int batch = 0;
  std::string mode;

  u64 live(MemCategory c) const { return categories[static_cast<std::size_t>(c)].live; }
  u64 peak(MemCategory c) const { return categories[static_cast<std::size_t>(c)].peak; }

  u64 total_live() const {
    u64 n = 0;
    for (const auto& e : categories) n += e.live;
    return n;
  }
  u64 total_peak() const {
    u64 n = 0;
    for (const auto& e : categories) n += e.peak;
    return n;
  }

  /// The per-image figure used throughout the reports: peak bytes of
  /// intermediate activations plus membrane potentials, divided by batch.
  double activation_state_peak_per_image() const {
    u64 p = peak(MemCategory::activations) + peak(MemCategory::neuron_state);
    return batch > 0 ? static_cast<double>(p) / batch : static_cast<double>(p);
  }

  nlohmann::json to_json() const {
    nlohmann::json cats = nlohmann::json::array();
    for (const auto& e : categories)
      cats.push_back({{"category", e.category}, {"live", e.live}, {"peak", e.peak}});
    return nlohmann::json{{"categories", cats},
                          {"total_live", total_live()},
                          {"total_peak", total_peak()},
                          {"per_image_activation_state_peak", activation_state_peak_per_image()},
                          {"depth", depth},
                          {"timesteps", timesteps},
                          {"batch", batch},
                          {"mode", mode}};
  }
};

/// Running account of live tensor bytes by category, with peak tracking.
/// Instruments the engine's explicit cache/free calls, not a system
/// allocator, so measurements are deterministic and platform independent.
/// Every free must match a previously allocated size in the same category;
/// a mismatch is ledger corruption and fails fast.
class MemoryLedger {
public:
  void set_run_meta(int depth, int timesteps, int batch, std::string mode) {
    std::lock_guard<std::mutex> lock(mu_);
    depth_ = depth;
    timesteps_ = timesteps;
    batch_ = batch;
    mode_ = std::move(mode);
  }

  void track(MemCategory cat, u64 size_bytes, MemEvent event) {
    std::lock_guard<std::mutex> lock(mu_);
    auto c = static_cast<std::size_t>(cat);
    if (event == MemEvent::alloc) {
      live_[c] += size_bytes;
      if (live_[c] > peak_[c]) peak_[c] = live_[c];
      if (size_bytes > 0) ++outstanding_[c][size_bytes];
    } else {
      if (size_bytes == 0) return;
      auto it = outstanding_[c].find(size_bytes);
      if (it == outstanding_[c].end() || it->second == 0 || live_[c] < size_bytes)
        throw LedgerError(std::string("free of ") + std::to_string(size_bytes) +
                          " bytes in category '" + category_name(cat) +
                          "' without a matching allocation");
      if (--it->second == 0) outstanding_[c].erase(it);
      live_[c] -= size_bytes;
    }
  }

  MemoryReport snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    MemoryReport r;
    for (std::size_t c = 0; c < 4; ++c) {
      r.categories[c].category = category_name(static_cast<MemCategory>(c));
      r.categories[c].live = live_[c];
      r.categories[c].peak = peak_[c];
    }
    r.depth = depth_;
    r.timesteps = timesteps_;
    r.batch = batch_;
    r.mode = mode_;
    return r;
  }

  u64 live(MemCategory c) const {
    std::lock_guard<std::mutex> lock(mu_);
    return live_[static_cast<std::size_t>(c)];
  }
  u64 peak(MemCategory c) const {
    std::lock_guard<std::mutex> lock(mu_);
    return peak_[static_cast<std::size_t>(c)];
  }

  /// Collapse peaks down to the current live values; used between training
  /// steps so each step's peak is measured independently.
  void reset_peaks() {
    std::lock_guard<std::mutex> lock(mu_);
    for (std::size_t c = 0; c < 4; ++c) peak_[c] = live_[c];
  }

  void reset() {
    std::lock_guard<std::mutex> lock(mu_);
    for (std::size_t c = 0; c < 4; ++c) {
      live_[c] = 0;
      peak_[c] = 0;
      outstanding_[c].clear();
    }
  }

private:
  mutable std::mutex mu_;
  std::array<u64, 4> live_{};
  std::array<u64, 4> peak_{};
  std::array<std::unordered_map<u64, u64>, 4> outstanding_;
  int depth_ = 0, timesteps_ = 0, batch_ = 0;
  std::string mode_ = "oracle";
};

}  // namespace revsnn
