#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "revsnn/context.hpp"
#include "revsnn/tape.hpp"
#include "revsnn/tensor.hpp"

namespace revsnn {

/// Learnable tensor with its gradient accumulator.
template <typename S>
struct Param {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  Param() = default;
  Param(std::string n, Tensor<S> v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor<S>::zeros(value.shape());
  }
};

inline int next_module_id() {
  static std::atomic<int> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

/// A multi-step layer. forward consumes the per-step input sequence and,
/// depending on the mode, records what its backward needs onto `tape`
/// (replay mode additionally reads batch statistics from `replay`).
/// backward consumes the gradient sequence in the same T layout, accumulates
/// parameter gradients and returns input gradients.
template <typename S>
class Module {
public:
  Module() : id_(next_module_id()) {}
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  int id() const { return id_; }
  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

  virtual Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>* replay,
                         RunContext& ctx) = 0;
  virtual Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) = 0;

  /// Reset internal neuron state (membrane potentials back to the initial
  /// state). Default: stateless.
  virtual void reset_state(RunContext& ctx) { (void)ctx; }
  virtual bool state_is_reset() const { return true; }

  virtual void collect_params(std::vector<Param<S>*>& out) { (void)out; }
  virtual void collect_modules(std::vector<Module<S>*>& out) { out.push_back(this); }

  virtual std::string kind() const = 0;

private:
  int id_;
  std::string name_;
};

/// Ordered chain of modules sharing one tape.
template <typename S>
class Sequential : public Module<S> {
public:
  Sequential() = default;

  Module<S>* add(std::unique_ptr<Module<S>> m) {
    items_.push_back(std::move(m));
    return items_.back().get();
  }

  std::size_t size() const { return items_.size(); }
  Module<S>& at(std::size_t i) { return *items_[i]; }

  Seq<S> forward(const Seq<S>& xs, RunMode mode, Tape<S>* tape, const Tape<S>* replay,
                 RunContext& ctx) override {
    Seq<S> cur = xs;
    for (auto& m : items_) cur = m->forward(cur, mode, tape, replay, ctx);
    return cur;
  }

  Seq<S> backward(const Seq<S>& dys, const Tape<S>& tape, RunContext& ctx) override {
    Seq<S> cur = dys;
    for (auto it = items_.rbegin(); it != items_.rend(); ++it)
      cur = (*it)->backward(cur, tape, ctx);
    return cur;
  }

  void reset_state(RunContext& ctx) override {
    for (auto& m : items_) m->reset_state(ctx);
  }

  bool state_is_reset() const override {
    for (const auto& m : items_)
      if (!m->state_is_reset()) return false;
    return true;
  }

  void collect_params(std::vector<Param<S>*>& out) override {
    for (auto& m : items_) m->collect_params(out);
  }

  void collect_modules(std::vector<Module<S>*>& out) override {
    out.push_back(this);
    for (auto& m : items_) m->collect_modules(out);
  }

  std::string kind() const override { return "sequential"; }

private:
  std::vector<std::unique_ptr<Module<S>>> items_;
};

}  // namespace revsnn
