#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "revsnn/data.hpp"
#include "revsnn/models.hpp"

namespace revsnn {

// ---------------------------------------------------------------------------
// loss

template <typename S>
struct LossResult {
  double loss = 0;
  Seq<S> dlogits;
};

/// Rate-decoded cross entropy: average the logit sequence over T, softmax,
/// mean negative log-likelihood over the batch. Returns the loss and its
/// gradient with respect to every per-step logit tensor.
template <typename S>
LossResult<S> cross_entropy_rate_loss(const Seq<S>& logits, const std::vector<int>& labels) {
  if (logits.empty()) throw ContractError("loss: empty logit sequence");
  const i64 B = logits[0].dim(0);
  const i64 K = logits[0].dim(1);
  if (static_cast<i64>(labels.size()) != B)
    throw ShapeError("loss", 0, B, static_cast<i64>(labels.size()));
  for (int y : labels)
    if (y < 0 || y >= K)
      throw ContractError("loss: label " + std::to_string(y) + " out of range [0," +
                          std::to_string(K) + ")");
  const int T = static_cast<int>(logits.size());

  Tensor<S> mean({B, K});
  for (int t = 0; t < T; ++t)
    for (i64 i = 0; i < mean.numel(); ++i) mean[i] += logits[static_cast<std::size_t>(t)][i];
  for (i64 i = 0; i < mean.numel(); ++i) mean[i] /= static_cast<S>(T);

  LossResult<S> r;
  Tensor<S> dmean({B, K});
  double loss = 0;
  for (i64 b = 0; b < B; ++b) {
    S mx = mean[b * K];
    for (i64 k = 1; k < K; ++k) mx = std::max(mx, mean[b * K + k]);
    double z = 0;
    for (i64 k = 0; k < K; ++k) z += std::exp(static_cast<double>(mean[b * K + k] - mx));
    const double logz = std::log(z) + static_cast<double>(mx);
    loss += logz - static_cast<double>(mean[b * K + labels[static_cast<std::size_t>(b)]]);
    for (i64 k = 0; k < K; ++k) {
      const double p = std::exp(static_cast<double>(mean[b * K + k]) - logz);
      dmean[b * K + k] = static_cast<S>((p - (k == labels[static_cast<std::size_t>(b)] ? 1.0 : 0.0)) /
                                        static_cast<double>(B));
    }
  }
  r.loss = loss / static_cast<double>(B);
  r.dlogits.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    Tensor<S> d({B, K});
    for (i64 i = 0; i < d.numel(); ++i) d[i] = dmean[i] / static_cast<S>(T);
    r.dlogits.push_back(std::move(d));
  }
  return r;
}

// ---------------------------------------------------------------------------
// optimizers

enum class OptKind { sgd, adamw };

template <typename S>
class Optimizer {
public:
  OptKind kind = OptKind::sgd;
  double lr = 0.1;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  double eps = 1e-8;

  void step(const std::vector<Param<S>*>& params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Tensor<S>::zeros(p->value.shape()));
        if (kind == OptKind::adamw) v_.push_back(Tensor<S>::zeros(p->value.shape()));
      }
    }
    ++step_;
    if (kind == OptKind::sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        Param<S>& p = *params[i];
        for (i64 j = 0; j < p.value.numel(); ++j) {
          const S g = p.grad[j] + static_cast<S>(weight_decay) * p.value[j];
          m_[i][j] = static_cast<S>(momentum) * m_[i][j] + g;
          p.value[j] -= static_cast<S>(lr) * m_[i][j];
        }
      }
    } else {
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
      for (std::size_t i = 0; i < params.size(); ++i) {
        Param<S>& p = *params[i];
        for (i64 j = 0; j < p.value.numel(); ++j) {
          const double g = static_cast<double>(p.grad[j]);
          m_[i][j] = static_cast<S>(beta1 * m_[i][j] + (1.0 - beta1) * g);
          v_[i][j] = static_cast<S>(beta2 * v_[i][j] + (1.0 - beta2) * g * g);
          const double mhat = static_cast<double>(m_[i][j]) / bc1;
          const double vhat = static_cast<double>(v_[i][j]) / bc2;
          p.value[j] -= static_cast<S>(lr * (mhat / (std::sqrt(vhat) + eps) +
                                             weight_decay * static_cast<double>(p.value[j])));
        }
      }
    }
  }

  i64 step_count() const { return step_; }

private:
  std::vector<Tensor<S>> m_, v_;
  i64 step_ = 0;
};

// ---------------------------------------------------------------------------
// epoch loop

template <typename S>
struct EpochMetrics {
  double loss = 0;
  double accuracy = 0;
  u64 op_count = 0;
  double wall_ms = 0;
  MemoryReport mem;
};

template <typename S>
struct TrainState {
  Network<S>* net = nullptr;
  Optimizer<S> opt;
  EngineMode mode = EngineMode::reversible;
  u64 seed = 42;
  i64 epoch = 0;
  i64 step = 0;
  RunContext ctx;
};

template <typename S>
i64 argmax_row(const Tensor<S>& t, i64 row) {
  const i64 K = t.dim(1);
  i64 best = 0;
  for (i64 k = 1; k < K; ++k)
    if (t[row * K + k] > t[row * K + best]) best = k;
  return best;
}

template <typename S>
double batch_accuracy(const Seq<S>& logits, const std::vector<int>& labels) {
  const i64 B = logits[0].dim(0);
  const i64 K = logits[0].dim(1);
  Tensor<S> mean({B, K});
  for (const auto& l : logits)
    for (i64 i = 0; i < mean.numel(); ++i) mean[i] += l[i];
  i64 hit = 0;
  for (i64 b = 0; b < B; ++b)
    if (argmax_row(mean, b) == labels[static_cast<std::size_t>(b)]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(B);
}

/// One pass over the dataset: per batch encode, forward, loss, engine
/// backward, optimizer step. Batches are drawn in a seeded shuffle; the
/// op counter resets at batch boundaries and the epoch aggregates it.
template <typename S>
EpochMetrics<S> train_epoch(TrainState<S>& st, const Dataset<S>& data, i64 batch_size) {
  if (data.samples.empty()) throw ContractError("train: empty dataset");
  if (batch_size < 1) throw ContractError("train: batch size must be positive");
  Network<S>& net = *st.net;
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<i64> order(data.samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(st.seed * 1000003u + static_cast<u64>(st.epoch));
  shuffle_rng.shuffle(order);

  EpochMetrics<S> m;
  st.ctx.ledger.reset_peaks();
  double loss_sum = 0, acc_sum = 0;
  i64 batches = 0;
  for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min(static_cast<std::size_t>(batch_size), order.size() - off);
    std::vector<i64> idx(order.begin() + static_cast<std::ptrdiff_t>(off),
                         order.begin() + static_cast<std::ptrdiff_t>(off + n));
    auto [xs, labels] = make_batch_sequence(data, idx, net.time_steps);

    st.ctx.ops.reset();
    net.zero_grads();
    Seq<S> logits = net.forward_train(xs, st.mode, st.ctx);
    auto lr = cross_entropy_rate_loss(logits, labels);
    net.backward(lr.dlogits, st.ctx);
    st.opt.step(net.params());
    ++st.step;

    loss_sum += lr.loss;
    acc_sum += batch_accuracy(logits, labels);
    m.op_count += st.ctx.ops.total();
    ++batches;
  }
  ++st.epoch;
  m.loss = loss_sum / static_cast<double>(batches);
  m.accuracy = acc_sum / static_cast<double>(batches);
  m.mem = st.ctx.ledger.snapshot();
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

/// Accuracy of the rate-decoded prediction over a dataset, eval-mode BN.
template <typename S>
double evaluate(Network<S>& net, const Dataset<S>& data, i64 batch_size, RunContext& ctx) {
  if (data.samples.empty()) throw ContractError("evaluate: empty dataset");
  std::vector<i64> order(data.samples.size());
  std::iota(order.begin(), order.end(), 0);
  double hit = 0;
  for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min(static_cast<std::size_t>(batch_size), order.size() - off);
    std::vector<i64> idx(order.begin() + static_cast<std::ptrdiff_t>(off),
                         order.begin() + static_cast<std::ptrdiff_t>(off + n));
    auto [xs, labels] = make_batch_sequence(data, idx, net.time_steps);
    Seq<S> logits = net.forward_eval(xs, ctx);
    hit += batch_accuracy(logits, labels) * static_cast<double>(n);
  }
  return hit / static_cast<double>(data.samples.size());
}

}  // namespace revsnn
