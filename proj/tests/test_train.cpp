#include <catch2/catch_amalgamated.hpp>

#include "revsnn/train.hpp"

using namespace revsnn;

TEST_CASE("uniform logits cost ln K") {
  Seq<double> logits{Tensor<double>::zeros({2, 4}), Tensor<double>::zeros({2, 4})};
  auto r = cross_entropy_rate_loss(logits, {0, 3});
  CHECK(r.loss == Catch::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("a dominant aligned logit drives the loss to zero") {
  Tensor<double> l({1, 3});
  l[0] = 50.0;
  Seq<double> logits{l};
  auto r = cross_entropy_rate_loss(logits, {0});
  CHECK(r.loss < 1e-9);
}

TEST_CASE("loss gradient matches finite differences") {
  Rng rng(3);
  Seq<double> logits;
  for (int t = 0; t < 2; ++t) {
    Tensor<double> l({3, 4});
    rng.fill_normal(l, 0.0, 1.0);
    logits.push_back(l);
  }
  std::vector<int> labels{1, 0, 3};
  auto r = cross_entropy_rate_loss(logits, labels);
  double max_err = 0;
  for (int t = 0; t < 2; ++t)
    for (i64 i = 0; i < logits[0].numel(); ++i) {
      Seq<double> up = logits, dn = logits;
      up[t][i] += 1e-6;
      dn[t][i] -= 1e-6;
      const double fd = (cross_entropy_rate_loss(up, labels).loss -
                         cross_entropy_rate_loss(dn, labels).loss) /
                        2e-6;
      max_err = std::max(max_err, std::fabs(fd - r.dlogits[t][i]));
    }
  CHECK(max_err <= 1e-6);
}

TEST_CASE("label range is checked") {
  Seq<double> logits{Tensor<double>::zeros({1, 3})};
  CHECK_THROWS_AS(cross_entropy_rate_loss(logits, {3}), ContractError);
  CHECK_THROWS_AS(cross_entropy_rate_loss(logits, {-1}), ContractError);
}

TEST_CASE("sgd scalar updates") {
  Param<double> p("w", Tensor<double>::zeros({1}));
  p.grad[0] = 1.0;
  Optimizer<double> opt;
  opt.kind = OptKind::sgd;
  opt.lr = 0.1;
  opt.momentum = 0.0;
  opt.step({&p});
  CHECK(p.value[0] == Catch::Approx(-0.1).epsilon(1e-12));

  // zero grad leaves the weight alone
  Param<double> q("w", Tensor<double>::full({1}, 0.5));
  Optimizer<double> opt2;
  opt2.kind = OptKind::sgd;
  opt2.lr = 0.1;
  opt2.momentum = 0.0;
  opt2.step({&q});
  CHECK(q.value[0] == 0.5);
}

TEST_CASE("adamw descends a scalar quadratic") {
  // loss = 0.5 * w^2, gradient = w
  Param<double> p("w", Tensor<double>::full({1}, 2.0));
  Optimizer<double> opt;
  opt.kind = OptKind::adamw;
  opt.lr = 0.1;
  double prev_loss = 0.5 * p.value[0] * p.value[0];
  for (int i = 0; i < 2; ++i) {
    p.grad[0] = p.value[0];
    opt.step({&p});
  }
  const double loss = 0.5 * p.value[0] * p.value[0];
  CHECK(loss < prev_loss);
}

TEST_CASE("toy task trains to high accuracy") {
  ResNetConfig<double> rc;
  rc.blocks_per_stage = {1};
  rc.stream_channels = {8};
  rc.stem_channels = 16;
  rc.in_channels = 1;
  rc.num_classes = 2;
  rc.T = 2;
  auto net = build_revsresnet<double>(rc, 9);
  Dataset<double> data = make_synthetic<double>(SynthTask::two_gaussians, 64, 2, {1, 8, 8}, 9);

  TrainState<double> st;
  st.net = net.get();
  st.mode = EngineMode::reversible;
  st.seed = 9;
  st.opt.lr = 0.1;
  st.opt.momentum = 0.9;
  net->register_memory(st.ctx);
  EpochMetrics<double> last;
  for (int e = 0; e < 20; ++e) {
    last = train_epoch(st, data, 8);
    if (last.accuracy >= 0.95) break;
  }
  CHECK(last.accuracy >= 0.95);
  CHECK(last.op_count > 0);
  CHECK(last.mem.peak(MemCategory::activations) > 0);
}

TEST_CASE("same seed, different engines: identical losses within 1e-6") {
  ResNetConfig<double> rc;
  rc.blocks_per_stage = {1};
  rc.stream_channels = {4};
  rc.stem_channels = 8;
  rc.in_channels = 1;
  rc.num_classes = 2;
  rc.T = 2;
  Dataset<double> data = make_synthetic<double>(SynthTask::two_gaussians, 32, 2, {1, 8, 8}, 5);

  auto losses = [&](EngineMode mode) {
    auto net = build_revsresnet<double>(rc, 5);
    TrainState<double> st;
    st.net = net.get();
    st.mode = mode;
    st.seed = 5;
    st.opt.lr = 0.05;
    st.opt.momentum = 0.9;
    std::vector<double> out;
    for (int e = 0; e < 3; ++e) out.push_back(train_epoch(st, data, 8).loss);
    return out;
  };
  auto lo = losses(EngineMode::oracle);
  auto lr = losses(EngineMode::reversible);
  for (std::size_t i = 0; i < lo.size(); ++i)
    CHECK(std::fabs(lo[i] - lr[i]) <= 1e-6);
}

TEST_CASE("batch larger than the dataset is a single truncated batch") {
  ResNetConfig<double> rc;
  rc.blocks_per_stage = {1};
  rc.stream_channels = {4};
  rc.stem_channels = 8;
  rc.in_channels = 1;
  rc.num_classes = 2;
  rc.T = 1;
  auto net = build_revsresnet<double>(rc, 2);
  Dataset<double> data = make_synthetic<double>(SynthTask::two_gaussians, 6, 2, {1, 8, 8}, 2);
  TrainState<double> st;
  st.net = net.get();
  st.mode = EngineMode::oracle;
  st.seed = 2;
  CHECK_NOTHROW(train_epoch(st, data, 100));

  Dataset<double> empty;
  CHECK_THROWS_AS(train_epoch(st, empty, 4), ContractError);
}

TEST_CASE("temporal poisson dataset feeds per-step slices") {
  Dataset<double> data = make_synthetic<double>(SynthTask::poisson_rate, 8, 2, {1, 4, 4}, 3, 3);
  REQUIRE(data.temporal);
  auto [xs, labels] = make_batch_sequence(data, {0, 1, 2}, 3);
  REQUIRE(xs.size() == 3);
  CHECK(xs[0].shape() == std::vector<i64>{3, 1, 4, 4});
  for (const auto& x : xs)
    for (i64 i = 0; i < x.numel(); ++i) CHECK((x[i] == 0.0 || x[i] == 1.0));
  CHECK(labels.size() == 3);
}
