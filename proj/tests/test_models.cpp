#include <catch2/catch_amalgamated.hpp>

#include "revsnn/models.hpp"

using namespace revsnn;

TEST_CASE("layer-count formula for the four-stage family") {
  auto n21 = build_revsresnet<float>(ResNetConfig<float>::revsresnet21(), 1);
  CHECK(n21->layer_count() == 21);  // 5 + 4*4
  auto n37 = build_revsresnet<float>(ResNetConfig<float>::revsresnet37(), 1);
  CHECK(n37->layer_count() == 37);  // 5 + 4*8
  auto n24 = build_revsresnet<float>(ResNetConfig<float>::revsresnet24(), 1);
  CHECK(n24->layer_count() == 24);  // 4 + 4*5 for the three-stage family
}

TEST_CASE("full-size parameter counts sit on the published values") {
  auto pct = [](double got, double want) { return std::fabs(got - want) / want; };
  auto n21 = build_revsresnet<float>(ResNetConfig<float>::revsresnet21(), 1);
  CHECK(pct(static_cast<double>(n21->param_count()), 11.05e6) <= 0.05);
  auto n37 = build_revsresnet<float>(ResNetConfig<float>::revsresnet37(), 1);
  CHECK(pct(static_cast<double>(n37->param_count()), 23.59e6) <= 0.05);
  auto ms18 = build_vanilla_counterpart<float>(ResNetConfig<float>::ms_resnet18(), 1);
  CHECK(pct(static_cast<double>(ms18->param_count()), 11.22e6) <= 0.05);
  auto f2 = build_revsformer<float>(FormerConfig<float>::revsformer(2, 384), 1);
  CHECK(pct(static_cast<double>(f2->param_count()), 5.76e6) <= 0.05);
  auto f4 = build_revsformer<float>(FormerConfig<float>::revsformer(4, 384), 1);
  CHECK(pct(static_cast<double>(f4->param_count()), 9.32e6) <= 0.05);
  // the vanilla transformer twin has identical parameters by construction
  auto v4 = build_vanilla_counterpart<float>(FormerConfig<float>::revsformer(4, 384), 1);
  CHECK(v4->param_count() == f4->param_count());
}

TEST_CASE("desk-scale networks produce [B, classes] logits over T") {
  RunContext ctx;
  ResNetConfig<double> rc;
  rc.blocks_per_stage = {1, 1};
  rc.stream_channels = {4, 8};
  rc.stem_channels = 8;
  rc.in_channels = 1;
  rc.num_classes = 3;
  rc.T = 2;
  auto net = build_revsresnet<double>(rc, 7);
  Rng rng(3);
  Tensor<double> img({2, 1, 8, 8});
  rng.fill_normal(img, 0.0, 1.0);
  Seq<double> logits = net->forward_train(encode_constant(img, 2), EngineMode::reversible, ctx);
  REQUIRE(logits.size() == 2);
  CHECK(logits[0].shape() == std::vector<i64>{2, 3});
  net->backward(logits, ctx);  // consumes caches; grads populated
  net->release_step(ctx);

  FormerConfig<double> fc = FormerConfig<double>::desk(2, 16, 4);
  fc.in_channels = 1;
  fc.num_classes = 3;
  fc.T = 2;
  auto former = build_revsformer<double>(fc, 7);
  Seq<double> l2 = former->forward_train(encode_constant(img, 2), EngineMode::oracle, ctx);
  CHECK(l2[0].shape() == std::vector<i64>{2, 3});
  former->backward(l2, ctx);
  former->release_step(ctx);
}

TEST_CASE("reversible and oracle engines agree through a whole network") {
  ResNetConfig<double> rc;
  rc.blocks_per_stage = {1};
  rc.stream_channels = {4};
  rc.stem_channels = 8;
  rc.in_channels = 1;
  rc.num_classes = 2;
  rc.T = 2;

  auto run = [&](EngineMode mode) {
    auto net = build_revsresnet<double>(rc, 11);
    RunContext ctx;
    Rng rng(5);
    Tensor<double> img({2, 1, 8, 8});
    rng.fill_normal(img, 0.0, 1.0);
    Seq<double> logits = net->forward_train(encode_constant(img, 2), mode, ctx);
    Seq<double> dl;
    for (const auto& l : logits) dl.push_back(Tensor<double>::full(l.shape(), 0.25));
    net->backward(dl, ctx);
    std::vector<double> flat;
    for (Param<double>* p : net->params())
      for (i64 i = 0; i < p->grad.numel(); ++i) flat.push_back(p->grad[i]);
    std::vector<double> out;
    for (const auto& l : logits)
      for (i64 i = 0; i < l.numel(); ++i) out.push_back(l[i]);
    return std::pair<std::vector<double>, std::vector<double>>(flat, out);
  };
  auto [go, lo] = run(EngineMode::oracle);
  auto [gr, lr] = run(EngineMode::reversible);
  REQUIRE(go.size() == gr.size());
  for (std::size_t i = 0; i < lo.size(); ++i) CHECK(lo[i] == lr[i]);
  double scale = 0, diff = 0;
  for (std::size_t i = 0; i < go.size(); ++i) {
    scale = std::max({scale, std::fabs(go[i]), std::fabs(gr[i])});
    diff = std::max(diff, std::fabs(go[i] - gr[i]));
  }
  CHECK(diff / (scale + 1e-300) <= 1e-8);
}

TEST_CASE("toy pair is complexity matched within ten percent") {
  ResNetConfig<float> rev_cfg;
  rev_cfg.blocks_per_stage = {1};
  rev_cfg.stream_channels = {8};
  rev_cfg.stem_channels = 16;
  rev_cfg.in_channels = 1;
  rev_cfg.num_classes = 2;
  rev_cfg.T = 2;
  ResNetConfig<float> van_cfg = rev_cfg;
  van_cfg.stream_channels = {11};
  van_cfg.stem_channels = 11;
  auto a = build_revsresnet<float>(rev_cfg, 1);
  auto b = build_vanilla_counterpart<float>(van_cfg, 1);
  const double fa = static_cast<double>(measure_dense_flops(*a, {1, 8, 8}, 2));
  const double fb = static_cast<double>(measure_dense_flops(*b, {1, 8, 8}, 2));
  CHECK(std::fabs(fa - fb) / fb <= 0.10);
}

TEST_CASE("config validation rejects inconsistent structures") {
  ResNetConfig<double> bad;
  bad.blocks_per_stage = {1, 1};
  bad.stream_channels = {8};
  CHECK_THROWS_AS(build_revsresnet<double>(bad, 1), ContractError);

  ResNetConfig<double> odd;
  odd.blocks_per_stage = {1};
  odd.stream_channels = {8};
  odd.stem_channels = 9;  // not 2x stream width
  CHECK_THROWS_AS(build_revsresnet<double>(odd, 1), ContractError);

  FormerConfig<double> fbad = FormerConfig<double>::desk(2, 16, 4);
  fbad.heads = 3;
  CHECK_THROWS_AS(build_revsformer<double>(fbad, 1), ContractError);
}

TEST_CASE("exactly one reversible sequence in the transformer") {
  // structural contract: the former keeps all blocks in a single sequence,
  // so reversible-mode training touches exactly one boundary cache.
  FormerConfig<double> fc = FormerConfig<double>::desk(3, 16, 4);
  fc.in_channels = 1;
  fc.T = 2;
  fc.num_classes = 2;
  auto net = build_revsformer<double>(fc, 3);
  RunContext ctx;
  Rng rng(8);
  Tensor<double> img({1, 1, 8, 8});
  rng.fill_normal(img, 0.0, 1.0);
  Seq<double> logits = net->forward_train(encode_constant(img, 2), EngineMode::reversible, ctx);
  net->backward(logits, ctx);
  // after a full step nothing is left cached
  CHECK(ctx.ledger.live(MemCategory::activations) == 0);
  CHECK(ctx.ledger.live(MemCategory::neuron_state) == 0);
}
