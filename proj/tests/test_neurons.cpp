#include <catch2/catch_amalgamated.hpp>

#include "revsnn/neurons.hpp"
#include "revsnn/rng.hpp"

using namespace revsnn;

namespace {
NeuronParams<double> lif_defaults() {
  NeuronParams<double> p;
  p.kind = NeuronKind::lif;
  return p;
}
NeuronParams<double> if_defaults() {
  NeuronParams<double> p;
  p.kind = NeuronKind::if_;
  return p;
}
}  // namespace

TEST_CASE("lif step hand traces") {
  NeuronParams<double> p = lif_defaults();
  NeuronState<double> st;

  // strong drive: H = 0 + (2 - 0)/2 = 1, fires, resets to 0.
  Tensor<double> s = lif_step(p, st, Tensor<double>::full({1}, 2.0));
  CHECK(st.h[0] == 1.0);
  CHECK(s[0] == 1.0);
  CHECK(st.v[0] == 0.0);

  // decay toward a weak input: 0.5 + (0.2 - 0.5)/2 = 0.35, no spike.
  reset_state(p, st);
  lif_step(p, st, Tensor<double>::full({1}, 1.0));  // brings V to 0.5
  CHECK(st.v[0] == 0.5);
  Tensor<double> s2 = lif_step(p, st, Tensor<double>::full({1}, 0.2));
  CHECK(st.h[0] == Catch::Approx(0.35).margin(1e-15));
  CHECK(s2[0] == 0.0);
  CHECK(st.v[0] == Catch::Approx(0.35).margin(1e-15));

  // quiescent neuron stays at rest.
  reset_state(p, st);
  Tensor<double> s3 = lif_step(p, st, Tensor<double>::zeros({1}));
  CHECK(st.h[0] == 0.0);
  CHECK(s3[0] == 0.0);
  CHECK(st.v[0] == 0.0);
}

TEST_CASE("if step hand traces") {
  NeuronParams<double> p = if_defaults();
  NeuronState<double> st;
  st.v = Tensor<double>::full({1}, 0.5);

  Tensor<double> s = if_step(p, st, Tensor<double>::full({1}, 0.3));
  CHECK(st.h[0] == 0.8);
  CHECK(s[0] == 0.0);
  CHECK(st.v[0] == 0.8);

  st.v = Tensor<double>::full({1}, 0.9);
  Tensor<double> s2 = if_step(p, st, Tensor<double>::full({1}, 0.3));
  CHECK(st.h[0] == Catch::Approx(1.2).margin(1e-15));
  CHECK(s2[0] == 1.0);
  CHECK(st.v[0] == 0.0);

  reset_state(p, st);
  Tensor<double> s3 = if_step(p, st, Tensor<double>::zeros({2}));
  for (i64 i = 0; i < 2; ++i) CHECK(s3[i] == 0.0);
}

TEST_CASE("surrogate gradient window") {
  NeuronParams<double> p = lif_defaults();
  Tensor<double> h({3}, {1.0, 2.0, 0.6});  // at threshold, outside, inside
  Tensor<double> g = surrogate_grad(p, h);
  CHECK(g[0] == 1.0);   // 1/w at the center
  CHECK(g[1] == 0.0);   // v_th + w is outside the window
  CHECK(g[2] == 1.0);

  // window is symmetric around the threshold
  Tensor<double> pair({2}, {1.0 - 0.4, 1.0 + 0.4});
  Tensor<double> gp = surrogate_grad(p, pair);
  CHECK(gp[0] == gp[1]);
}

TEST_CASE("multistep forward carries state") {
  NeuronParams<double> p = if_defaults();
  NeuronState<double> st;
  Seq<double> in{Tensor<double>::full({1}, 0.6), Tensor<double>::full({1}, 0.6)};
  Seq<double> s = multistep_forward(p, st, in, 2);
  CHECK(s[0][0] == 0.0);  // H=0.6
  CHECK(s[1][0] == 1.0);  // H=1.2 crosses threshold

  // stepping past the declared horizon without reset is a contract error
  CHECK_THROWS_AS(multistep_forward(p, st, in, 2), ContractError);
  reset_state(p, st);
  CHECK_NOTHROW(multistep_forward(p, st, in, 2));

  // zero input, zero spikes
  NeuronState<double> st2;
  Seq<double> z{Tensor<double>::zeros({3}), Tensor<double>::zeros({3})};
  for (const auto& t : multistep_forward(p, st2, z, 2))
    for (i64 i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0);

  // T=1 degenerates to a single step
  NeuronState<double> st3;
  Seq<double> one{Tensor<double>::full({1}, 2.0)};
  CHECK(multistep_forward(lif_defaults(), st3, one, 1)[0][0] == 1.0);
}

TEST_CASE("reset is idempotent and replay is bit-exact") {
  NeuronParams<double> p = lif_defaults();
  NeuronState<double> st;
  Rng rng(4);
  Seq<double> in;
  for (int t = 0; t < 4; ++t) {
    Tensor<double> x({5});
    rng.fill_normal(x, 0.5, 0.8);
    in.push_back(x);
  }
  Seq<double> a = multistep_forward(p, st, in, 4);
  Tensor<double> v_end = st.v;
  reset_state(p, st);
  CHECK(st.t == 0);
  reset_state(p, st);  // twice = once
  CHECK(st.t == 0);
  Seq<double> b = multistep_forward(p, st, in, 4);
  for (int t = 0; t < 4; ++t)
    for (i64 i = 0; i < a[0].numel(); ++i) CHECK(a[t][i] == b[t][i]);
  for (i64 i = 0; i < v_end.numel(); ++i) CHECK(st.v[i] == v_end[i]);
}

TEST_CASE("shape mismatch raises") {
  NeuronParams<double> p = lif_defaults();
  NeuronState<double> st;
  st.v = Tensor<double>::zeros({2});
  CHECK_THROWS_AS(lif_step(p, st, Tensor<double>::zeros({3})), ShapeError);
}

TEST_CASE("spiking neuron layer BPTT matches the hand derivation at T=2") {
  // tau=2: H1 = I1/2; V1 = H1 (no spike for small drive);
  // H2 = V1 + (I2 - V1)/2. With dL/dS = (c1, c2) and sg = 1 inside the
  // window: dH2 = c2, dI2 = c2/2, dH1 = c1 + (1 - 1/tau)*dH2*(1-S1),
  // dI1 = dH1/2.
  RunContext ctx;
  NeuronParams<double> p = lif_defaults();
  SpikingNeuron<double> sn(p);
  const double i1 = 1.1, i2 = 0.9, c1 = 0.7, c2 = -0.4;
  Seq<double> xs{Tensor<double>::full({1, 1}, i1), Tensor<double>::full({1, 1}, i2)};
  Tape<double> tape;
  Seq<double> s = sn.forward(xs, RunMode::train_cached, &tape, nullptr, ctx);
  REQUIRE(s[0][0] == 0.0);  // H1 = 0.55
  REQUIRE(s[1][0] == 0.0);  // H2 = 0.725
  Seq<double> dys{Tensor<double>::full({1, 1}, c1), Tensor<double>::full({1, 1}, c2)};
  Seq<double> dx = sn.backward(dys, tape, ctx);
  const double dh2 = c2 * 1.0;
  const double dh1 = c1 * 1.0 + dh2 * 0.5 * 1.0;
  CHECK(std::fabs(dx[1][0] - dh2 * 0.5) < 1e-10);
  CHECK(std::fabs(dx[0][0] - dh1 * 0.5) < 1e-10);
  sn.reset_state(ctx);
}

TEST_CASE("spiking neuron layer tracks state bytes in the ledger") {
  RunContext ctx;
  SpikingNeuron<double> sn(lif_defaults());
  Seq<double> xs{Tensor<double>::zeros({2, 3})};
  Tape<double> tape;
  sn.forward(xs, RunMode::train_stats_only, &tape, nullptr, ctx);
  CHECK(ctx.ledger.live(MemCategory::neuron_state) == 6 * 8);
  CHECK_FALSE(sn.state_is_reset());
  sn.reset_state(ctx);
  CHECK(ctx.ledger.live(MemCategory::neuron_state) == 0);
  CHECK(sn.state_is_reset());
}

TEST_CASE("binary outputs across random drives") {
  RunContext ctx;
  Rng rng(9);
  for (int trial = 0; trial < 4; ++trial) {
    NeuronParams<double> p = trial % 2 ? if_defaults() : lif_defaults();
    SpikingNeuron<double> sn(p);
    Seq<double> xs;
    for (int t = 0; t < 3; ++t) {
      Tensor<double> x({4, 4});
      rng.fill_normal(x, 0.4, 1.2);
      xs.push_back(x);
    }
    Tape<double> tape;
    for (const auto& s : sn.forward(xs, RunMode::train_cached, &tape, nullptr, ctx))
      for (i64 i = 0; i < s.numel(); ++i) CHECK((s[i] == 0.0 || s[i] == 1.0));
    sn.reset_state(ctx);
  }
}
