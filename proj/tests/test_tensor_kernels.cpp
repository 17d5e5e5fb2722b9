#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "revsnn/kernels.hpp"
#include "revsnn/rng.hpp"

using namespace revsnn;
namespace K = revsnn::kernels;

namespace {

template <typename F>
double dot_loss(const Tensor<double>& c, F&& f) {
  Tensor<double> y = f();
  double s = 0;
  for (i64 i = 0; i < y.numel(); ++i) s += c[i] * y[i];
  return s;
}

Tensor<double> fd_grad(const std::function<double(const Tensor<double>&)>& f, Tensor<double> x,
                       double h = 1e-6) {
  Tensor<double> g(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double dn = f(x);
    x[i] = keep;
    g[i] = (up - dn) / (2 * h);
  }
  return g;
}

double max_rel(const Tensor<double>& a, const Tensor<double>& b) {
  double e = 0;
  for (i64 i = 0; i < a.numel(); ++i)
    e = std::max(e, std::fabs(a[i] - b[i]) / std::max({1.0, std::fabs(a[i]), std::fabs(b[i])}));
  return e;
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor<double> t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.bytes() == 48);
  CHECK_THROWS_AS(Tensor<double>({2, 3}, std::vector<double>(5)), ShapeError);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  Tensor<double> r = t.reshaped({3, 2});
  CHECK(r.dim(0) == 3);
}

TEST_CASE("conv2d single multiply and window sum") {
  // 1x1 kernel on a 1x1 image: plain product.
  Tensor<double> x({1, 1, 1, 1}, {2.0});
  Tensor<double> w({1, 1, 1, 1}, {3.0});
  OpCounter ops;
  Tensor<double> y = K::conv2d(x, w, nullptr, 1, 0, &ops);
  CHECK(y.numel() == 1);
  CHECK(y[0] == 6.0);
  CHECK(ops.total(Phase::forward, OpKind::conv) == 1);

  // all-ones 3x3 against all-ones 3x3: the window sum.
  Tensor<double> x9 = Tensor<double>::ones({1, 1, 3, 3});
  Tensor<double> w9 = Tensor<double>::ones({1, 1, 3, 3});
  Tensor<double> y9 = K::conv2d(x9, w9, nullptr, 1, 0);
  CHECK(y9.numel() == 1);
  CHECK(y9[0] == 9.0);

  // zero input stays zero through any weights.
  Rng rng(3);
  Tensor<double> wz({2, 1, 3, 3});
  rng.fill_normal(wz, 0.0, 1.0);
  Tensor<double> yz = K::conv2d(Tensor<double>::zeros({1, 1, 4, 4}), wz, nullptr, 1, 1);
  for (i64 i = 0; i < yz.numel(); ++i) CHECK(yz[i] == 0.0);
}

TEST_CASE("conv2d output extent and op count formula") {
  Rng rng(1);
  Tensor<double> x({2, 3, 9, 7}), w({4, 3, 3, 3});
  rng.fill_normal(x, 0.0, 1.0);
  rng.fill_normal(w, 0.0, 1.0);
  OpCounter ops;
  Tensor<double> y = K::conv2d(x, w, nullptr, 2, 1, &ops);
  CHECK(y.dim(2) == (9 + 2 - 3) / 2 + 1);
  CHECK(y.dim(3) == (7 + 2 - 3) / 2 + 1);
  const u64 want = 2ull * 4 * y.dim(2) * y.dim(3) * 3 * 3 * 3;
  CHECK(ops.total(Phase::forward, OpKind::conv) == want);
}

TEST_CASE("conv2d shape errors name the offending axis") {
  Tensor<double> x({1, 3, 4, 4}), w({2, 4, 3, 3});
  try {
    K::conv2d(x, w, nullptr, 1, 1);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(e.axis() == 1);
    CHECK(e.got() == 3);
  }
  Tensor<double> wbig({2, 3, 9, 3});
  CHECK_THROWS_AS(K::conv2d(x, wbig, nullptr, 1, 0), ShapeError);
  CHECK_THROWS_AS(K::conv2d(x, w, nullptr, 0, 0), ContractError);
}

TEST_CASE("conv2d vjp matches finite differences") {
  Rng rng(11);
  Tensor<double> x({2, 2, 5, 5}), w({3, 2, 3, 3}), b({3});
  rng.fill_normal(x, 0.0, 1.0);
  rng.fill_normal(w, 0.0, 0.7);
  rng.fill_normal(b, 0.0, 0.3);
  Tensor<double> y = K::conv2d(x, w, &b, 1, 1);
  Tensor<double> c(y.shape());
  rng.fill_normal(c, 0.0, 1.0);
  auto g = K::conv2d_vjp(x, w, true, 1, 1, c);
  auto fx = [&](const Tensor<double>& xx) {
    return dot_loss(c, [&] { return K::conv2d(xx, w, &b, 1, 1); });
  };
  auto fw = [&](const Tensor<double>& ww) {
    return dot_loss(c, [&] { return K::conv2d(x, ww, &b, 1, 1); });
  };
  auto fb = [&](const Tensor<double>& bb) {
    return dot_loss(c, [&] { return K::conv2d(x, w, &bb, 1, 1); });
  };
  CHECK(max_rel(g.dx, fd_grad(fx, x)) < 1e-5);
  CHECK(max_rel(g.dw, fd_grad(fw, w)) < 1e-5);
  CHECK(max_rel(g.dbias, fd_grad(fb, b)) < 1e-5);
}

TEST_CASE("batchnorm modes") {
  // constant over the batch: zero variance, output collapses to beta.
  Tensor<double> x = Tensor<double>::full({4, 1, 1, 1}, 3.25);
  Tensor<double> gamma = Tensor<double>::ones({1});
  Tensor<double> beta = Tensor<double>::zeros({1});
  auto r = K::batchnorm(x, gamma, beta, K::BnMode::train);
  for (i64 i = 0; i < r.y.numel(); ++i) CHECK(r.y[i] == 0.0);

  // two samples 1 and 3: mean 2, biased variance 1, eps perturbs slightly.
  Tensor<double> x13({2, 1, 1, 1}, {1.0, 3.0});
  auto r13 = K::batchnorm(x13, gamma, beta, K::BnMode::train);
  CHECK(std::fabs(r13.y[0] + 1.0) < 1e-4);
  CHECK(std::fabs(r13.y[1] - 1.0) < 1e-4);
  CHECK(r13.stats.mean[0] == 2.0);
  CHECK(r13.stats.var[0] == 1.0);

  // gamma 0 annihilates the input.
  Tensor<double> g0 = Tensor<double>::zeros({1});
  Tensor<double> b7 = Tensor<double>::full({1}, 7.5);
  auto rz = K::batchnorm(x13, g0, b7, K::BnMode::train);
  CHECK(rz.y[0] == 7.5);
  CHECK(rz.y[1] == 7.5);

  // replay applies the cached statistics exactly; missing cache is an error.
  auto rr = K::batchnorm(x13, gamma, beta, K::BnMode::replay, &r13.stats);
  CHECK(rr.y[0] == r13.y[0]);
  CHECK_THROWS_AS(K::batchnorm(x13, gamma, beta, K::BnMode::replay), ContractError);
}

TEST_CASE("avgpool2d") {
  Tensor<double> ones = Tensor<double>::ones({1, 1, 2, 2});
  Tensor<double> y = K::avgpool2d(ones, 2, 2);
  CHECK(y.numel() == 1);
  CHECK(y[0] == 1.0);

  Tensor<double> x({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(K::avgpool2d(x, 2, 2)[0] == 2.5);

  Tensor<double> z = K::avgpool2d(Tensor<double>::zeros({1, 2, 4, 4}), 2, 2);
  for (i64 i = 0; i < z.numel(); ++i) CHECK(z[i] == 0.0);

  CHECK_THROWS_AS(K::avgpool2d(x, 5, 1), ShapeError);

  // vjp spreads grad / k^2 uniformly.
  Tensor<double> g({1, 1, 1, 1}, {8.0});
  Tensor<double> dx = K::avgpool2d_vjp<double>({1, 1, 2, 2}, 2, 2, 0, g);
  for (i64 i = 0; i < 4; ++i) CHECK(dx[i] == 2.0);
}

TEST_CASE("linear") {
  Tensor<double> x({1, 2}, {1, 2});
  Tensor<double> w({1, 2}, {3, 4});
  Tensor<double> b({1}, {0});
  OpCounter ops;
  Tensor<double> y = K::linear(x, w, &b, &ops);
  CHECK(y[0] == 11.0);
  CHECK(ops.total(Phase::forward, OpKind::linear) == 2);

  // identity weights reproduce the input.
  Tensor<double> eye({2, 2}, {1, 0, 0, 1});
  Tensor<double> x2({1, 2}, {5, -3});
  Tensor<double> y2 = K::linear(x2, eye, nullptr);
  CHECK(y2[0] == 5.0);
  CHECK(y2[1] == -3.0);

  // zero input returns the broadcast bias.
  Tensor<double> b2({2}, {0.5, -0.5});
  Tensor<double> y3 = K::linear(Tensor<double>::zeros({3, 2}), eye, &b2);
  CHECK(y3[0] == 0.5);
  CHECK(y3[5] == -0.5);

  CHECK_THROWS_AS(K::linear(Tensor<double>::zeros({1, 3}), w, nullptr), ShapeError);
}

TEST_CASE("maxpool forward picks first max and routes gradient") {
  Tensor<double> x({1, 1, 2, 2}, {1.0, 3.0, 3.0, 2.0});
  auto [y, idx] = K::maxpool2d(x, 2, 2);
  CHECK(y[0] == 3.0);
  CHECK(idx[0] == 1.0);  // first maximum in row-major order
  Tensor<double> g({1, 1, 1, 1}, {5.0});
  Tensor<double> dx = K::maxpool2d_vjp<double>({1, 1, 2, 2}, idx, g);
  CHECK(dx[1] == 5.0);
  CHECK(dx[0] + dx[2] + dx[3] == 0.0);
}

TEST_CASE("attention products on hand integers") {
  // one batch, one head, two tokens, binary operands
  Tensor<double> q({1, 2, 2}, {1, 0, 1, 1});
  Tensor<double> k({1, 2, 2}, {1, 1, 0, 1});
  Tensor<double> v({1, 2, 2}, {1, 0, 0, 1});
  Tensor<double> a = K::attn_scores(q, k, 1);
  // A = q k^T: [[1,0],[2,1]]
  CHECK(a[0] == 1.0);
  CHECK(a[1] == 0.0);
  CHECK(a[2] == 2.0);
  CHECK(a[3] == 1.0);
  Tensor<double> o = K::attn_apply(a, v, 1, 0.125);
  // A v = [[1,0],[2,1]] -> scaled by 1/8
  CHECK(o[0] == 0.125);
  CHECK(o[1] == 0.0);
  CHECK(o[2] == 0.25);
  CHECK(o[3] == 0.125);

  CHECK_THROWS_AS(K::attn_scores(Tensor<double>::zeros({1, 2, 3}),
                                 Tensor<double>::zeros({1, 2, 3}), 2),
                  ShapeError);
}

TEST_CASE("kernel determinism is bit-exact") {
  Rng rng(5);
  Tensor<double> x({2, 3, 6, 6}), w({4, 3, 3, 3});
  rng.fill_normal(x, 0.0, 1.0);
  rng.fill_normal(w, 0.0, 1.0);
  Tensor<double> y1 = K::conv2d(x, w, nullptr, 1, 1);
  Tensor<double> y2 = K::conv2d(x, w, nullptr, 1, 1);
  for (i64 i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("bias-free conv is exactly homogeneous") {
  Rng rng(6);
  Tensor<double> x({1, 2, 5, 5}), w({2, 2, 3, 3});
  rng.fill_normal(x, 0.0, 1.0);
  rng.fill_normal(w, 0.0, 1.0);
  Tensor<double> ax(x.shape());
  const double a = 2.0;  // power of two: scaling commutes bit-exactly
  for (i64 i = 0; i < x.numel(); ++i) ax[i] = a * x[i];
  Tensor<double> y = K::conv2d(x, w, nullptr, 1, 0);
  Tensor<double> ya = K::conv2d(ax, w, nullptr, 1, 0);
  double rel = 0;
  for (i64 i = 0; i < y.numel(); ++i)
    rel = std::max(rel, std::fabs(ya[i] - a * y[i]) / std::max(1.0, std::fabs(a * y[i])));
  CHECK(rel <= 1e-12);
}

TEST_CASE("channel split and concat invert each other") {
  Rng rng(8);
  Tensor<double> x({2, 6, 3, 3});
  rng.fill_normal(x, 0.0, 1.0);
  auto [a, b] = K::split_channels(x);
  Tensor<double> back = K::concat_channels(a, b);
  for (i64 i = 0; i < x.numel(); ++i) CHECK(back[i] == x[i]);
  CHECK_THROWS_AS(K::split_channels(Tensor<double>::zeros({1, 3, 2, 2})), ShapeError);
}
