#include <cmath>
#include <functional>
#include <vector>

#include "attnpose/layers.hpp"
#include "attnpose/rng.hpp"
#include "doctest.h"

using namespace attnpose;

namespace {

Tensor randn_tensor(Rng& rng, std::vector<int> shape) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

double probe(const Tensor& y, const Tensor& r) {
  double s = 0.0;
  for (int64_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

// FD check of d(probe)/d(input) and of every parameter gradient for a layer.
void check_layer_grads(Layer& layer, Tensor x, const double tol = 1e-6) {
  Rng rng(99);
  Tensor y = layer.forward(x, false, nullptr);
  const Tensor r = randn_tensor(rng, y.shape());

  std::vector<Parameter*> params;
  layer.collect_params(params);
  for (Parameter* p : params) p->zero_grad();
  const Tensor dx = layer.backward(r);
  REQUIRE(dx.same_shape(x));

  const double h = 1e-5;
  const auto objective = [&] { return probe(layer.forward(x, false, nullptr), r); };
  const auto compare = [&](double* slot, double analytic) {
    const double saved = *slot;
    *slot = saved + h;
    const double jp = objective();
    *slot = saved - h;
    const double jm = objective();
    *slot = saved;
    const double fd = (jp - jm) / (2.0 * h);
    CHECK(std::abs(analytic - fd) <= tol * std::max(1.0, std::abs(analytic)));
  };

  for (int64_t i = 0; i < x.size(); ++i) compare(&x[i], dx[i]);
  for (Parameter* p : params)
    for (int64_t i = 0; i < p->value.size(); ++i) compare(&p->value[i], p->grad[i]);
}

}  // namespace

TEST_CASE("dense layer gradients") {
  Rng rng(1);
  Dense layer("fc", 6, 4);
  layer.init(rng);
  check_layer_grads(layer, randn_tensor(rng, {3, 6}));
}

TEST_CASE("conv layer gradients") {
  Rng rng(2);
  Conv2d layer("conv", 2, 3, 3, 2, 1);
  layer.init(rng);
  check_layer_grads(layer, randn_tensor(rng, {2, 2, 6, 5}));
}

TEST_CASE("groupnorm layer gradients") {
  Rng rng(3);
  GroupNorm layer("gn", 6, 3);
  layer.init(rng);
  // Pre-scale inputs so normalization statistics are well conditioned.
  Tensor x = randn_tensor(rng, {2, 6, 4, 3});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = 1.5 * x[i] + 0.5;
  check_layer_grads(layer, std::move(x), 5e-6);
}

TEST_CASE("residual block gradients with identity skip") {
  Rng rng(4);
  ResidualBlock layer("blk", 4, 4, 1);
  layer.init(rng);
  check_layer_grads(layer, randn_tensor(rng, {2, 4, 5, 5}), 5e-6);
}

TEST_CASE("residual block gradients with projection skip") {
  Rng rng(5);
  ResidualBlock layer("blk", 3, 6, 2);
  layer.init(rng);
  check_layer_grads(layer, randn_tensor(rng, {2, 3, 6, 6}), 5e-6);
}

TEST_CASE("sequential mlp gradients") {
  Rng rng(6);
  Sequential seq;
  seq.add<Dense>("fc1", 5, 8);
  seq.add<ReLU>();
  seq.add<Dense>("fc2", 8, 2);
  seq.init(rng);
  // Keep activations away from the ReLU kink for clean finite differences.
  Tensor x = randn_tensor(rng, {4, 5});
  check_layer_grads(seq, std::move(x), 5e-5);
}

TEST_CASE("residual block downsamples spatially") {
  Rng rng(7);
  ResidualBlock layer("blk", 4, 8, 2);
  layer.init(rng);
  const Tensor y = layer.forward(randn_tensor(rng, {1, 4, 8, 8}), false, nullptr);
  CHECK(y.shape() == std::vector<int>{1, 8, 4, 4});
}

TEST_CASE("dropout is identity in eval and a scaled mask in training") {
  Rng rng(8);
  Dropout layer(0.5);
  const Tensor x = randn_tensor(rng, {1, 1000});

  const Tensor eval_out = layer.forward(x, false, nullptr);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(eval_out[i] == x[i]);

  Rng stream(42);
  const Tensor train_out = layer.forward(x, true, &stream);
  int64_t kept = 0;
  for (int64_t i = 0; i < x.size(); ++i) {
    const double ratio = train_out[i] / (x[i] != 0.0 ? x[i] : 1.0);
    CHECK((std::abs(ratio) < 1e-12 || std::abs(ratio - 2.0) < 1e-12));
    if (ratio != 0.0) ++kept;
  }
  CHECK(kept > 400);
  CHECK(kept < 600);

  // Same stream seed, same mask.
  Rng stream2(42);
  const Tensor again = layer.forward(x, true, &stream2);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(again[i] == train_out[i]);

  // Backward routes gradients through the latest mask.
  const Tensor dy = Tensor::full(x.shape(), 1.0);
  const Tensor dx = layer.backward(dy);
  for (int64_t i = 0; i < x.size(); ++i) {
    CHECK((dx[i] == 0.0 || dx[i] == 2.0));
    CHECK((dx[i] == 0.0) == (again[i] == 0.0 && x[i] != 0.0));
  }
}

TEST_CASE("dropout requires an rng only when active") {
  Dropout layer(0.3);
  Tensor x = Tensor::full({1, 4}, 1.0);
  CHECK_NOTHROW(layer.forward(x, false, nullptr));
  CHECK_THROWS_AS(layer.forward(x, true, nullptr), ConfigError);
  Dropout off(0.0);
  CHECK_NOTHROW(off.forward(x, true, nullptr));
}

TEST_CASE("parameter gradients accumulate until zeroed") {
  Rng rng(9);
  Dense layer("fc", 3, 2);
  layer.init(rng);
  const Tensor x = randn_tensor(rng, {2, 3});
  const Tensor dy = randn_tensor(rng, {2, 2});
  layer.forward(x, false, nullptr);
  layer.backward(dy);
  const Tensor once = layer.w.grad;
  layer.forward(x, false, nullptr);
  layer.backward(dy);
  for (int64_t i = 0; i < once.size(); ++i)
    CHECK(layer.w.grad[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
  layer.w.zero_grad();
  for (int64_t i = 0; i < once.size(); ++i) CHECK(layer.w.grad[i] == 0.0);
}

TEST_CASE("layer shape validation") {
  Rng rng(10);
  Dense fc("fc", 5, 2);
  fc.init(rng);
  Tensor wrong({2, 4});
  CHECK_THROWS_AS(fc.forward(wrong, false, nullptr), ShapeError);
  Conv2d conv("conv", 3, 4, 3, 1, 1);
  Tensor rank3({3, 5, 5});
  CHECK_THROWS_AS(conv.forward(rank3, false, nullptr), ShapeError);
  CHECK_THROWS_AS(GroupNorm("gn", 6, 4), ConfigError);
  CHECK_THROWS_AS(Dropout(1.0), ConfigError);
}
