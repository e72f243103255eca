#include <cmath>
#include <vector>

#include "attnpose/attention.hpp"
#include "attnpose/kernels.hpp"
#include "attnpose/rng.hpp"
#include "doctest.h"

using namespace attnpose;

namespace {

Tensor randn_tensor(Rng& rng, std::vector<int> shape) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("hand-evaluated 4-dim instance with ratio 2") {
  SelfAttention att("att", 4, 2);
  // All three input embeddings select the first two coordinates; the output
  // embedding is the transpose injection.
  att.w_theta.value.fill(0.0);
  att.w_phi.value.fill(0.0);
  att.w_g.value.fill(0.0);
  att.w_alpha.value.fill(0.0);
  att.w_theta.value.at(0, 0) = 1.0;
  att.w_theta.value.at(1, 1) = 1.0;
  att.w_phi.value.at(0, 0) = 1.0;
  att.w_phi.value.at(1, 1) = 1.0;
  att.w_g.value.at(0, 0) = 1.0;
  att.w_g.value.at(1, 1) = 1.0;
  att.w_alpha.value.at(0, 0) = 1.0;
  att.w_alpha.value.at(1, 1) = 1.0;

  Tensor x({4});
  x[0] = 1.0;
  x[1] = 1.0;

  const auto [out, trace] = attention_forward(x, att);
  REQUIRE(out.shape() == std::vector<int>{4});
  CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(out[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out[3] == doctest::Approx(0.0).epsilon(1e-12));

  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK(trace.similarity.at(i, j) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(trace.weights.at(i, j) == doctest::Approx(0.5).epsilon(1e-12));
    }
  CHECK(trace.attended[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(trace.attended[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero output embedding reduces the block to the identity") {
  Rng rng(21);
  SelfAttention att("att", 24, 8);
  att.init(rng);
  att.w_alpha.value.fill(0.0);
  const Tensor x = randn_tensor(rng, {3, 24});
  const Tensor out = att.forward(x, false, nullptr);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(out[i] == x[i]);
}

TEST_CASE("attention weights are row-stochastic") {
  Rng rng(22);
  SelfAttention att("att", 64, 8);
  att.init(rng);
  const Tensor x = randn_tensor(rng, {2, 64});
  att.forward(x, false, nullptr);
  const Tensor& w = att.weights();
  const int d = att.embed_dim();
  REQUIRE(w.shape() == std::vector<int>{2, d, d});
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < d; ++i) {
      double sum = 0.0;
      for (int j = 0; j < d; ++j) {
        const double v = w[(static_cast<int64_t>(b) * d + i) * d + j];
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("shifting one similarity row leaves its weights unchanged") {
  Rng rng(23);
  SelfAttention att("att", 32, 8);
  att.init(rng);
  Tensor x = randn_tensor(rng, {32});
  const auto [out, trace] = attention_forward(x, att);
  const int d = att.embed_dim();

  Tensor shifted = trace.similarity;
  for (int j = 0; j < d; ++j) shifted.at(1, j) += 37.25;
  Tensor reweighted(shifted.shape());
  kernels::softmax_rows(d, d, shifted.data(), reweighted.data());
  for (int j = 0; j < d; ++j)
    CHECK(std::abs(reweighted.at(1, j) - trace.weights.at(1, j)) < 1e-9);
}

TEST_CASE("output length equals input length across configurations") {
  Rng rng(24);
  for (const auto& [c, n] : std::vector<std::pair<int, int>>{{8, 2}, {32, 8}, {30, 5}, {16, 16}}) {
    SelfAttention att("att", c, n);
    att.init(rng);
    const Tensor x = randn_tensor(rng, {2, c});
    const Tensor out = att.forward(x, false, nullptr);
    CHECK(out.shape() == x.shape());
    CHECK(out.all_finite());
  }
}

TEST_CASE("invalid feature/ratio combinations are rejected") {
  CHECK_THROWS_AS(SelfAttention("att", 10, 3), ConfigError);
  CHECK_THROWS_AS(SelfAttention("att", 8, 0), ConfigError);
  SelfAttention att("att", 8, 2);
  Tensor wrong({2, 6});
  CHECK_THROWS_AS(att.forward(wrong, false, nullptr), ConfigError);
}

TEST_CASE("analytic gradients match finite differences on random instances") {
  Rng rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    SelfAttention att("att", 32, 8);
    att.init(rng);
    const Tensor x = randn_tensor(rng, {32});
    const double disc = attention_backward_check(x, att, 1e-5);
    CHECK(disc < 1e-4);
  }
}

TEST_CASE("gradient check is exact on the pure residual path") {
  Rng rng(26);
  SelfAttention att("att", 16, 4);
  att.init(rng);
  att.w_alpha.value.fill(0.0);

  // With no re-embedding the output is x itself, so d(sum out)/dx is the
  // all-ones vector and the analytic path must reproduce it exactly.
  Tensor x = randn_tensor(rng, {1, 16});
  att.forward(x, false, nullptr);
  for (Parameter* p : {&att.w_theta, &att.w_phi, &att.w_g, &att.w_alpha}) p->zero_grad();
  const Tensor ones = Tensor::full({1, 16}, 1.0);
  const Tensor dx = att.backward(ones);
  for (int64_t i = 0; i < dx.size(); ++i) CHECK(dx[i] == 1.0);
}

TEST_CASE("gradient check validates the perturbation range") {
  Rng rng(27);
  SelfAttention att("att", 8, 2);
  att.init(rng);
  const Tensor x = randn_tensor(rng, {8});
  CHECK_THROWS_AS(attention_backward_check(x, att, 1e-8), ConfigError);
  CHECK_THROWS_AS(attention_backward_check(x, att, 1e-2), ConfigError);
}
