#include "attnpose/attention.hpp"

#include <cmath>

#include "attnpose/errors.hpp"
#include "attnpose/kernels.hpp"

namespace attnpose {

SelfAttention::SelfAttention(std::string name, int feature_dim, int ratio)
    : w_theta(name + ".w_theta", {feature_dim / (ratio > 0 ? ratio : 1), feature_dim}),
      w_phi(name + ".w_phi", {feature_dim / (ratio > 0 ? ratio : 1), feature_dim}),
      w_g(name + ".w_g", {feature_dim / (ratio > 0 ? ratio : 1), feature_dim}),
      w_alpha(name + ".w_alpha", {feature_dim, feature_dim / (ratio > 0 ? ratio : 1)}),
      c_(feature_dim),
      d_(feature_dim / (ratio > 0 ? ratio : 1)) {
  if (ratio <= 0 || feature_dim <= 0 || feature_dim % ratio != 0)
    throw ConfigError("attention: feature_dim must be a positive multiple of the ratio");
}

Tensor SelfAttention::forward(const Tensor& x, bool, Rng*) {
  if (x.rank() != 2 || x.dim(1) != c_) throw ConfigError("attention: input must be [batch, C]");
  const int batch = x.dim(0);
  x_ = x;

  a_ = Tensor({batch, d_});
  b_ = Tensor({batch, d_});
  g_ = Tensor({batch, d_});
  kernels::dense_forward(batch, c_, d_, x.data(), w_theta.value.data(), nullptr, a_.data());
  kernels::dense_forward(batch, c_, d_, x.data(), w_phi.value.data(), nullptr, b_.data());
  kernels::dense_forward(batch, c_, d_, x.data(), w_g.value.data(), nullptr, g_.data());

  s_ = Tensor({batch, d_, d_});
  for (int bi = 0; bi < batch; ++bi) {
    const double* av = a_.data() + static_cast<int64_t>(bi) * d_;
    const double* bv = b_.data() + static_cast<int64_t>(bi) * d_;
    double* sv = s_.data() + static_cast<int64_t>(bi) * d_ * d_;
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) sv[static_cast<int64_t>(i) * d_ + j] = av[i] * bv[j];
  }

  a_soft_ = Tensor(s_.shape());
  kernels::softmax_rows(batch * d_, d_, s_.data(), a_soft_.data());

  y_ = Tensor({batch, d_});
  for (int bi = 0; bi < batch; ++bi) {
    const double* w = a_soft_.data() + static_cast<int64_t>(bi) * d_ * d_;
    const double* gv = g_.data() + static_cast<int64_t>(bi) * d_;
    double* yv = y_.data() + static_cast<int64_t>(bi) * d_;
    for (int i = 0; i < d_; ++i) {
      double acc = 0.0;
      for (int j = 0; j < d_; ++j) acc += w[static_cast<int64_t>(i) * d_ + j] * gv[j];
      yv[i] = acc;
    }
  }

  Tensor out({batch, c_});
  kernels::dense_forward(batch, d_, c_, y_.data(), w_alpha.value.data(), nullptr, out.data());
  for (int64_t i = 0; i < out.size(); ++i) out[i] += x[i];
  return out;
}

Tensor SelfAttention::backward(const Tensor& dy) {
  const int batch = x_.dim(0);

  // Residual path.
  Tensor dx = dy;

  // out = W_alpha y + x.
  kernels::dense_backward_params(batch, d_, c_, dy.data(), y_.data(), w_alpha.grad.data(),
                                 nullptr);
  Tensor dy_y({batch, d_});
  kernels::dense_backward_input(batch, d_, c_, dy.data(), w_alpha.value.data(), dy_y.data());

  // y = A g.
  Tensor da_soft(s_.shape());
  Tensor dg({batch, d_});
  for (int bi = 0; bi < batch; ++bi) {
    const double* dyv = dy_y.data() + static_cast<int64_t>(bi) * d_;
    const double* gv = g_.data() + static_cast<int64_t>(bi) * d_;
    const double* w = a_soft_.data() + static_cast<int64_t>(bi) * d_ * d_;
    double* dav = da_soft.data() + static_cast<int64_t>(bi) * d_ * d_;
    double* dgv = dg.data() + static_cast<int64_t>(bi) * d_;
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) dav[static_cast<int64_t>(i) * d_ + j] = dyv[i] * gv[j];
    for (int j = 0; j < d_; ++j) {
      double acc = 0.0;
      for (int i = 0; i < d_; ++i) acc += w[static_cast<int64_t>(i) * d_ + j] * dyv[i];
      dgv[j] = acc;
    }
  }

  // A = softmax_rows(S).
  Tensor ds(s_.shape());
  kernels::softmax_backward_rows(batch * d_, d_, a_soft_.data(), da_soft.data(), ds.data());

  // S = a b^T.
  Tensor da({batch, d_});
  Tensor db({batch, d_});
  for (int bi = 0; bi < batch; ++bi) {
    const double* dsv = ds.data() + static_cast<int64_t>(bi) * d_ * d_;
    const double* av = a_.data() + static_cast<int64_t>(bi) * d_;
    const double* bv = b_.data() + static_cast<int64_t>(bi) * d_;
    double* dav = da.data() + static_cast<int64_t>(bi) * d_;
    double* dbv = db.data() + static_cast<int64_t>(bi) * d_;
    for (int i = 0; i < d_; ++i) {
      double acc = 0.0;
      for (int j = 0; j < d_; ++j) acc += dsv[static_cast<int64_t>(i) * d_ + j] * bv[j];
      dav[i] = acc;
    }
    for (int j = 0; j < d_; ++j) {
      double acc = 0.0;
      for (int i = 0; i < d_; ++i) acc += dsv[static_cast<int64_t>(i) * d_ + j] * av[i];
      dbv[j] = acc;
    }
  }

  // The three input embeddings.
  Tensor tmp({batch, c_});
  kernels::dense_backward_params(batch, c_, d_, da.data(), x_.data(), w_theta.grad.data(),
                                 nullptr);
  kernels::dense_backward_input(batch, c_, d_, da.data(), w_theta.value.data(), tmp.data());
  for (int64_t i = 0; i < dx.size(); ++i) dx[i] += tmp[i];

  kernels::dense_backward_params(batch, c_, d_, db.data(), x_.data(), w_phi.grad.data(), nullptr);
  kernels::dense_backward_input(batch, c_, d_, db.data(), w_phi.value.data(), tmp.data());
  for (int64_t i = 0; i < dx.size(); ++i) dx[i] += tmp[i];

  kernels::dense_backward_params(batch, c_, d_, dg.data(), x_.data(), w_g.grad.data(), nullptr);
  kernels::dense_backward_input(batch, c_, d_, dg.data(), w_g.value.data(), tmp.data());
  for (int64_t i = 0; i < dx.size(); ++i) dx[i] += tmp[i];

  return dx;
}

void SelfAttention::collect_params(std::vector<Parameter*>& out) {
  out.push_back(&w_theta);
  out.push_back(&w_phi);
  out.push_back(&w_g);
  out.push_back(&w_alpha);
}

void SelfAttention::init(Rng& rng) {
  const double se = 1.0 / std::sqrt(static_cast<double>(c_));
  for (Parameter* p : {&w_theta, &w_phi, &w_g})
    for (int64_t i = 0; i < p->value.size(); ++i) p->value[i] = rng.uniform(-se, se);
  const double sa = 1.0 / std::sqrt(static_cast<double>(d_));
  for (int64_t i = 0; i < w_alpha.value.size(); ++i) w_alpha.value[i] = rng.uniform(-sa, sa);
}

std::pair<Tensor, AttentionTrace> attention_forward(const Tensor& x, SelfAttention& params) {
  if (x.rank() != 1 || x.dim(0) != params.feature_dim())
    throw ConfigError("attention_forward: x must be a C-vector");
  Tensor batched = x;
  batched.reshape({1, params.feature_dim()});
  Tensor out = params.forward(batched, false, nullptr);
  out.reshape({params.feature_dim()});

  const int d = params.embed_dim();
  AttentionTrace trace;
  trace.similarity = params.similarity();
  trace.similarity.reshape({d, d});
  trace.weights = params.weights();
  trace.weights.reshape({d, d});
  trace.attended = params.attended();
  trace.attended.reshape({d});
  return {std::move(out), std::move(trace)};
}

double attention_backward_check(const Tensor& x, SelfAttention& params, double perturbation) {
  if (perturbation < 1e-7 || perturbation > 1e-3)
    throw ConfigError("attention_backward_check: perturbation out of range");
  Tensor input = x;
  if (input.rank() == 1) input.reshape({1, input.dim(0)});

  // Fixed linear probe J = sum_i r_i out_i with deterministic coefficients.
  Tensor probe({input.dim(0), params.feature_dim()});
  Rng probe_rng(0x9e3779b9);
  for (int64_t i = 0; i < probe.size(); ++i) probe[i] = probe_rng.normal();

  const auto objective = [&] {
    const Tensor out = params.forward(input, false, nullptr);
    double j = 0.0;
    for (int64_t i = 0; i < out.size(); ++i) j += out[i] * probe[i];
    return j;
  };

  objective();
  for (Parameter* p : {&params.w_theta, &params.w_phi, &params.w_g, &params.w_alpha})
    p->zero_grad();
  const Tensor dx = params.backward(probe);

  double worst = 0.0;
  const auto compare = [&](double* slot, double analytic) {
    const double saved = *slot;
    *slot = saved + perturbation;
    const double jp = objective();
    *slot = saved - perturbation;
    const double jm = objective();
    *slot = saved;
    const double fd = (jp - jm) / (2.0 * perturbation);
    const double rel = std::abs(analytic - fd) / std::max(1.0, std::abs(analytic));
    worst = std::max(worst, rel);
  };

  for (int64_t i = 0; i < input.size(); ++i) compare(&input[i], dx[i]);
  for (Parameter* p : {&params.w_theta, &params.w_phi, &params.w_g, &params.w_alpha})
    for (int64_t i = 0; i < p->value.size(); ++i) compare(&p->value[i], p->grad[i]);

  // Leave the cached activations consistent with the unperturbed input.
  params.forward(input, false, nullptr);
  return worst;
}

}  // namespace attnpose
