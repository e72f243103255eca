#include "attnpose/layers.hpp"

#include <cmath>

#include "attnpose/errors.hpp"

namespace attnpose {

namespace {

void require_rank(const Tensor& t, int rank, const char* who) {
  if (t.rank() != rank)
    throw ShapeError(std::string(who) + ": expected rank " + std::to_string(rank) + ", got " +
                     std::to_string(t.rank()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Dense::Dense(std::string name, int in_dim, int out_dim, bool bias)
    : w(name + ".w", {out_dim, in_dim}),
      b(bias ? Parameter(name + ".b", {out_dim}) : Parameter()),
      in_dim_(in_dim),
      out_dim_(out_dim),
      has_bias_(bias) {}

Tensor Dense::forward(const Tensor& x, bool, Rng*) {
  require_rank(x, 2, "Dense");
  if (x.dim(1) != in_dim_) throw ShapeError("Dense: input width mismatch");
  x_ = x;
  Tensor y({x.dim(0), out_dim_});
  kernels::dense_forward(x.dim(0), in_dim_, out_dim_, x.data(), w.value.data(),
                         has_bias_ ? b.value.data() : nullptr, y.data());
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  const int batch = x_.dim(0);
  kernels::dense_backward_params(batch, in_dim_, out_dim_, dy.data(), x_.data(), w.grad.data(),
                                 has_bias_ ? b.grad.data() : nullptr);
  Tensor dx({batch, in_dim_});
  kernels::dense_backward_input(batch, in_dim_, out_dim_, dy.data(), w.value.data(), dx.data());
  return dx;
}

void Dense::collect_params(std::vector<Parameter*>& out) {
  out.push_back(&w);
  if (has_bias_) out.push_back(&b);
}

void Dense::init(Rng& rng) {
  const double scale = std::sqrt(2.0 / in_dim_);
  for (int64_t i = 0; i < w.value.size(); ++i) w.value[i] = scale * rng.normal();
  if (has_bias_) b.value.fill(0.0);
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad)
    : w(name + ".w", {out_ch, in_ch, kernel, kernel}),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad) {}

Tensor Conv2d::forward(const Tensor& x, bool, Rng*) {
  require_rank(x, 4, "Conv2d");
  if (x.dim(1) != in_ch_) throw ShapeError("Conv2d: channel mismatch");
  x_ = x;
  shape_ = {x.dim(0), in_ch_, x.dim(2), x.dim(3), out_ch_, kernel_, stride_, pad_};
  if (shape_.out_h() <= 0 || shape_.out_w() <= 0)
    throw ShapeError("Conv2d: input smaller than receptive field");
  Tensor y({shape_.batch, out_ch_, shape_.out_h(), shape_.out_w()});
  kernels::conv2d_forward(shape_, x.data(), w.value.data(), y.data());
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  kernels::conv2d_backward_weights(shape_, dy.data(), x_.data(), w.grad.data());
  Tensor dx(x_.shape());
  kernels::conv2d_backward_input(shape_, dy.data(), w.value.data(), dx.data());
  return dx;
}

void Conv2d::collect_params(std::vector<Parameter*>& out) { out.push_back(&w); }

void Conv2d::init(Rng& rng) {
  const double scale = std::sqrt(2.0 / (in_ch_ * kernel_ * kernel_));
  for (int64_t i = 0; i < w.value.size(); ++i) w.value[i] = scale * rng.normal();
}

// ---------------------------------------------------------------------------
// GroupNorm
// ---------------------------------------------------------------------------

GroupNorm::GroupNorm(std::string name, int ch, int groups, double eps)
    : gamma(name + ".gamma", {ch}), beta(name + ".beta", {ch}), ch_(ch), groups_(groups), eps_(eps) {
  if (ch % groups != 0) throw ConfigError("GroupNorm: channels not divisible by groups");
}

Tensor GroupNorm::forward(const Tensor& x, bool, Rng*) {
  if (x.rank() != 2 && x.rank() != 4) throw ShapeError("GroupNorm: expected rank 2 or 4");
  if (x.dim(1) != ch_) throw ShapeError("GroupNorm: channel mismatch");
  x_ = x;
  hw_ = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  const int batch = x.dim(0);
  mean_ = Tensor({batch, groups_});
  inv_std_ = Tensor({batch, groups_});
  Tensor y(x.shape());
  kernels::groupnorm_forward(batch, ch_, hw_, groups_, eps_, x.data(), gamma.value.data(),
                             beta.value.data(), y.data(), mean_.data(), inv_std_.data());
  return y;
}

Tensor GroupNorm::backward(const Tensor& dy) {
  Tensor dx(x_.shape());
  kernels::groupnorm_backward(x_.dim(0), ch_, hw_, groups_, x_.data(), gamma.value.data(),
                              mean_.data(), inv_std_.data(), dy.data(), dx.data(),
                              gamma.grad.data(), beta.grad.data());
  return dx;
}

void GroupNorm::collect_params(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

void GroupNorm::init(Rng&) {
  gamma.value.fill(1.0);
  beta.value.fill(0.0);
}

// ---------------------------------------------------------------------------
// ReLU / pooling / dropout
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool, Rng*) {
  x_ = x;
  Tensor y(x.shape());
  kernels::relu_forward(x.size(), x.data(), y.data());
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx(x_.shape());
  kernels::relu_backward(x_.size(), x_.data(), dy.data(), dx.data());
  return dx;
}

MaxPool2d::MaxPool2d(int kernel, int stride, int pad) : kernel_(kernel), stride_(stride), pad_(pad) {}

Tensor MaxPool2d::forward(const Tensor& x, bool, Rng*) {
  require_rank(x, 4, "MaxPool2d");
  in_shape_ = x.shape();
  const kernels::Conv2dShape s{x.dim(0), x.dim(1), x.dim(2), x.dim(3),
                               x.dim(1), kernel_,  stride_,  pad_};
  Tensor y({x.dim(0), x.dim(1), s.out_h(), s.out_w()});
  argmax_.assign(static_cast<size_t>(y.size()), -1);
  kernels::maxpool_forward(x.dim(0), x.dim(1), x.dim(2), x.dim(3), kernel_, stride_, pad_,
                           x.data(), y.data(), argmax_.data());
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  Tensor dx(in_shape_);
  kernels::maxpool_backward(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3], kernel_,
                            stride_, pad_, dy.data(), argmax_.data(), dx.data());
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool, Rng*) {
  require_rank(x, 4, "GlobalAvgPool");
  in_shape_ = x.shape();
  Tensor y({x.dim(0), x.dim(1)});
  kernels::global_avgpool_forward(x.dim(0), x.dim(1), x.dim(2) * x.dim(3), x.data(), y.data());
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  Tensor dx(in_shape_);
  kernels::global_avgpool_backward(in_shape_[0], in_shape_[1], in_shape_[2] * in_shape_[3],
                                   dy.data(), dx.data());
  return dx;
}

Dropout::Dropout(double rate) : rate_(rate) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("Dropout: rate must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, bool training, Rng* rng) {
  active_ = training && rate_ > 0.0;
  if (!active_) return x;
  if (rng == nullptr) throw ConfigError("Dropout: training forward needs an rng");
  mask_ = Tensor(x.shape());
  const double keep = 1.0 - rate_;
  const double scale = 1.0 / keep;
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    mask_[i] = rng->uniform() < keep ? scale : 0.0;
    y[i] = x[i] * mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& dy) {
  if (!active_) return dy;
  Tensor dx(dy.shape());
  for (int64_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask_[i];
  return dx;
}

// ---------------------------------------------------------------------------
// Sequential
// ---------------------------------------------------------------------------

Tensor Sequential::forward(const Tensor& x, bool training, Rng* rng) {
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h, training, rng);
  return h;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::collect_params(std::vector<Parameter*>& out) {
  for (auto& layer : layers_) layer->collect_params(out);
}

void Sequential::init(Rng& rng) {
  for (auto& layer : layers_) layer->init(rng);
}

// ---------------------------------------------------------------------------
// ResidualBlock
// ---------------------------------------------------------------------------

namespace {
int norm_groups(int ch) {
  for (int g : {8, 4, 2}) {
    if (ch % g == 0) return g;
  }
  return 1;
}
}  // namespace

ResidualBlock::ResidualBlock(std::string name, int in_ch, int out_ch, int stride)
    : conv1_(name + ".conv1", in_ch, out_ch, 3, stride, 1),
      norm1_(name + ".norm1", out_ch, norm_groups(out_ch)),
      conv2_(name + ".conv2", out_ch, out_ch, 3, 1, 1),
      norm2_(name + ".norm2", out_ch, norm_groups(out_ch)) {
  if (stride != 1 || in_ch != out_ch) {
    proj_ = std::make_unique<Conv2d>(name + ".proj", in_ch, out_ch, 1, stride, 0);
    proj_norm_ = std::make_unique<GroupNorm>(name + ".proj_norm", out_ch, norm_groups(out_ch));
  }
}

Tensor ResidualBlock::forward(const Tensor& x, bool training, Rng* rng) {
  Tensor h = conv1_.forward(x, training, rng);
  h = norm1_.forward(h, training, rng);
  h = relu1_.forward(h, training, rng);
  h = conv2_.forward(h, training, rng);
  h = norm2_.forward(h, training, rng);

  Tensor skip = x;
  if (proj_) {
    skip = proj_->forward(x, training, rng);
    skip = proj_norm_->forward(skip, training, rng);
  }
  if (!h.same_shape(skip)) throw ShapeError("ResidualBlock: skip/main shape mismatch");

  sum_ = Tensor(h.shape());
  for (int64_t i = 0; i < h.size(); ++i) sum_[i] = h[i] + skip[i];
  Tensor y(sum_.shape());
  kernels::relu_forward(sum_.size(), sum_.data(), y.data());
  return y;
}

Tensor ResidualBlock::backward(const Tensor& dy) {
  Tensor dsum(sum_.shape());
  kernels::relu_backward(sum_.size(), sum_.data(), dy.data(), dsum.data());

  Tensor dmain = norm2_.backward(dsum);
  dmain = conv2_.backward(dmain);
  dmain = relu1_.backward(dmain);
  dmain = norm1_.backward(dmain);
  dmain = conv1_.backward(dmain);

  Tensor dskip = dsum;
  if (proj_) {
    dskip = proj_norm_->backward(dskip);
    dskip = proj_->backward(dskip);
  }
  for (int64_t i = 0; i < dmain.size(); ++i) dmain[i] += dskip[i];
  return dmain;
}

void ResidualBlock::collect_params(std::vector<Parameter*>& out) {
  conv1_.collect_params(out);
  norm1_.collect_params(out);
  conv2_.collect_params(out);
  norm2_.collect_params(out);
  if (proj_) {
    proj_->collect_params(out);
    proj_norm_->collect_params(out);
  }
}

void ResidualBlock::init(Rng& rng) {
  conv1_.init(rng);
  norm1_.init(rng);
  conv2_.init(rng);
  norm2_.init(rng);
  if (proj_) {
    proj_->init(rng);
    proj_norm_->init(rng);
  }
}

}  // namespace attnpose
