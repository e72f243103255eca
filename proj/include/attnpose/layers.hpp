#pragma once

// Network building blocks in the explicit forward/backward style: each layer
// caches what its backward pass needs, parameter gradients accumulate until
// zero_grad(). No tape, no graph; composition order is the backward order
// reversed. All math runs through the kernels:: dispatch layer.

#include <memory>
#include <string>
#include <vector>

#include "attnpose/kernels.hpp"
#include "attnpose/rng.hpp"
#include "attnpose/tensor.hpp"

namespace attnpose {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string name_, std::vector<int> shape)
      : name(std::move(name_)), value(shape), grad(std::move(shape)) {}

  void zero_grad() { grad.fill(0.0); }
};

class Layer {
public:
  virtual ~Layer() = default;

  // `rng` feeds stochastic layers (dropout); deterministic layers ignore it.
  virtual Tensor forward(const Tensor& x, bool training, Rng* rng) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(std::vector<Parameter*>& out) {}
  virtual void init(Rng& rng) {}
};

// Fully connected layer on [batch, in] tensors.
class Dense : public Layer {
public:
  Dense(std::string name, int in_dim, int out_dim, bool bias = true);

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Parameter*>& out) override;
  void init(Rng& rng) override;

  Parameter w;
  Parameter b;

private:
  int in_dim_;
  int out_dim_;
  bool has_bias_;
  Tensor x_;
};

// 3x3/7x7-style convolution on [batch, ch, h, w]; no bias (a norm layer
// always follows).
class Conv2d : public Layer {
public:
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad);

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Parameter*>& out) override;
  void init(Rng& rng) override;

  Parameter w;

private:
  int in_ch_, out_ch_, kernel_, stride_, pad_;
  Tensor x_;
  kernels::Conv2dShape shape_;
};

// Group normalization over [batch, ch, h, w] (or [batch, ch]); statistics are
// per sample, so training and evaluation behave identically.
class GroupNorm : public Layer {
public:
  GroupNorm(std::string name, int ch, int groups, double eps = 1e-5);

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Parameter*>& out) override;
  void init(Rng& rng) override;

  Parameter gamma;
  Parameter beta;

private:
  int ch_, groups_;
  double eps_;
  Tensor x_;
  Tensor mean_, inv_std_;
  int hw_ = 1;
};

class ReLU : public Layer {
public:
  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

private:
  Tensor x_;
};

class MaxPool2d : public Layer {
public:
  MaxPool2d(int kernel, int stride, int pad);

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

private:
  int kernel_, stride_, pad_;
  std::vector<int> in_shape_;
  std::vector<int32_t> argmax_;
};

// [batch, ch, h, w] -> [batch, ch].
class GlobalAvgPool : public Layer {
public:
  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

private:
  std::vector<int> in_shape_;
};

// Inverted dropout: active only in training mode, identity otherwise.
class Dropout : public Layer {
public:
  explicit Dropout(double rate);

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;

private:
  double rate_;
  Tensor mask_;
  bool active_ = false;
};

class Sequential : public Layer {
public:
  template <class T, class... Args>
  T* add(Args&&... args) {
    auto layer = std::make_unique<T>(std::forward<Args>(args)...);
    T* raw = layer.get();
    layers_.push_back(std::move(layer));
    return raw;
  }

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Parameter*>& out) override;
  void init(Rng& rng) override;

private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Two 3x3 conv + norm stages with an additive skip; when `stride` is 2 or
// the channel count changes, the skip goes through a 1x1 projection.
class ResidualBlock : public Layer {
public:
  ResidualBlock(std::string name, int in_ch, int out_ch, int stride);

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Parameter*>& out) override;
  void init(Rng& rng) override;

private:
  Conv2d conv1_;
  GroupNorm norm1_;
  ReLU relu1_;
  Conv2d conv2_;
  GroupNorm norm2_;
  std::unique_ptr<Conv2d> proj_;
  std::unique_ptr<GroupNorm> proj_norm_;
  Tensor sum_;
};

}  // namespace attnpose
