#pragma once

// The single-image pose network: visual encoder -> self-attention ->
// regressor. Two backbones share the interface: a 34-layer residual encoder
// for full-scale runs and an 8-layer one for desk-scale experiments. The
// regressor is a shared hidden layer with two 3-dim heads, position and
// log-quaternion; the unit quaternion is recovered via the exp map.

#include <memory>
#include <string>
#include <vector>

#include "attnpose/attention.hpp"
#include "attnpose/geometry.hpp"
#include "attnpose/layers.hpp"
#include "attnpose/tensor.hpp"

namespace attnpose {

enum class Backbone { kResidual34, kTinyResidual };

Backbone backbone_from_string(const std::string& s);
std::string to_string(Backbone b);

struct EncoderConfig {
  Backbone backbone = Backbone::kResidual34;
  int feature_dim = 2048;   // C
  int attention_ratio = 8;  // n; feature_dim must be divisible by it
  bool use_attention = true;
  bool pretrained = false;
  double dropout_rate = 0.5;
};

struct PoseNetworkOutput {
  Vec3 p;
  Vec3 logq;
  UnitQuaternion q;  // canonicalize(quat_exp(logq))
};

// Batched regression result; `p` and `logq` are [batch, 3].
struct BatchPoseOutput {
  Tensor p;
  Tensor logq;

  int batch() const { return p.empty() ? 0 : p.dim(0); }
  PoseNetworkOutput item(int i) const;
};

class PoseNetwork {
public:
  explicit PoseNetwork(const EncoderConfig& cfg);

  void init(Rng& rng);

  // images: [batch, 3, H, W], values in [-1, 1].
  Tensor encode(const Tensor& images, bool training, Rng* rng);
  BatchPoseOutput regress_pose(const Tensor& features, bool training, Rng* rng);
  BatchPoseOutput forward(const Tensor& images, bool training, Rng* rng);

  // Backpropagates [batch, 3] gradients for both heads through the whole
  // network; parameter gradients accumulate, returns d(loss)/d(images).
  Tensor backward(const Tensor& dp, const Tensor& dlogq);

  std::vector<Parameter*> params();
  void zero_grad();
  int64_t param_count();

  const EncoderConfig& config() const { return cfg_; }
  SelfAttention& attention() { return *attention_; }

  // Feature vectors around the attention block from the latest forward.
  const Tensor& features_pre_attention() const { return feat_pre_; }
  const Tensor& features_post_attention() const { return feat_post_; }

private:
  EncoderConfig cfg_;
  Sequential encoder_;
  std::unique_ptr<SelfAttention> attention_;
  Sequential trunk_;  // shared regressor body
  Dense head_p_;
  Dense head_q_;
  Tensor feat_pre_;
  Tensor feat_post_;
};

}  // namespace attnpose
