#include "attnpose/model.hpp"

#include "attnpose/errors.hpp"

namespace attnpose {

Backbone backbone_from_string(const std::string& s) {
  if (s == "residual-34") return Backbone::kResidual34;
  if (s == "tiny-residual") return Backbone::kTinyResidual;
  throw ConfigError("unknown backbone '" + s + "' (expected residual-34 or tiny-residual)");
}

std::string to_string(Backbone b) {
  return b == Backbone::kResidual34 ? "residual-34" : "tiny-residual";
}

PoseNetworkOutput BatchPoseOutput::item(int i) const {
  PoseNetworkOutput out;
  out.p = {p.at(i, 0), p.at(i, 1), p.at(i, 2)};
  out.logq = {logq.at(i, 0), logq.at(i, 1), logq.at(i, 2)};
  out.q = canonicalize(quat_exp(LogQuaternion{out.logq}));
  return out;
}

namespace {

void build_residual34(Sequential& enc, int feature_dim) {
  enc.add<Conv2d>("enc.stem", 3, 64, 7, 2, 3);
  enc.add<GroupNorm>("enc.stem_norm", 64, 8);
  enc.add<ReLU>();
  enc.add<MaxPool2d>(3, 2, 1);
  const int stage_blocks[4] = {3, 4, 6, 3};
  const int stage_ch[4] = {64, 128, 256, 512};
  int ch = 64;
  for (int s = 0; s < 4; ++s) {
    for (int i = 0; i < stage_blocks[s]; ++i) {
      const int stride = (s > 0 && i == 0) ? 2 : 1;
      enc.add<ResidualBlock>("enc.s" + std::to_string(s) + "b" + std::to_string(i), ch,
                             stage_ch[s], stride);
      ch = stage_ch[s];
    }
  }
  enc.add<GlobalAvgPool>();
  enc.add<Dense>("enc.fc", 512, feature_dim);
  enc.add<ReLU>();
}

void build_tiny_residual(Sequential& enc, int feature_dim) {
  enc.add<Conv2d>("enc.stem", 3, 16, 3, 2, 1);
  enc.add<GroupNorm>("enc.stem_norm", 16, 4);
  enc.add<ReLU>();
  enc.add<ResidualBlock>("enc.b0", 16, 16, 1);
  enc.add<ResidualBlock>("enc.b1", 16, 32, 2);
  enc.add<ResidualBlock>("enc.b2", 32, 64, 2);
  enc.add<GlobalAvgPool>();
  enc.add<Dense>("enc.fc", 64, feature_dim);
  enc.add<ReLU>();
}

}  // namespace

PoseNetwork::PoseNetwork(const EncoderConfig& cfg)
    : cfg_(cfg),
      head_p_("reg.head_p", cfg.feature_dim / 2, 3),
      head_q_("reg.head_q", cfg.feature_dim / 2, 3) {
  if (cfg.feature_dim <= 0 || cfg.feature_dim % cfg.attention_ratio != 0)
    throw ConfigError("feature_dim must be a positive multiple of attention_ratio");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0)
    throw ConfigError("dropout_rate must be in [0, 1)");
  if (cfg.pretrained)
    throw ConfigError(
        "pretrained initialization needs a source checkpoint; pass one via resume/init options");

  if (cfg.backbone == Backbone::kResidual34)
    build_residual34(encoder_, cfg.feature_dim);
  else
    build_tiny_residual(encoder_, cfg.feature_dim);

  attention_ = std::make_unique<SelfAttention>("att", cfg.feature_dim, cfg.attention_ratio);

  trunk_.add<Dense>("reg.fc", cfg.feature_dim, cfg.feature_dim / 2);
  trunk_.add<ReLU>();
  trunk_.add<Dropout>(cfg.dropout_rate);
}

void PoseNetwork::init(Rng& rng) {
  encoder_.init(rng);
  attention_->init(rng);
  trunk_.init(rng);
  head_p_.init(rng);
  head_q_.init(rng);
}

Tensor PoseNetwork::encode(const Tensor& images, bool training, Rng* rng) {
  if (images.rank() != 4 || images.dim(1) != 3)
    throw ShapeError("encode: expected [batch, 3, H, W] input");
  return encoder_.forward(images, training, rng);
}

BatchPoseOutput PoseNetwork::regress_pose(const Tensor& features, bool training, Rng* rng) {
  feat_pre_ = features;
  feat_post_ = cfg_.use_attention ? attention_->forward(features, training, rng) : features;
  const Tensor hidden = trunk_.forward(feat_post_, training, rng);
  BatchPoseOutput out;
  out.p = head_p_.forward(hidden, training, rng);
  out.logq = head_q_.forward(hidden, training, rng);
  return out;
}

BatchPoseOutput PoseNetwork::forward(const Tensor& images, bool training, Rng* rng) {
  return regress_pose(encode(images, training, rng), training, rng);
}

Tensor PoseNetwork::backward(const Tensor& dp, const Tensor& dlogq) {
  Tensor dhidden = head_p_.backward(dp);
  const Tensor dhidden_q = head_q_.backward(dlogq);
  for (int64_t i = 0; i < dhidden.size(); ++i) dhidden[i] += dhidden_q[i];
  Tensor dfeat = trunk_.backward(dhidden);
  if (cfg_.use_attention) dfeat = attention_->backward(dfeat);
  return encoder_.backward(dfeat);
}

std::vector<Parameter*> PoseNetwork::params() {
  std::vector<Parameter*> out;
  encoder_.collect_params(out);
  attention_->collect_params(out);
  trunk_.collect_params(out);
  head_p_.collect_params(out);
  head_q_.collect_params(out);
  return out;
}

void PoseNetwork::zero_grad() {
  for (Parameter* p : params()) p->zero_grad();
}

int64_t PoseNetwork::param_count() {
  int64_t n = 0;
  for (Parameter* p : params()) n += p->value.size();
  return n;
}

}  // namespace attnpose
