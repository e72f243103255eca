#include "attnpose/loss.hpp"

#include <cmath>

#include "attnpose/errors.hpp"

namespace attnpose {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_finite(const PoseNetworkOutput& pred, const Pose& target, const LossState& state) {
  if (!pred.p.finite() || !pred.logq.finite() || !target.p.finite() ||
      !std::isfinite(state.beta) || !std::isfinite(state.gamma))
    throw NumericError("loss: non-finite input");
}

}  // namespace

double single_image_loss(const PoseNetworkOutput& pred, const Pose& target,
                         const LossState& state) {
  require_finite(pred, target, state);
  const double dp = (target.p - pred.p).l1_norm();
  const double dq = (quat_log(target.q).w - pred.logq).l1_norm();
  return dp * std::exp(-state.beta) + state.beta + dq * std::exp(-state.gamma) + state.gamma;
}

double loss_grad_beta(const PoseNetworkOutput& pred, const Pose& target, const LossState& state) {
  require_finite(pred, target, state);
  const double dp = (target.p - pred.p).l1_norm();
  return -dp * std::exp(-state.beta) + 1.0;
}

double loss_grad_gamma(const PoseNetworkOutput& pred, const Pose& target, const LossState& state) {
  require_finite(pred, target, state);
  const double dq = (quat_log(target.q).w - pred.logq).l1_norm();
  return -dq * std::exp(-state.gamma) + 1.0;
}

double temporal_loss(const std::vector<PoseNetworkOutput>& preds, const std::vector<Pose>& targets,
                     const LossState& state, const TemporalConfig& cfg) {
  if (preds.size() != targets.size())
    throw ConfigError("temporal_loss: preds/targets length mismatch");
  if (preds.empty()) throw ConfigError("temporal_loss: empty tuple");

  double total = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) total += single_image_loss(preds[i], targets[i], state);

  const double eb = std::exp(-state.beta);
  const double eg = std::exp(-state.gamma);
  std::vector<Vec3> tlog(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) tlog[i] = quat_log(targets[i].q).w;

  for (size_t i = 0; i < preds.size(); ++i) {
    for (size_t j = 0; j < preds.size(); ++j) {
      if (i == j) continue;
      const Vec3 rp = (targets[i].p - targets[j].p) - (preds[i].p - preds[j].p);
      const Vec3 rq = (tlog[i] - tlog[j]) - (preds[i].logq - preds[j].logq);
      total += cfg.temporal_alpha *
               (rp.l1_norm() * eb + state.beta + rq.l1_norm() * eg + state.gamma);
    }
  }
  return total;
}

LossGrads batch_loss(const BatchPoseOutput& pred, const std::vector<Pose>& targets,
                     const LossState& state) {
  const int batch = pred.batch();
  if (batch != static_cast<int>(targets.size()))
    throw ConfigError("batch_loss: preds/targets length mismatch");
  if (batch == 0) throw ConfigError("batch_loss: empty batch");

  LossGrads out;
  out.dp = Tensor({batch, 3});
  out.dlogq = Tensor({batch, 3});
  const double eb = std::exp(-state.beta);
  const double eg = std::exp(-state.gamma);
  const double inv_n = 1.0 / batch;

  for (int i = 0; i < batch; ++i) {
    const PoseNetworkOutput item = pred.item(i);
    out.value += single_image_loss(item, targets[i], state) * inv_n;
    const Vec3 rp = targets[i].p - item.p;
    const Vec3 rq = quat_log(targets[i].q).w - item.logq;
    out.dp.at(i, 0) = -sign(rp.x) * eb * inv_n;
    out.dp.at(i, 1) = -sign(rp.y) * eb * inv_n;
    out.dp.at(i, 2) = -sign(rp.z) * eb * inv_n;
    out.dlogq.at(i, 0) = -sign(rq.x) * eg * inv_n;
    out.dlogq.at(i, 1) = -sign(rq.y) * eg * inv_n;
    out.dlogq.at(i, 2) = -sign(rq.z) * eg * inv_n;
    out.dbeta += (-rp.l1_norm() * eb + 1.0) * inv_n;
    out.dgamma += (-rq.l1_norm() * eg + 1.0) * inv_n;
  }
  return out;
}

LossGrads temporal_batch_loss(const BatchPoseOutput& pred, const std::vector<Pose>& targets,
                              int tuple_size, const LossState& state, const TemporalConfig& cfg) {
  const int batch = pred.batch();
  if (batch != static_cast<int>(targets.size()))
    throw ConfigError("temporal_batch_loss: preds/targets length mismatch");
  if (tuple_size < 1 || batch % tuple_size != 0)
    throw ConfigError("temporal_batch_loss: batch is not a whole number of tuples");

  const int tuples = batch / tuple_size;
  LossGrads out;
  out.dp = Tensor({batch, 3});
  out.dlogq = Tensor({batch, 3});
  const double eb = std::exp(-state.beta);
  const double eg = std::exp(-state.gamma);
  const double inv_t = 1.0 / tuples;

  std::vector<PoseNetworkOutput> items(static_cast<size_t>(batch));
  std::vector<Vec3> tlog(static_cast<size_t>(batch));
  for (int i = 0; i < batch; ++i) {
    items[i] = pred.item(i);
    tlog[i] = quat_log(targets[i].q).w;
  }

  for (int t = 0; t < tuples; ++t) {
    const int base = t * tuple_size;
    for (int i = 0; i < tuple_size; ++i) {
      const int gi = base + i;
      out.value += single_image_loss(items[gi], targets[gi], state) * inv_t;
      const Vec3 rp = targets[gi].p - items[gi].p;
      const Vec3 rq = tlog[gi] - items[gi].logq;
      out.dp.at(gi, 0) += -sign(rp.x) * eb * inv_t;
      out.dp.at(gi, 1) += -sign(rp.y) * eb * inv_t;
      out.dp.at(gi, 2) += -sign(rp.z) * eb * inv_t;
      out.dlogq.at(gi, 0) += -sign(rq.x) * eg * inv_t;
      out.dlogq.at(gi, 1) += -sign(rq.y) * eg * inv_t;
      out.dlogq.at(gi, 2) += -sign(rq.z) * eg * inv_t;
      out.dbeta += (-rp.l1_norm() * eb + 1.0) * inv_t;
      out.dgamma += (-rq.l1_norm() * eg + 1.0) * inv_t;
    }
    for (int i = 0; i < tuple_size; ++i) {
      for (int j = 0; j < tuple_size; ++j) {
        if (i == j) continue;
        const int gi = base + i, gj = base + j;
        const Vec3 rp =
            (targets[gi].p - targets[gj].p) - (items[gi].p - items[gj].p);
        const Vec3 rq = (tlog[gi] - tlog[gj]) - (items[gi].logq - items[gj].logq);
        out.value += cfg.temporal_alpha *
                     (rp.l1_norm() * eb + state.beta + rq.l1_norm() * eg + state.gamma) * inv_t;
        const double wp = cfg.temporal_alpha * eb * inv_t;
        const double wq = cfg.temporal_alpha * eg * inv_t;
        // d residual / d pred_i = -1, d residual / d pred_j = +1.
        out.dp.at(gi, 0) += -sign(rp.x) * wp;
        out.dp.at(gi, 1) += -sign(rp.y) * wp;
        out.dp.at(gi, 2) += -sign(rp.z) * wp;
        out.dp.at(gj, 0) += sign(rp.x) * wp;
        out.dp.at(gj, 1) += sign(rp.y) * wp;
        out.dp.at(gj, 2) += sign(rp.z) * wp;
        out.dlogq.at(gi, 0) += -sign(rq.x) * wq;
        out.dlogq.at(gi, 1) += -sign(rq.y) * wq;
        out.dlogq.at(gi, 2) += -sign(rq.z) * wq;
        out.dlogq.at(gj, 0) += sign(rq.x) * wq;
        out.dlogq.at(gj, 1) += sign(rq.y) * wq;
        out.dlogq.at(gj, 2) += sign(rq.z) * wq;
        out.dbeta += cfg.temporal_alpha * (-rp.l1_norm() * eb + 1.0) * inv_t;
        out.dgamma += cfg.temporal_alpha * (-rq.l1_norm() * eg + 1.0) * inv_t;
      }
    }
  }
  return out;
}

}  // namespace attnpose
