#pragma once

// Learnable-weight pose regression loss and its temporal-constraint variant.
//
// Single image:
//   L = ||p - p_hat||_1 e^(-beta) + beta + ||logq - logq_hat||_1 e^(-gamma) + gamma
// with beta, gamma trained alongside the network (initial values 0.0, -3.0).
//
// Temporal tuples add, with weight alpha, the same form applied to relative
// residuals over all ordered pairs (i != j) of the tuple:
//   position residual  (p_i - p_j) - (p_hat_i - p_hat_j)
//   rotation residual  (logq_i - logq_j) - (logq_hat_i - logq_hat_j)
// sharing one beta/gamma pair with the single-image terms.

#include <vector>

#include "attnpose/geometry.hpp"
#include "attnpose/model.hpp"
#include "attnpose/tensor.hpp"

namespace attnpose {

struct LossState {
  double beta = 0.0;
  double gamma = -3.0;
};

struct TemporalConfig {
  double temporal_alpha = 1.0;
  int frame_spacing = 10;  // s: tuple indices are (i, i+s, i+2s)
  bool triplet = true;
};

double single_image_loss(const PoseNetworkOutput& pred, const Pose& target,
                         const LossState& state);

// Analytic d(single_image_loss)/d(beta) = -||dp||_1 e^(-beta) + 1.
double loss_grad_beta(const PoseNetworkOutput& pred, const Pose& target, const LossState& state);
// Analytic d(single_image_loss)/d(gamma), same shape in the rotation term.
double loss_grad_gamma(const PoseNetworkOutput& pred, const Pose& target, const LossState& state);

double temporal_loss(const std::vector<PoseNetworkOutput>& preds, const std::vector<Pose>& targets,
                     const LossState& state, const TemporalConfig& cfg);

// Batched training objective: mean of single_image_loss over the batch, with
// gradients for both heads and the two loss weights.
struct LossGrads {
  double value = 0.0;
  Tensor dp;      // [batch, 3]
  Tensor dlogq;   // [batch, 3]
  double dbeta = 0.0;
  double dgamma = 0.0;
};

LossGrads batch_loss(const BatchPoseOutput& pred, const std::vector<Pose>& targets,
                     const LossState& state);

// Batched temporal objective over consecutive tuples: the batch holds
// batch/tuple_size tuples back to back; value is the mean of temporal_loss
// over tuples.
LossGrads temporal_batch_loss(const BatchPoseOutput& pred, const std::vector<Pose>& targets,
                              int tuple_size, const LossState& state, const TemporalConfig& cfg);

}  // namespace attnpose
