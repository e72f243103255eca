#pragma once

// Non-local self-attention over a feature vector. The C-dim input is
// embedded three ways into d = C/n dims (theta, phi, g), an outer-product
// similarity matrix is row-softmaxed into attention weights, the attended
// d-vector is re-embedded to C dims and added back onto the input:
//
//   a = W_theta x,  b = W_phi x,  g = W_g x          (d-vectors)
//   S = a b^T                                         (d x d)
//   A = softmax_rows(S)                               (row-stochastic)
//   y = A g
//   out = W_alpha y + x
//
// All four maps are bias-free. The backward pass is analytic, including the
// softmax Jacobian.

#include <utility>
#include <vector>

#include "attnpose/layers.hpp"
#include "attnpose/tensor.hpp"

namespace attnpose {

// Intermediates of a single-sample forward, kept for diagnostics.
struct AttentionTrace {
  Tensor similarity;  // [d, d] pre-softmax scores
  Tensor weights;     // [d, d] row-stochastic
  Tensor attended;    // [d]    y, before re-embedding
};

// The attention block as a network layer over [batch, C] tensors.
class SelfAttention : public Layer {
public:
  // `ratio` is the downsampling factor n; C must be divisible by it.
  SelfAttention(std::string name, int feature_dim, int ratio);

  int feature_dim() const { return c_; }
  int embed_dim() const { return d_; }

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Parameter*>& out) override;
  void init(Rng& rng) override;

  // Trace of the most recent forward, batched.
  const Tensor& similarity() const { return s_; }
  const Tensor& weights() const { return a_soft_; }
  const Tensor& attended() const { return y_; }

  Parameter w_theta;  // [d, C]
  Parameter w_phi;    // [d, C]
  Parameter w_g;      // [d, C]
  Parameter w_alpha;  // [C, d]

private:
  int c_;
  int d_;
  Tensor x_;
  Tensor a_, b_, g_;  // [batch, d] embeddings
  Tensor s_;          // [batch, d, d] similarities
  Tensor a_soft_;     // [batch, d, d] attention weights
  Tensor y_;          // [batch, d]
};

// Single-vector convenience wrapper: runs one feature vector through the
// block and returns the output plus the populated trace.
std::pair<Tensor, AttentionTrace> attention_forward(const Tensor& x, SelfAttention& params);

// Gradient validation harness: compares the analytic gradients of a fixed
// linear probe of the block output (w.r.t. x and all four weight matrices)
// against central finite differences with step `perturbation`, and returns
// the maximum relative discrepancy.
double attention_backward_check(const Tensor& x, SelfAttention& params, double perturbation);

}  // namespace attnpose
