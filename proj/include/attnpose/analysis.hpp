#pragma once

// Model diagnostics. Everything here is read-only with respect to the
// network weights: gradients may be scratched over, values never change.

#include <string>
#include <vector>

#include "attnpose/geometry.hpp"
#include "attnpose/model.hpp"
#include "attnpose/tensor.hpp"

namespace attnpose {

// Gradient magnitude of the summed absolute pose outputs with respect to the
// input pixels, reduced over channels by max absolute value and normalized
// so the peak is 1 (an all-zero map stays all-zero). image is [3, H, W],
// the result [H, W].
Tensor saliency_map(PoseNetwork& model, const Tensor& image);

// "H W" header line, then H rows of W values.
std::string saliency_to_text(const Tensor& map);

// L2 distance from each frame's feature vector to the anchor frame's, by
// default taken after the attention block; `pre_attention` switches to the
// encoder output before it. The anchor's own distance is exactly zero.
std::vector<double> feature_distances(PoseNetwork& model, const std::vector<Tensor>& frames,
                                      int anchor, bool pre_attention = false);

// Top-down (x, y) overlay of both trajectories as an SVG: ground truth in
// black, prediction in red, a circular marker on the ground-truth start.
void trajectory_plot(const std::vector<Vec3>& ground_truth, const std::vector<Vec3>& prediction,
                     const std::string& path);

// FNV-1a over every parameter value byte; lets callers assert that an
// operation left the weights untouched.
uint64_t weights_fingerprint(PoseNetwork& model);

}  // namespace attnpose
