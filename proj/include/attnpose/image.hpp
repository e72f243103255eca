#pragma once

// 8-bit RGB images and the preprocessing primitives on top of them: PNG and
// PPM I/O, bilinear rescaling, color jitter, cropping, and conversion to the
// [-1, 1] network input tensor.

#include <cstdint>
#include <string>
#include <vector>

#include "attnpose/rng.hpp"
#include "attnpose/tensor.hpp"

namespace attnpose {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // interleaved RGB, row-major

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

// PNG (any 8-bit colortype, converted to RGB) or binary PPM, by extension.
Image read_image(const std::string& path);
void write_image(const Image& img, const std::string& path);

Image resize_bilinear(const Image& img, int out_w, int out_h);

// Scales so the shorter side equals `target`; the longer side rounds down.
Image rescale_short_side(const Image& img, int target);

Image crop(const Image& img, int x0, int y0, int w, int h);

struct JitterConfig {
  bool enabled = false;
  double brightness = 0.7;
  double contrast = 0.7;
  double saturation = 0.7;
  double hue = 0.5;  // fraction of the full hue circle
};

// Random photometric distortion, applied in place; draws factors from `rng`
// in the order brightness, contrast, saturation, hue.
void color_jitter(Image& img, const JitterConfig& cfg, Rng& rng);

// Linear map of a [0, 255] intensity to [-1, 1]; 127.5 maps to exactly 0.
double normalize_intensity(double v);

// [3, H, W] tensor of normalized intensities, channel-planar.
Tensor to_input_tensor(const Image& img);

}  // namespace attnpose
