#include "attnpose/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "attnpose/errors.hpp"

namespace attnpose {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

bool has_suffix(const std::string& s, const char* suffix) {
  size_t n = strlen(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

Image read_png(const std::string& path) {
  FilePtr f(fopen(path.c_str(), "rb"));
  if (!f) throw IngestionError("cannot open image: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IngestionError("png reader allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IngestionError("png reader allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestionError("malformed png: " + path);
  }

  png_init_io(png, f.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  // Normalize every input variant to 8-bit RGB.
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Image img(static_cast<int>(w), static_cast<int>(h));
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.pixels.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const Image& img, const std::string& path) {
  FilePtr f(fopen(path.c_str(), "wb"));
  if (!f) throw IngestionError("cannot write image: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IngestionError("png writer allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IngestionError("png writer allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IngestionError("png write failed: " + path);
  }

  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.pixels.data() + static_cast<size_t>(y) * img.width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_ppm(const std::string& path) {
  FilePtr f(fopen(path.c_str(), "rb"));
  if (!f) throw IngestionError("cannot open image: " + path);
  char magic[3] = {};
  int w = 0, h = 0, maxval = 0;
  if (fscanf(f.get(), "%2s %d %d %d", magic, &w, &h, &maxval) != 4 || strcmp(magic, "P6") != 0 ||
      maxval != 255 || w <= 0 || h <= 0)
    throw IngestionError("unsupported ppm header: " + path);
  fgetc(f.get());
  Image img(w, h);
  if (fread(img.pixels.data(), 1, img.pixels.size(), f.get()) != img.pixels.size())
    throw IngestionError("truncated ppm: " + path);
  return img;
}

void write_ppm(const Image& img, const std::string& path) {
  FilePtr f(fopen(path.c_str(), "wb"));
  if (!f) throw IngestionError("cannot write image: " + path);
  fprintf(f.get(), "P6\n%d %d\n255\n", img.width, img.height);
  fwrite(img.pixels.data(), 1, img.pixels.size(), f.get());
}

uint8_t to_byte(double v) {
  double r = std::round(v);
  if (r < 0.0) return 0;
  if (r > 255.0) return 255;
  return static_cast<uint8_t>(r);
}

double gray_of(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  double mx = std::max({r, g, b});
  double mn = std::min({r, g, b});
  double d = mx - mn;
  v = mx;
  s = mx <= 0.0 ? 0.0 : d / mx;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r)
    h = (g - b) / d;
  else if (mx == g)
    h = 2.0 + (b - r) / d;
  else
    h = 4.0 + (r - g) / d;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h -= std::floor(h);
  double hh = h * 6.0;
  int sector = std::min(5, static_cast<int>(hh));
  double f = hh - sector;
  double p = v * (1.0 - s);
  double q = v * (1.0 - s * f);
  double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace

Image read_image(const std::string& path) {
  if (has_suffix(path, ".ppm")) return read_ppm(path);
  return read_png(path);
}

void write_image(const Image& img, const std::string& path) {
  if (img.width <= 0 || img.height <= 0) throw ShapeError("cannot write empty image");
  if (has_suffix(path, ".ppm"))
    write_ppm(img, path);
  else
    write_png(img, path);
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw ShapeError("resize target must be positive");
  if (out_w == img.width && out_h == img.height) return img;
  Image out(out_w, out_h);
  double sx = static_cast<double>(img.width) / out_w;
  double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, img.height - 1);
    int y1c = std::clamp(y0 + 1, 0, img.height - 1);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, img.width - 1);
      int x1c = std::clamp(x0 + 1, 0, img.width - 1);
      for (int c = 0; c < 3; ++c) {
        double top = (1.0 - wx) * img.at(y0c, x0c, c) + wx * img.at(y0c, x1c, c);
        double bot = (1.0 - wx) * img.at(y1c, x0c, c) + wx * img.at(y1c, x1c, c);
        out.at(y, x, c) = to_byte((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

Image rescale_short_side(const Image& img, int target) {
  if (target <= 0) throw ShapeError("rescale target must be positive");
  if (img.width <= 0 || img.height <= 0) throw ShapeError("cannot rescale empty image");
  int short_side = std::min(img.width, img.height);
  double scale = static_cast<double>(target) / short_side;
  int w = img.width <= img.height ? target : static_cast<int>(img.width * scale);
  int h = img.height <= img.width ? target : static_cast<int>(img.height * scale);
  if (img.width == img.height) w = h = target;
  return resize_bilinear(img, w, h);
}

Image crop(const Image& img, int x0, int y0, int w, int h) {
  if (w <= 0 || h <= 0 || x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height)
    throw ShapeError("crop window outside image bounds");
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

void color_jitter(Image& img, const JitterConfig& cfg, Rng& rng) {
  if (!cfg.enabled) return;
  double fb = rng.uniform(std::max(0.0, 1.0 - cfg.brightness), 1.0 + cfg.brightness);
  double fc = rng.uniform(std::max(0.0, 1.0 - cfg.contrast), 1.0 + cfg.contrast);
  double fs = rng.uniform(std::max(0.0, 1.0 - cfg.saturation), 1.0 + cfg.saturation);
  double fh = rng.uniform(-cfg.hue, cfg.hue);

  size_t n = static_cast<size_t>(img.width) * img.height;
  std::vector<double> buf(n * 3);
  for (size_t i = 0; i < n * 3; ++i) buf[i] = img.pixels[i] / 255.0;

  double mean_gray = 0.0;
  for (size_t i = 0; i < n; ++i) mean_gray += gray_of(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]);
  mean_gray /= static_cast<double>(n);

  for (size_t i = 0; i < n; ++i) {
    double r = buf[3 * i], g = buf[3 * i + 1], b = buf[3 * i + 2];
    r *= fb;
    g *= fb;
    b *= fb;
    r = mean_gray * fb + (r - mean_gray * fb) * fc;
    g = mean_gray * fb + (g - mean_gray * fb) * fc;
    b = mean_gray * fb + (b - mean_gray * fb) * fc;
    double gray = gray_of(r, g, b);
    r = gray + (r - gray) * fs;
    g = gray + (g - gray) * fs;
    b = gray + (b - gray) * fs;
    if (fh != 0.0) {
      double h, s, v;
      rgb_to_hsv(std::clamp(r, 0.0, 1.0), std::clamp(g, 0.0, 1.0), std::clamp(b, 0.0, 1.0), h, s,
                 v);
      hsv_to_rgb(h + fh, s, v, r, g, b);
    }
    img.pixels[3 * i] = to_byte(r * 255.0);
    img.pixels[3 * i + 1] = to_byte(g * 255.0);
    img.pixels[3 * i + 2] = to_byte(b * 255.0);
  }
}

double normalize_intensity(double v) { return (v - 127.5) / 127.5; }

Tensor to_input_tensor(const Image& img) {
  if (img.width <= 0 || img.height <= 0) throw ShapeError("cannot convert empty image");
  Tensor t({3, img.height, img.width});
  double* d = t.data();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        *d++ = normalize_intensity(static_cast<double>(img.at(y, x, c)));
  return t;
}

}  // namespace attnpose
