#include "attnpose/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "attnpose/errors.hpp"

namespace attnpose {

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }

}  // namespace

Tensor saliency_map(PoseNetwork& model, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw ShapeError("saliency expects a single [3, H, W] image");
  int h = image.dim(1), w = image.dim(2);

  Tensor batch({1, 3, h, w});
  std::copy(image.data(), image.data() + image.size(), batch.data());

  model.zero_grad();
  BatchPoseOutput out = model.forward(batch, false, nullptr);
  Tensor dp({1, 3}), dlogq({1, 3});
  for (int i = 0; i < 3; ++i) {
    dp.at(0, i) = sign_of(out.p.at(0, i));
    dlogq.at(0, i) = sign_of(out.logq.at(0, i));
  }
  Tensor dimage = model.backward(dp, dlogq);
  model.zero_grad();

  Tensor map({h, w});
  double peak = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double m = 0.0;
      for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(dimage.at(0, c, y, x)));
      map.at(y, x) = m;
      peak = std::max(peak, m);
    }
  }
  if (peak > 0.0)
    for (int64_t i = 0; i < map.size(); ++i) map[i] /= peak;
  return map;
}

std::string saliency_to_text(const Tensor& map) {
  if (map.rank() != 2) throw ShapeError("saliency map must be [H, W]");
  std::ostringstream os;
  os << map.dim(0) << " " << map.dim(1) << "\n";
  char buf[40];
  for (int y = 0; y < map.dim(0); ++y) {
    for (int x = 0; x < map.dim(1); ++x) {
      snprintf(buf, sizeof(buf), "%.6g", map.at(y, x));
      os << buf << (x + 1 == map.dim(1) ? "\n" : " ");
    }
  }
  return os.str();
}

std::vector<double> feature_distances(PoseNetwork& model, const std::vector<Tensor>& frames,
                                      int anchor, bool pre_attention) {
  if (frames.empty()) throw ConfigError("feature distances need at least one frame");
  if (anchor < 0 || anchor >= static_cast<int>(frames.size()))
    throw ConfigError("anchor index out of range");
  for (const Tensor& f : frames)
    if (f.rank() != 3 || f.shape() != frames[0].shape())
      throw ShapeError("all frames must share one [3, H, W] shape");

  int n = static_cast<int>(frames.size());
  int h = frames[0].dim(1), w = frames[0].dim(2);
  std::vector<std::vector<double>> features(n);
  const int chunk = 32;
  for (int start = 0; start < n; start += chunk) {
    int end = std::min(n, start + chunk);
    Tensor batch({end - start, 3, h, w});
    for (int i = start; i < end; ++i)
      std::copy(frames[i].data(), frames[i].data() + frames[i].size(),
                batch.data() + static_cast<int64_t>(i - start) * frames[i].size());
    model.forward(batch, false, nullptr);
    const Tensor& feats =
        pre_attention ? model.features_pre_attention() : model.features_post_attention();
    int dim = feats.dim(1);
    for (int i = start; i < end; ++i) {
      features[i].assign(feats.data() + static_cast<int64_t>(i - start) * dim,
                         feats.data() + static_cast<int64_t>(i - start + 1) * dim);
    }
  }

  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (size_t k = 0; k < features[i].size(); ++k) {
      double d = features[i][k] - features[anchor][k];
      acc += d * d;
    }
    out[i] = std::sqrt(acc);
  }
  return out;
}

void trajectory_plot(const std::vector<Vec3>& ground_truth, const std::vector<Vec3>& prediction,
                     const std::string& path) {
  if (ground_truth.size() != prediction.size())
    throw ConfigError("trajectory plot needs equal-length ground truth and prediction");
  if (ground_truth.empty()) throw ConfigError("trajectory plot needs at least one pose");

  double min_x = ground_truth[0].x, max_x = min_x;
  double min_y = ground_truth[0].y, max_y = min_y;
  for (const auto* traj : {&ground_truth, &prediction}) {
    for (const Vec3& p : *traj) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  }
  double span = std::max({max_x - min_x, max_y - min_y, 1e-6});
  double pad = 0.05 * span;
  min_x -= pad;
  min_y -= pad;
  span += 2.0 * pad;
  const double size = 640.0;
  auto px = [&](double x) { return (x - min_x) / span * size; };
  // Flip so larger world y is up on the page.
  auto py = [&](double y) { return size - (y - min_y) / span * size; };

  auto points_attr = [&](const std::vector<Vec3>& traj) {
    std::ostringstream os;
    char buf[64];
    for (size_t i = 0; i < traj.size(); ++i) {
      snprintf(buf, sizeof(buf), "%.3f,%.3f", px(traj[i].x), py(traj[i].y));
      os << (i ? " " : "") << buf;
    }
    return os.str();
  };

  std::ofstream out(path);
  if (!out) throw Error("cannot write trajectory plot: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << " " << size << "\">\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "  <polyline id=\"ground_truth\" points=\"" << points_attr(ground_truth)
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n"
      << "  <polyline id=\"prediction\" points=\"" << points_attr(prediction)
      << "\" fill=\"none\" stroke=\"red\" stroke-width=\"2\"/>\n"
      << "  <circle id=\"start\" cx=\"" << px(ground_truth[0].x) << "\" cy=\""
      << py(ground_truth[0].y) << "\" r=\"6\" fill=\"black\"/>\n"
      << "</svg>\n";
  if (!out) throw Error("trajectory plot write failed: " + path);
}

uint64_t weights_fingerprint(PoseNetwork& model) {
  uint64_t h = 14695981039346656037ull;
  for (Parameter* p : model.params()) {
    const uint8_t* raw = reinterpret_cast<const uint8_t*>(p->value.data());
    size_t n = static_cast<size_t>(p->value.size()) * sizeof(double);
    for (size_t i = 0; i < n; ++i) {
      h ^= raw[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace attnpose
