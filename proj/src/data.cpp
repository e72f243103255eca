#include "attnpose/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "attnpose/errors.hpp"
#include "attnpose/pose_io.hpp"
#include "attnpose/rng.hpp"

namespace fs = std::filesystem;

namespace attnpose {

CropMode crop_mode_from_string(const std::string& s) {
  if (s == "random") return CropMode::kRandom;
  if (s == "center") return CropMode::kCenter;
  throw ConfigError("unknown crop mode: " + s);
}

std::string to_string(CropMode m) { return m == CropMode::kRandom ? "random" : "center"; }

Tensor preprocess(const Image& img, const PreprocessConfig& cfg, bool training, uint64_t seed) {
  if (cfg.crop <= 0 || cfg.rescale_short_side <= 0)
    throw ConfigError("preprocess sizes must be positive");
  if (cfg.crop > cfg.rescale_short_side)
    throw ConfigError("crop size exceeds rescaled short side");

  Rng rng(seed);
  Image scaled = rescale_short_side(img, cfg.rescale_short_side);
  if (training) color_jitter(scaled, cfg.jitter, rng);

  int max_x = scaled.width - cfg.crop;
  int max_y = scaled.height - cfg.crop;
  int x0, y0;
  if (training && cfg.crop_mode == CropMode::kRandom) {
    x0 = max_x > 0 ? static_cast<int>(rng.uniform_int(max_x + 1)) : 0;
    y0 = max_y > 0 ? static_cast<int>(rng.uniform_int(max_y + 1)) : 0;
  } else {
    x0 = max_x / 2;
    y0 = max_y / 2;
  }
  return to_input_tensor(crop(scaled, x0, y0, cfg.crop, cfg.crop));
}

namespace {

std::string frame_stem(int index) {
  char buf[32];
  snprintf(buf, sizeof(buf), "frame-%06d", index);
  return buf;
}

DatasetSample load_frame(const fs::path& image_path, const fs::path& pose_path,
                         const std::string& sequence_id, int frame_index) {
  std::string label = sequence_id + "/" + frame_stem(frame_index);
  if (!fs::exists(pose_path)) throw IngestionError(label + ": missing pose file");
  DatasetSample s;
  s.sequence_id = sequence_id;
  s.frame_index = frame_index;
  try {
    s.image = read_image(image_path.string());
    s.pose = read_pose_matrix(pose_path.string());
  } catch (const Error& e) {
    throw IngestionError(label + ": " + e.what());
  }
  return s;
}

std::vector<std::string> split_sequences(const fs::path& root, Split split) {
  const char* split_file = split == Split::kTrain ? "TrainSplit.txt" : "TestSplit.txt";
  std::vector<std::string> names;
  if (split != Split::kAll && fs::exists(root / split_file)) {
    std::ifstream in(root / split_file);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (!line.empty()) names.push_back(line);
    }
    return names;
  }
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

std::vector<DatasetSample> load_seven_scenes_style(const std::string& root, Split split) {
  fs::path base(root);
  if (!fs::is_directory(base)) throw IngestionError("dataset root not found: " + root);

  std::vector<DatasetSample> samples;
  for (const std::string& seq : split_sequences(base, split)) {
    fs::path dir = base / seq;
    if (!fs::is_directory(dir)) throw IngestionError("sequence directory not found: " + seq);
    std::vector<int> indices;
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::string name = entry.path().filename().string();
      int idx;
      char tail[16];
      if (sscanf(name.c_str(), "frame-%6d.%10s", &idx, tail) == 2 &&
          strcmp(tail, "color.png") == 0)
        indices.push_back(idx);
    }
    std::sort(indices.begin(), indices.end());
    for (int idx : indices) {
      std::string stem = frame_stem(idx);
      samples.push_back(load_frame(dir / (stem + ".color.png"), dir / (stem + ".pose.txt"), seq,
                                   idx));
    }
  }
  std::stable_sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) {
    return std::tie(a.sequence_id, a.frame_index) < std::tie(b.sequence_id, b.frame_index);
  });
  return samples;
}

std::vector<DatasetSample> load_manifest(const std::string& manifest_path) {
  fs::path mpath(manifest_path);
  std::ifstream in(mpath);
  if (!in) throw IngestionError("cannot open manifest: " + manifest_path);
  fs::path base = mpath.parent_path();

  std::vector<DatasetSample> samples;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string seq, image_rel, pose_rel;
    int idx;
    if (!(ls >> seq >> idx >> image_rel >> pose_rel))
      throw IngestionError("manifest line " + std::to_string(lineno) + " is malformed");
    samples.push_back(load_frame(base / image_rel, base / pose_rel, seq, idx));
  }
  std::stable_sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) {
    return std::tie(a.sequence_id, a.frame_index) < std::tie(b.sequence_id, b.frame_index);
  });
  return samples;
}

std::vector<std::array<int, 3>> sample_triplets(int sequence_len, int spacing) {
  if (spacing < 1) throw ConfigError("triplet spacing must be at least 1");
  std::vector<std::array<int, 3>> out;
  if (sequence_len < 2 * spacing + 1) {
    if (sequence_len > 0)
      fprintf(stderr, "warning: sequence of %d frames too short for triplet spacing %d\n",
              sequence_len, spacing);
    return out;
  }
  for (int i = 0; i + 2 * spacing < sequence_len; ++i)
    out.push_back({i, i + spacing, i + 2 * spacing});
  return out;
}

namespace {

double vec_component(const Vec3& v, int i) { return i == 0 ? v.x : i == 1 ? v.y : v.z; }

struct WallPaint {
  Vec3 color_a;    // pattern extremes, componentwise lerp
  Vec3 color_b;
  double freq[4];
  double phase[2];
  bool textured = true;
};

struct Scene {
  std::array<WallPaint, 6> walls;
};

Scene make_scene(uint64_t seed, const SceneConfig& cfg) {
  Scene scene;
  for (int k = 0; k < 6; ++k) {
    Rng rng(Rng::mix(seed, 0xa110 + k));
    WallPaint& w = scene.walls[k];
    w.color_a = {rng.uniform(0.55, 0.95), rng.uniform(0.55, 0.95), rng.uniform(0.55, 0.95)};
    w.color_b = {rng.uniform(0.05, 0.45), rng.uniform(0.05, 0.45), rng.uniform(0.05, 0.45)};
    for (double& f : w.freq) f = rng.uniform(2.0, 6.5);
    for (double& p : w.phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
    w.textured = (cfg.textured_walls >> k) & 1;
  }
  return scene;
}

Vec3 wall_color(const WallPaint& w, double u, double v) {
  // Untextured walls share one featureless gray, so in a scene with a single
  // textured wall that wall is the only localization signal.
  if (!w.textured) return {0.5, 0.5, 0.5};
  constexpr double tau = 2.0 * std::numbers::pi;
  double p1 = std::sin(tau * (w.freq[0] * u + w.freq[1] * v) + w.phase[0]);
  double p2 = std::sin(tau * (w.freq[2] * u - w.freq[3] * v) + w.phase[1]);
  double p3 = std::sin(tau * (2.0 * w.freq[0] * v + 2.0 * w.freq[2] * u) + w.phase[0] + w.phase[1]);
  double t = 0.65 * (0.5 + 0.5 * p1 * p2) + 0.35 * (0.5 + 0.5 * p3);
  return w.color_b + (w.color_a - w.color_b) * t;
}

// Exit intersection of an interior ray with the box [0, extent]^3.
void hit_wall(const Vec3& origin, const Vec3& dir, double extent, int& wall, double& u, double& v) {
  double best_t = std::numeric_limits<double>::infinity();
  wall = -1;
  for (int axis = 0; axis < 3; ++axis) {
    double da = vec_component(dir, axis);
    if (std::abs(da) < 1e-12) continue;
    double face = da > 0.0 ? extent : 0.0;
    double t = (face - vec_component(origin, axis)) / da;
    if (t > 0.0 && t < best_t) {
      best_t = t;
      wall = axis * 2 + (da > 0.0 ? 1 : 0);
    }
  }
  Vec3 hit = origin + dir * best_t;
  switch (wall / 2) {
    case 0: u = hit.y / extent; v = hit.z / extent; break;
    case 1: u = hit.x / extent; v = hit.z / extent; break;
    default: u = hit.x / extent; v = hit.y / extent; break;
  }
}

Pose path_pose(double t, double phase0, const SceneConfig& cfg) {
  constexpr double tau = 2.0 * std::numbers::pi;
  double s = cfg.extent;
  double angle = tau * 0.85 * t + phase0;
  Vec3 p{s * 0.5 + 0.30 * s * std::cos(angle), s * 0.5 + 0.30 * s * std::sin(angle),
         0.30 * s + 0.40 * s * t};
  Vec3 target{s * 0.5, s * 0.5, s * 0.5};

  Vec3 fwd = (target - p) / (target - p).norm();
  Vec3 right = fwd.cross(Vec3{0.0, 0.0, 1.0});
  right = right / right.norm();
  Vec3 down = fwd.cross(right);

  Mat3 r;
  for (int i = 0; i < 3; ++i) {
    r(i, 0) = vec_component(right, i);
    r(i, 1) = vec_component(down, i);
    r(i, 2) = vec_component(fwd, i);
  }
  return Pose{p, from_rotation_matrix(r)};
}

// Shared camera setup: world-space ray direction for a pixel center.
struct RayCamera {
  Vec3 origin, right, down, fwd;
  double fpx, cx, cy;

  RayCamera(const Pose& pose, const SceneConfig& cfg) {
    origin = pose.p;
    Mat3 r = to_rotation_matrix(pose.q);
    right = Vec3{r(0, 0), r(1, 0), r(2, 0)};
    down = Vec3{r(0, 1), r(1, 1), r(2, 1)};
    fwd = Vec3{r(0, 2), r(1, 2), r(2, 2)};
    fpx = (cfg.width * 0.5) / std::tan(cfg.fov_deg * std::numbers::pi / 360.0);
    cx = cfg.width * 0.5;
    cy = cfg.height * 0.5;
  }

  Vec3 ray(int x, int y) const {
    double u = (x + 0.5 - cx) / fpx;
    double v = (y + 0.5 - cy) / fpx;
    Vec3 d = right * u + down * v + fwd;
    return d / d.norm();
  }
};

uint8_t channel_byte(double c) {
  double r = std::round(std::clamp(c, 0.0, 1.0) * 255.0);
  return static_cast<uint8_t>(r);
}

}  // namespace

Image render_frame(const Pose& pose, uint64_t seed, const SceneConfig& cfg) {
  if (cfg.width <= 0 || cfg.height <= 0 || cfg.extent <= 0.0)
    throw ConfigError("scene dimensions must be positive");
  Scene scene = make_scene(seed, cfg);
  RayCamera cam(pose, cfg);
  Image img(cfg.width, cfg.height);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      int wall;
      double u, v;
      hit_wall(cam.origin, cam.ray(x, y), cfg.extent, wall, u, v);
      Vec3 c = wall_color(scene.walls[wall], u, v);
      img.at(y, x, 0) = channel_byte(c.x);
      img.at(y, x, 1) = channel_byte(c.y);
      img.at(y, x, 2) = channel_byte(c.z);
    }
  }
  return img;
}

std::vector<int8_t> render_wall_index(const Pose& pose, const SceneConfig& cfg) {
  RayCamera cam(pose, cfg);
  std::vector<int8_t> idx(static_cast<size_t>(cfg.width) * cfg.height);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      int wall;
      double u, v;
      hit_wall(cam.origin, cam.ray(x, y), cfg.extent, wall, u, v);
      idx[static_cast<size_t>(y) * cfg.width + x] = static_cast<int8_t>(wall);
    }
  }
  return idx;
}

std::vector<DatasetSample> generate_synthetic_scene(int n_frames, uint64_t seed,
                                                    const SceneConfig& cfg) {
  if (n_frames <= 0) throw ConfigError("frame count must be positive");
  Rng path_rng(Rng::mix(seed, 0x9a7));
  double phase0 = path_rng.uniform(0.0, 2.0 * std::numbers::pi);

  std::vector<DatasetSample> samples;
  samples.reserve(n_frames);
  for (int i = 0; i < n_frames; ++i) {
    double t = n_frames == 1 ? 0.0 : static_cast<double>(i) / (n_frames - 1);
    DatasetSample s;
    s.sequence_id = "seq-01";
    s.frame_index = i;
    s.pose = path_pose(t, phase0, cfg);
    s.image = render_frame(s.pose, seed, cfg);
    samples.push_back(std::move(s));
  }
  return samples;
}

double path_extent(const std::vector<DatasetSample>& samples) {
  double best = 0.0;
  for (size_t i = 0; i < samples.size(); ++i)
    for (size_t j = i + 1; j < samples.size(); ++j)
      best = std::max(best, (samples[i].pose.p - samples[j].pose.p).norm());
  return best;
}

void write_seven_scenes_style(const std::vector<DatasetSample>& samples, const std::string& root) {
  fs::path base(root);
  fs::create_directories(base);

  std::map<std::string, std::vector<const DatasetSample*>> by_seq;
  for (const auto& s : samples) by_seq[s.sequence_id].push_back(&s);

  std::ofstream manifest(base / "manifest.txt");
  for (const auto& [seq, frames] : by_seq) {
    fs::create_directories(base / seq);
    for (const DatasetSample* s : frames) {
      std::string stem = frame_stem(s->frame_index);
      std::string image_rel = seq + "/" + stem + ".color.png";
      std::string pose_rel = seq + "/" + stem + ".pose.txt";
      write_image(s->image, (base / image_rel).string());
      write_pose_matrix(s->pose, (base / pose_rel).string());
      manifest << seq << " " << s->frame_index << " " << image_rel << " " << pose_rel << "\n";
    }
  }

  for (const char* name : {"TrainSplit.txt", "TestSplit.txt"}) {
    std::ofstream split(base / name);
    for (const auto& [seq, frames] : by_seq) split << seq << "\n";
  }
}

}  // namespace attnpose
