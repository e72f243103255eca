#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"

#include "attnpose/data.hpp"
#include "attnpose/errors.hpp"
#include "attnpose/image.hpp"
#include "attnpose/pose_io.hpp"

using namespace attnpose;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Image checker_image(int w, int h) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<uint8_t>(((x / 4 + y / 4) % 2) ? 200 : 40 + 20 * c);
  return img;
}

double image_l2(const Image& a, const Image& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("rescale keeps aspect ratio and floors the long side") {
  Image img(640, 480);
  Image out = rescale_short_side(img, 256);
  CHECK(out.height == 256);
  CHECK(out.width == 341);  // floor(640 * 256 / 480)

  Image tall(480, 640);
  Image out2 = rescale_short_side(tall, 256);
  CHECK(out2.width == 256);
  CHECK(out2.height == 341);

  Image square(100, 100);
  Image out3 = rescale_short_side(square, 256);
  CHECK(out3.width == 256);
  CHECK(out3.height == 256);
}

TEST_CASE("bilinear resize preserves constant images") {
  Image img(13, 9);
  for (auto& p : img.pixels) p = 77;
  Image up = resize_bilinear(img, 40, 25);
  for (uint8_t p : up.pixels) CHECK(p == 77);
  Image same = resize_bilinear(img, 13, 9);
  CHECK(same.pixels == img.pixels);
}

TEST_CASE("intensity normalization is centered at mid-gray") {
  CHECK(normalize_intensity(127.5) == 0.0);
  CHECK(normalize_intensity(0.0) == -1.0);
  CHECK(normalize_intensity(255.0) == 1.0);

  Image img(4, 4);
  for (auto& p : img.pixels) p = 255;
  Tensor t = to_input_tensor(img);
  CHECK(t.shape() == std::vector<int>{3, 4, 4});
  for (int64_t i = 0; i < t.size(); ++i) CHECK(t[i] == 1.0);
}

TEST_CASE("png io round-trips exactly") {
  fs::path dir = fresh_dir("attnpose_png");
  Image img = checker_image(33, 21);
  write_image(img, (dir / "img.png").string());
  Image back = read_image((dir / "img.png").string());
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("crop validates its window") {
  Image img(10, 8);
  CHECK_NOTHROW(crop(img, 2, 1, 8, 7));
  CHECK_THROWS_AS(crop(img, 3, 0, 8, 8), ShapeError);
  CHECK_THROWS_AS(crop(img, -1, 0, 4, 4), ShapeError);
  CHECK_THROWS_AS(crop(img, 0, 0, 0, 4), ShapeError);
}

TEST_CASE("preprocess is deterministic per seed and crop fits the rescale") {
  Image img = checker_image(96, 64);
  PreprocessConfig cfg;
  cfg.rescale_short_side = 32;
  cfg.crop = 24;
  cfg.jitter.enabled = true;

  Tensor a = preprocess(img, cfg, true, 42);
  Tensor b = preprocess(img, cfg, true, 42);
  CHECK(a.shape() == std::vector<int>{3, 24, 24});
  REQUIRE(a.size() == b.size());
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  Tensor c = preprocess(img, cfg, true, 43);
  bool differs = false;
  for (int64_t i = 0; i < a.size(); ++i) differs |= a[i] != c[i];
  CHECK(differs);

  for (int64_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] >= -1.0);
    CHECK(a[i] <= 1.0);
  }

  PreprocessConfig bad = cfg;
  bad.crop = 40;
  CHECK_THROWS_AS(preprocess(img, bad, true, 0), ConfigError);
}

TEST_CASE("evaluation preprocessing ignores jitter and seed") {
  Image img = checker_image(96, 64);
  PreprocessConfig cfg;
  cfg.rescale_short_side = 32;
  cfg.crop = 24;
  cfg.crop_mode = CropMode::kRandom;  // training-only behavior
  cfg.jitter.enabled = true;

  Tensor a = preprocess(img, cfg, false, 1);
  Tensor b = preprocess(img, cfg, false, 999);
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("color jitter is seed-deterministic and bounded") {
  Image img = checker_image(20, 20);
  JitterConfig cfg;
  cfg.enabled = true;
  Image a = img, b = img;
  Rng r1(5), r2(5);
  color_jitter(a, cfg, r1);
  color_jitter(b, cfg, r2);
  CHECK(a.pixels == b.pixels);

  Image c = img;
  Rng r3(6);
  color_jitter(c, cfg, r3);
  CHECK(c.pixels != a.pixels);

  Image untouched = img;
  JitterConfig off;
  Rng r4(5);
  color_jitter(untouched, off, r4);
  CHECK(untouched.pixels == img.pixels);
}

TEST_CASE("triplet enumeration matches brute force") {
  auto triplets = sample_triplets(25, 10);
  REQUIRE(triplets.size() == 5);
  CHECK(triplets.front() == std::array<int, 3>{0, 10, 20});
  CHECK(triplets.back() == std::array<int, 3>{4, 14, 24});

  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    int len = static_cast<int>(rng.uniform_int(60));
    int spacing = 1 + static_cast<int>(rng.uniform_int(12));
    std::vector<std::array<int, 3>> expected;
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < len; ++j)
        for (int k = 0; k < len; ++k)
          if (j == i + spacing && k == j + spacing) expected.push_back({i, j, k});
    CHECK(sample_triplets(len, spacing) == expected);
  }

  CHECK(sample_triplets(20, 10).empty());
  CHECK(sample_triplets(0, 3).empty());
  CHECK_THROWS_AS(sample_triplets(10, 0), ConfigError);
}

TEST_CASE("synthetic scenes are seed-reproducible with distinct poses") {
  SceneConfig cfg;
  cfg.width = 48;
  cfg.height = 36;
  auto a = generate_synthetic_scene(6, 123, cfg);
  auto b = generate_synthetic_scene(6, 123, cfg);
  REQUIRE(a.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(a[i].image.pixels == b[i].image.pixels);
    CHECK(a[i].pose.p.x == b[i].pose.p.x);
    CHECK(a[i].pose.q.u == b[i].pose.q.u);
  }

  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = i + 1; j < a.size(); ++j)
      CHECK((a[i].pose.p - a[j].pose.p).norm() > 1e-6);

  // All camera positions stay inside the box.
  for (const auto& s : a) {
    CHECK(s.pose.p.x > 0.0);
    CHECK(s.pose.p.x < cfg.extent);
    CHECK(s.pose.p.y > 0.0);
    CHECK(s.pose.p.y < cfg.extent);
    CHECK(s.pose.p.z > 0.0);
    CHECK(s.pose.p.z < cfg.extent);
  }

  auto other = generate_synthetic_scene(6, 124, cfg);
  CHECK(other[0].image.pixels != a[0].image.pixels);
}

TEST_CASE("re-rendering a stored pose reproduces the stored frame") {
  SceneConfig cfg;
  cfg.width = 48;
  cfg.height = 36;
  auto samples = generate_synthetic_scene(5, 77, cfg);
  for (const auto& s : samples) {
    Image again = render_frame(s.pose, 77, cfg);
    CHECK(again.pixels == s.image.pixels);
  }
}

TEST_CASE("distant path points render measurably different frames") {
  SceneConfig cfg;
  cfg.width = 64;
  cfg.height = 48;
  auto samples = generate_synthetic_scene(8, 7, cfg);
  // Regression floor measured on this renderer at 64x48; a flat or broken
  // scene scores near zero, real runs score above 4000.
  CHECK(image_l2(samples.front().image, samples.back().image) > 1000.0);
}

TEST_CASE("single textured wall leaves the other walls flat") {
  SceneConfig cfg;
  cfg.width = 48;
  cfg.height = 36;
  cfg.textured_walls = 1 << 2;
  auto samples = generate_synthetic_scene(1, 9, cfg);
  auto walls = render_wall_index(samples[0].pose, cfg);
  REQUIRE(walls.size() == samples[0].image.pixels.size() / 3);

  // Pixels on any untextured wall share that wall's constant color.
  std::array<std::set<std::array<uint8_t, 3>>, 6> colors;
  for (size_t i = 0; i < walls.size(); ++i) {
    const Image& img = samples[0].image;
    colors[walls[i]].insert({img.pixels[3 * i], img.pixels[3 * i + 1], img.pixels[3 * i + 2]});
  }
  int textured_seen = 0;
  for (int wall = 0; wall < 6; ++wall) {
    if (colors[wall].empty()) continue;
    if (wall == 2)
      textured_seen = static_cast<int>(colors[wall].size());
    else
      CHECK(colors[wall].size() == 1);
  }
  CHECK(textured_seen > 10);
}

TEST_CASE("dataset writer and loaders round-trip") {
  SceneConfig cfg;
  cfg.width = 40;
  cfg.height = 30;
  auto samples = generate_synthetic_scene(4, 3, cfg);
  fs::path dir = fresh_dir("attnpose_ds");
  write_seven_scenes_style(samples, dir.string());

  auto loaded = load_seven_scenes_style(dir.string(), Split::kTrain);
  REQUIRE(loaded.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].sequence_id == samples[i].sequence_id);
    CHECK(loaded[i].frame_index == samples[i].frame_index);
    CHECK(loaded[i].image.pixels == samples[i].image.pixels);
    CHECK(position_error(loaded[i].pose.p, samples[i].pose.p) < 1e-12);
    CHECK(rotation_error(loaded[i].pose.q, samples[i].pose.q) < 1e-6);
  }

  auto via_manifest = load_manifest((dir / "manifest.txt").string());
  REQUIRE(via_manifest.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(via_manifest[i].frame_index == loaded[i].frame_index);
    CHECK(via_manifest[i].image.pixels == loaded[i].image.pixels);
  }
}

TEST_CASE("split files select sequences") {
  SceneConfig cfg;
  cfg.width = 24;
  cfg.height = 18;
  auto seq_a = generate_synthetic_scene(2, 1, cfg);
  auto seq_b = generate_synthetic_scene(2, 2, cfg);
  for (auto& s : seq_b) s.sequence_id = "seq-02";

  std::vector<DatasetSample> all = seq_a;
  all.insert(all.end(), seq_b.begin(), seq_b.end());
  fs::path dir = fresh_dir("attnpose_split");
  write_seven_scenes_style(all, dir.string());

  std::ofstream(dir / "TrainSplit.txt") << "seq-01\n";
  std::ofstream(dir / "TestSplit.txt") << "seq-02\n";

  auto train = load_seven_scenes_style(dir.string(), Split::kTrain);
  auto test = load_seven_scenes_style(dir.string(), Split::kTest);
  auto everything = load_seven_scenes_style(dir.string(), Split::kAll);
  REQUIRE(train.size() == 2);
  REQUIRE(test.size() == 2);
  REQUIRE(everything.size() == 4);
  CHECK(train[0].sequence_id == "seq-01");
  CHECK(test[0].sequence_id == "seq-02");
  CHECK(std::is_sorted(everything.begin(), everything.end(), [](const auto& a, const auto& b) {
    return std::tie(a.sequence_id, a.frame_index) < std::tie(b.sequence_id, b.frame_index);
  }));
}

TEST_CASE("ingestion errors name the offending frame") {
  SceneConfig cfg;
  cfg.width = 24;
  cfg.height = 18;
  auto samples = generate_synthetic_scene(2, 5, cfg);
  fs::path dir = fresh_dir("attnpose_bad");
  write_seven_scenes_style(samples, dir.string());

  SUBCASE("missing pose file") {
    fs::remove(dir / "seq-01" / "frame-000001.pose.txt");
    try {
      load_seven_scenes_style(dir.string(), Split::kAll);
      FAIL("expected IngestionError");
    } catch (const IngestionError& e) {
      CHECK(std::string(e.what()).find("frame-000001") != std::string::npos);
    }
  }

  SUBCASE("non-orthonormal rotation block") {
    std::ofstream(dir / "seq-01" / "frame-000000.pose.txt")
        << "1 0 0 0.5\n0 2 0 0.5\n0 0 1 0.5\n0 0 0 1\n";
    try {
      load_seven_scenes_style(dir.string(), Split::kAll);
      FAIL("expected IngestionError");
    } catch (const IngestionError& e) {
      CHECK(std::string(e.what()).find("frame-000000") != std::string::npos);
    }
  }

  SUBCASE("malformed manifest line") {
    std::ofstream(dir / "manifest.txt") << "seq-01 only-two-fields\n";
    CHECK_THROWS_AS(load_manifest((dir / "manifest.txt").string()), IngestionError);
  }

  SUBCASE("missing root") {
    CHECK_THROWS_AS(load_seven_scenes_style((dir / "nope").string(), Split::kAll),
                    IngestionError);
  }
}

TEST_CASE("matrix pose ingestion oracles") {
  fs::path dir = fresh_dir("attnpose_mat");

  std::ofstream(dir / "identity.txt") << "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n";
  Pose id = read_pose_matrix((dir / "identity.txt").string());
  CHECK(id.p.norm() == 0.0);
  CHECK(id.q.u == 1.0);

  std::ofstream(dir / "translate.txt") << "1 0 0 1\n0 1 0 2\n0 0 1 3\n0 0 0 1\n";
  Pose tr = read_pose_matrix((dir / "translate.txt").string());
  CHECK(tr.p.x == 1.0);
  CHECK(tr.p.y == 2.0);
  CHECK(tr.p.z == 3.0);
  CHECK(tr.q.u == 1.0);

  // 90 degrees about z: quaternion (sqrt(2)/2, 0, 0, sqrt(2)/2).
  std::ofstream(dir / "rotz.txt") << "0 -1 0 0\n1 0 0 0\n0 0 1 0\n0 0 0 1\n";
  Pose rz = read_pose_matrix((dir / "rotz.txt").string());
  const double half_sqrt2 = std::sqrt(2.0) / 2.0;
  CHECK(rz.q.u == doctest::Approx(half_sqrt2).epsilon(1e-12));
  CHECK(rz.q.v.z == doctest::Approx(half_sqrt2).epsilon(1e-12));
  CHECK(std::abs(rz.q.v.x) < 1e-12);
  CHECK(std::abs(rz.q.v.y) < 1e-12);
}

TEST_CASE("path extent matches the farthest camera pair") {
  SceneConfig cfg;
  cfg.width = 24;
  cfg.height = 18;
  auto samples = generate_synthetic_scene(7, 21, cfg);
  double best = 0.0;
  for (size_t i = 0; i < samples.size(); ++i)
    for (size_t j = 0; j < samples.size(); ++j)
      best = std::max(best, (samples[i].pose.p - samples[j].pose.p).norm());
  CHECK(path_extent(samples) == best);
  CHECK(best > 0.5);
  CHECK(path_extent({}) == 0.0);
}
