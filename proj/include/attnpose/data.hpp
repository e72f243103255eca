#pragma once

// Dataset loading, preprocessing, temporal triplet sampling, and the
// synthetic scene generator used for self-contained training and tests.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "attnpose/geometry.hpp"
#include "attnpose/image.hpp"
#include "attnpose/tensor.hpp"

namespace attnpose {

struct DatasetSample {
  Image image;
  Pose pose;
  std::string sequence_id;
  int frame_index = 0;
};

enum class CropMode { kRandom, kCenter };

CropMode crop_mode_from_string(const std::string& s);
std::string to_string(CropMode m);

struct PreprocessConfig {
  int rescale_short_side = 256;
  int crop = 256;
  CropMode crop_mode = CropMode::kRandom;
  JitterConfig jitter;
};

// Rescale (short side, long side rounded down), jitter (training only),
// crop, and map to [-1, 1]. Returns [3, crop, crop]. All randomness comes
// from `seed`, so equal seeds give equal tensors.
Tensor preprocess(const Image& img, const PreprocessConfig& cfg, bool training, uint64_t seed);

enum class Split { kTrain, kTest, kAll };

// Directory layout: per-sequence subdirectories holding
// frame-XXXXXX.color.png and frame-XXXXXX.pose.txt pairs, with optional
// TrainSplit.txt / TestSplit.txt files at the root naming one sequence
// directory per line. Without a split file every sequence is used. Samples
// come back ordered by (sequence_id, frame_index).
std::vector<DatasetSample> load_seven_scenes_style(const std::string& root, Split split);

// Manifest layout: one `sequence_id frame_index image_relpath pose_relpath`
// line per frame, paths relative to the manifest's directory.
std::vector<DatasetSample> load_manifest(const std::string& manifest_path);

// Index triples (i, i + spacing, i + 2 * spacing) for every valid start.
// Sequences shorter than 2 * spacing + 1 yield no triplets.
std::vector<std::array<int, 3>> sample_triplets(int sequence_len, int spacing);

struct SceneConfig {
  int width = 128;
  int height = 96;
  double fov_deg = 70.0;
  double extent = 4.0;         // box side length in meters
  int textured_walls = 0x3f;   // bitmask over the six walls
};

// Deterministic path + renderer: the camera follows a smooth helix inside a
// procedurally textured box, looking at the box center. Same seed, same
// configuration: byte-identical frames. No two frames share a pose.
std::vector<DatasetSample> generate_synthetic_scene(int n_frames, uint64_t seed,
                                                    const SceneConfig& cfg = {});

// Re-render a single view of the scene identified by `seed`.
Image render_frame(const Pose& pose, uint64_t seed, const SceneConfig& cfg = {});

// Which wall (0..5) each pixel sees, row-major.
std::vector<int8_t> render_wall_index(const Pose& pose, const SceneConfig& cfg = {});

// Largest pairwise distance between camera positions.
double path_extent(const std::vector<DatasetSample>& samples);

// Write samples in the directory layout load_seven_scenes_style reads,
// plus manifest.txt and both split files (all sequences in each).
void write_seven_scenes_style(const std::vector<DatasetSample>& samples, const std::string& root);

}  // namespace attnpose
