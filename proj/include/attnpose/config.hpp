#pragma once

// Run configuration: a flat sectioned key-value file plus programmatic
// overrides. Files look like
//
//   [train]
//   learning_rate 5e-5
//   epochs 30
//
// with '#' comments. Unknown sections, unknown keys, and unparseable values
// raise ConfigError. serialize_config() emits every resolved value in the
// same format, so the echo written next to a run's outputs reproduces it.

#include <string>

#include "attnpose/data.hpp"
#include "attnpose/model.hpp"
#include "attnpose/train.hpp"

namespace attnpose {

struct RunConfig {
  std::string data_root;
  Split split = Split::kTrain;
  std::string out_dir;
  std::string checkpoint;
  bool deterministic = false;
  EncoderConfig encoder;
  PreprocessConfig preprocess;
  TrainConfig train;
  SceneConfig scene;
  int scene_frames = 200;
};

Split split_from_string(const std::string& s);
std::string to_string(Split s);

// Applies one `section.key = value` assignment on top of `cfg`.
void apply_config_value(RunConfig& cfg, const std::string& section, const std::string& key,
                        const std::string& value);

// Parses file content on top of the defaults already in `cfg`.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);

RunConfig parse_config_file(const std::string& path);

std::string serialize_config(const RunConfig& cfg);

}  // namespace attnpose
