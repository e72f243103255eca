#include "attnpose/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "attnpose/errors.hpp"

namespace attnpose {

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  if (s == "all") return Split::kAll;
  throw ConfigError("unknown split: " + s);
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    default: return "all";
  }
}

namespace {

[[noreturn]] void bad_value(const std::string& section, const std::string& key,
                            const std::string& value) {
  throw ConfigError("bad value for " + section + "." + key + ": " + value);
}

int parse_int(const std::string& section, const std::string& key, const std::string& value) {
  try {
    size_t used;
    int v = std::stoi(value, &used);
    if (used != value.size()) bad_value(section, key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(section, key, value);
  }
}

double parse_double(const std::string& section, const std::string& key,
                    const std::string& value) {
  try {
    size_t used;
    double v = std::stod(value, &used);
    if (used != value.size()) bad_value(section, key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(section, key, value);
  }
}

uint64_t parse_u64(const std::string& section, const std::string& key,
                   const std::string& value) {
  try {
    size_t used;
    uint64_t v = std::stoull(value, &used);
    if (used != value.size()) bad_value(section, key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(section, key, value);
  }
}

bool parse_bool(const std::string& section, const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  bad_value(section, key, value);
}

std::string fmt(double v) {
  char buf[40];
  snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void apply_config_value(RunConfig& cfg, const std::string& section, const std::string& key,
                        const std::string& value) {
  if (section == "data") {
    if (key == "root")
      cfg.data_root = value;
    else if (key == "split")
      cfg.split = split_from_string(value);
    else if (key == "checkpoint")
      cfg.checkpoint = value;
    else
      throw ConfigError("unknown key data." + key);
  } else if (section == "output") {
    if (key == "dir")
      cfg.out_dir = value;
    else
      throw ConfigError("unknown key output." + key);
  } else if (section == "model") {
    if (key == "backbone")
      cfg.encoder.backbone = backbone_from_string(value);
    else if (key == "feature_dim")
      cfg.encoder.feature_dim = parse_int(section, key, value);
    else if (key == "attention_ratio")
      cfg.encoder.attention_ratio = parse_int(section, key, value);
    else if (key == "use_attention")
      cfg.encoder.use_attention = parse_bool(section, key, value);
    else if (key == "pretrained")
      cfg.encoder.pretrained = parse_bool(section, key, value);
    else if (key == "dropout_rate")
      cfg.encoder.dropout_rate = parse_double(section, key, value);
    else
      throw ConfigError("unknown key model." + key);
  } else if (section == "preprocess") {
    if (key == "rescale_short_side")
      cfg.preprocess.rescale_short_side = parse_int(section, key, value);
    else if (key == "crop")
      cfg.preprocess.crop = parse_int(section, key, value);
    else if (key == "crop_mode")
      cfg.preprocess.crop_mode = crop_mode_from_string(value);
    else if (key == "jitter")
      cfg.preprocess.jitter.enabled = parse_bool(section, key, value);
    else if (key == "jitter_brightness")
      cfg.preprocess.jitter.brightness = parse_double(section, key, value);
    else if (key == "jitter_contrast")
      cfg.preprocess.jitter.contrast = parse_double(section, key, value);
    else if (key == "jitter_saturation")
      cfg.preprocess.jitter.saturation = parse_double(section, key, value);
    else if (key == "jitter_hue")
      cfg.preprocess.jitter.hue = parse_double(section, key, value);
    else
      throw ConfigError("unknown key preprocess." + key);
  } else if (section == "train") {
    if (key == "learning_rate")
      cfg.train.learning_rate = parse_double(section, key, value);
    else if (key == "batch_size")
      cfg.train.batch_size = parse_int(section, key, value);
    else if (key == "beta0")
      cfg.train.beta0 = parse_double(section, key, value);
    else if (key == "gamma0")
      cfg.train.gamma0 = parse_double(section, key, value);
    else if (key == "epochs")
      cfg.train.epochs = parse_int(section, key, value);
    else if (key == "seed")
      cfg.train.seed = parse_u64(section, key, value);
    else if (key == "temporal")
      cfg.train.temporal = parse_bool(section, key, value);
    else if (key == "deterministic")
      cfg.deterministic = parse_bool(section, key, value);
    else
      throw ConfigError("unknown key train." + key);
  } else if (section == "temporal") {
    if (key == "alpha")
      cfg.train.temporal_cfg.temporal_alpha = parse_double(section, key, value);
    else if (key == "spacing")
      cfg.train.temporal_cfg.frame_spacing = parse_int(section, key, value);
    else
      throw ConfigError("unknown key temporal." + key);
  } else if (section == "scene") {
    if (key == "frames")
      cfg.scene_frames = parse_int(section, key, value);
    else if (key == "width")
      cfg.scene.width = parse_int(section, key, value);
    else if (key == "height")
      cfg.scene.height = parse_int(section, key, value);
    else if (key == "fov_deg")
      cfg.scene.fov_deg = parse_double(section, key, value);
    else if (key == "extent")
      cfg.scene.extent = parse_double(section, key, value);
    else if (key == "textured_walls")
      cfg.scene.textured_walls = parse_int(section, key, value);
    else
      throw ConfigError("unknown key scene." + key);
  } else {
    throw ConfigError("unknown config section [" + section + "]");
  }
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first.size() >= 2 && first.front() == '[' && first.back() == ']') {
      section = first.substr(1, first.size() - 2);
      std::string extra;
      if (ls >> extra)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section line");
      continue;
    }
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": key before any section");
    std::string value;
    if (!(ls >> value))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": key without value");
    if (value == "=" && !(ls >> value))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": key without value");
    std::string extra;
    if (ls >> extra)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": trailing tokens");
    apply_config_value(cfg, section, first, value);
  }
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, buf.str(), path);
  return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[data]\n";
  if (!cfg.data_root.empty()) os << "root " << cfg.data_root << "\n";
  os << "split " << to_string(cfg.split) << "\n";
  if (!cfg.checkpoint.empty()) os << "checkpoint " << cfg.checkpoint << "\n";
  os << "\n[output]\n";
  if (!cfg.out_dir.empty()) os << "dir " << cfg.out_dir << "\n";
  os << "\n[model]\n"
     << "backbone " << to_string(cfg.encoder.backbone) << "\n"
     << "feature_dim " << cfg.encoder.feature_dim << "\n"
     << "attention_ratio " << cfg.encoder.attention_ratio << "\n"
     << "use_attention " << (cfg.encoder.use_attention ? 1 : 0) << "\n"
     << "pretrained " << (cfg.encoder.pretrained ? 1 : 0) << "\n"
     << "dropout_rate " << fmt(cfg.encoder.dropout_rate) << "\n";
  os << "\n[preprocess]\n"
     << "rescale_short_side " << cfg.preprocess.rescale_short_side << "\n"
     << "crop " << cfg.preprocess.crop << "\n"
     << "crop_mode " << to_string(cfg.preprocess.crop_mode) << "\n"
     << "jitter " << (cfg.preprocess.jitter.enabled ? 1 : 0) << "\n"
     << "jitter_brightness " << fmt(cfg.preprocess.jitter.brightness) << "\n"
     << "jitter_contrast " << fmt(cfg.preprocess.jitter.contrast) << "\n"
     << "jitter_saturation " << fmt(cfg.preprocess.jitter.saturation) << "\n"
     << "jitter_hue " << fmt(cfg.preprocess.jitter.hue) << "\n";
  os << "\n[train]\n"
     << "learning_rate " << fmt(cfg.train.learning_rate) << "\n"
     << "batch_size " << cfg.train.batch_size << "\n"
     << "beta0 " << fmt(cfg.train.beta0) << "\n"
     << "gamma0 " << fmt(cfg.train.gamma0) << "\n"
     << "epochs " << cfg.train.epochs << "\n"
     << "seed " << cfg.train.seed << "\n"
     << "temporal " << (cfg.train.temporal ? 1 : 0) << "\n"
     << "deterministic " << (cfg.deterministic ? 1 : 0) << "\n";
  os << "\n[temporal]\n"
     << "alpha " << fmt(cfg.train.temporal_cfg.temporal_alpha) << "\n"
     << "spacing " << cfg.train.temporal_cfg.frame_spacing << "\n";
  os << "\n[scene]\n"
     << "frames " << cfg.scene_frames << "\n"
     << "width " << cfg.scene.width << "\n"
     << "height " << cfg.scene.height << "\n"
     << "fov_deg " << fmt(cfg.scene.fov_deg) << "\n"
     << "extent " << fmt(cfg.scene.extent) << "\n"
     << "textured_walls " << cfg.scene.textured_walls << "\n";
  return os.str();
}

}  // namespace attnpose
