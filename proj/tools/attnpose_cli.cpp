// Command-line front end: train / eval / analyze / ablate / synth-data.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error,
// 3 checkpoint incompatibility.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "attnpose/ablate.hpp"
#include "attnpose/analysis.hpp"
#include "attnpose/config.hpp"
#include "attnpose/data.hpp"
#include "attnpose/errors.hpp"
#include "attnpose/kernels.hpp"
#include "attnpose/train.hpp"

namespace fs = std::filesystem;
using namespace attnpose;

namespace {

// Streambuf that duplicates everything onto two sinks, so training logs land
// in the log file and on the console at once.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == EOF) return EOF;
    int ra = a_->sputc(static_cast<char>(c));
    int rb = b_->sputc(static_cast<char>(c));
    return ra == EOF || rb == EOF ? EOF : c;
  }
  int sync() override { return a_->pubsync() == 0 && b_->pubsync() == 0 ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

struct Args {
  std::string config_path, data, out, checkpoint, resume, split;
  std::string mode = "saliency";
  uint64_t seed = 0;
  int epochs = 0, batch_size = 0, frames = 0, width = 0, height = 0;
  int frame = 0, anchor = 0;
  bool deterministic = false, temporal = false, pre_attention = false, single_wall = false;
  CLI::Option *o_seed = nullptr, *o_epochs = nullptr, *o_batch = nullptr, *o_temporal = nullptr,
              *o_det = nullptr, *o_split = nullptr, *o_frames = nullptr, *o_width = nullptr,
              *o_height = nullptr;
};

void add_common_options(CLI::App* cmd, Args& a) {
  cmd->add_option("--config", a.config_path, "configuration file");
  cmd->add_option("--data", a.data, "dataset root directory");
  cmd->add_option("--out", a.out, "output directory (default: $ATTNPOSE_OUT_ROOT/<command>)");
  a.o_seed = cmd->add_option("--seed", a.seed, "run seed");
  a.o_det = cmd->add_flag("--deterministic", a.deterministic,
                          "force the serial kernel path for bit-stable runs");
}

RunConfig resolve_config(const Args& a, const char* verb, Split default_split) {
  RunConfig cfg;
  cfg.split = default_split;
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) throw ConfigError("cannot open config file: " + a.config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    apply_config_text(cfg, buf.str(), a.config_path);
  }
  if (!a.data.empty()) cfg.data_root = a.data;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (!a.checkpoint.empty()) cfg.checkpoint = a.checkpoint;
  if (a.o_seed && a.o_seed->count()) cfg.train.seed = a.seed;
  if (a.o_epochs && a.o_epochs->count()) cfg.train.epochs = a.epochs;
  if (a.o_batch && a.o_batch->count()) cfg.train.batch_size = a.batch_size;
  if (a.o_temporal && a.o_temporal->count()) cfg.train.temporal = a.temporal;
  if (a.o_det && a.o_det->count()) cfg.deterministic = a.deterministic;
  if (a.o_split && a.o_split->count()) cfg.split = split_from_string(a.split);
  if (a.o_frames && a.o_frames->count()) cfg.scene_frames = a.frames;
  if (a.o_width && a.o_width->count()) cfg.scene.width = a.width;
  if (a.o_height && a.o_height->count()) cfg.scene.height = a.height;

  if (cfg.out_dir.empty()) {
    const char* root = std::getenv("ATTNPOSE_OUT_ROOT");
    if (root && *root) cfg.out_dir = std::string(root) + "/" + verb;
  }
  if (cfg.out_dir.empty())
    throw ConfigError("no output directory: pass --out, set [output] dir, "
                      "or export ATTNPOSE_OUT_ROOT");
  if (cfg.deterministic) kernels::set_parallel(false);
  return cfg;
}

void write_config_echo(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream out(fs::path(cfg.out_dir) / "config_resolved.cfg");
  out << serialize_config(cfg);
  if (!out) throw Error("cannot write config echo in " + cfg.out_dir);
}

std::vector<DatasetSample> load_dataset(const RunConfig& cfg) {
  if (cfg.data_root.empty()) throw ConfigError("no dataset: pass --data or set [data] root");
  fs::path manifest = fs::path(cfg.data_root) / "manifest.txt";
  if (fs::exists(fs::path(cfg.data_root) / "TrainSplit.txt") ||
      !fs::exists(manifest))
    return load_seven_scenes_style(cfg.data_root, cfg.split);
  return load_manifest(manifest.string());
}

PoseNetwork restore_model(const RunConfig& cfg) {
  if (cfg.checkpoint.empty())
    throw ConfigError("no checkpoint: pass --checkpoint or set [data] checkpoint");
  CheckpointInfo info = read_checkpoint_info(cfg.checkpoint);
  PoseNetwork model(info.encoder);
  load_checkpoint_weights(cfg.checkpoint, model);
  return model;
}

int cmd_synth(const Args& a) {
  RunConfig cfg = resolve_config(a, "synth-data", Split::kAll);
  if (a.single_wall) cfg.scene.textured_walls = 1 << 2;
  auto samples = generate_synthetic_scene(cfg.scene_frames, cfg.train.seed, cfg.scene);
  write_seven_scenes_style(samples, cfg.out_dir);
  write_config_echo(cfg);
  printf("wrote %d frames (%dx%d) to %s\n", cfg.scene_frames, cfg.scene.width, cfg.scene.height,
         cfg.out_dir.c_str());
  return 0;
}

int cmd_train(const Args& a) {
  RunConfig cfg = resolve_config(a, "train", Split::kTrain);
  write_config_echo(cfg);
  auto data = load_dataset(cfg);

  PoseNetwork model(cfg.encoder);
  Rng init_rng(Rng::mix(cfg.train.seed, 0x1247));
  model.init(init_rng);

  Trainer trainer(model, cfg.train, cfg.preprocess);
  if (!a.resume.empty()) trainer.resume_from(a.resume);

  std::ofstream log_file(fs::path(cfg.out_dir) / "train_log.txt");
  if (!log_file) throw Error("cannot write training log in " + cfg.out_dir);
  TeeBuf tee(log_file.rdbuf(), std::cout.rdbuf());
  std::ostream log(&tee);
  trainer.train(data, log);
  log.flush();

  std::string ckpt = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
  trainer.save(ckpt);
  printf("trained %d epochs on %zu frames; checkpoint: %s\n", trainer.epochs_done(), data.size(),
         ckpt.c_str());
  return 0;
}

int cmd_eval(const Args& a) {
  RunConfig cfg = resolve_config(a, "eval", Split::kTest);
  write_config_echo(cfg);
  auto data = load_dataset(cfg);
  PoseNetwork model = restore_model(cfg);

  MetricsReport report = evaluate(model, data, cfg.preprocess);
  std::ofstream(fs::path(cfg.out_dir) / "metrics.json") << report.serialize();
  std::string line = report.summary_line();
  std::ofstream(fs::path(cfg.out_dir) / "summary.txt") << line << "\n";
  printf("%s\n", line.c_str());
  return 0;
}

int cmd_analyze(const Args& a) {
  RunConfig cfg = resolve_config(a, "analyze", Split::kTest);
  write_config_echo(cfg);
  auto data = load_dataset(cfg);
  if (data.empty()) throw ConfigError("analysis needs a non-empty dataset");
  PoseNetwork model = restore_model(cfg);

  std::vector<Tensor> frames;
  frames.reserve(data.size());
  for (const auto& s : data) frames.push_back(preprocess(s.image, cfg.preprocess, false, 0));

  if (a.mode == "saliency") {
    if (a.frame < 0 || a.frame >= static_cast<int>(frames.size()))
      throw ConfigError("--frame out of range");
    Tensor map = saliency_map(model, frames[a.frame]);
    std::string stem = "saliency_" + std::to_string(a.frame);
    std::ofstream(fs::path(cfg.out_dir) / (stem + ".txt")) << saliency_to_text(map);
    Image vis(map.dim(1), map.dim(0));
    for (int y = 0; y < map.dim(0); ++y)
      for (int x = 0; x < map.dim(1); ++x) {
        auto v = static_cast<uint8_t>(map.at(y, x) * 255.0 + 0.5);
        vis.at(y, x, 0) = vis.at(y, x, 1) = vis.at(y, x, 2) = v;
      }
    write_image(vis, (fs::path(cfg.out_dir) / (stem + ".png")).string());
    printf("saliency for frame %d written to %s\n", a.frame, cfg.out_dir.c_str());
  } else if (a.mode == "distances") {
    if (a.anchor < 0 || a.anchor >= static_cast<int>(frames.size()))
      throw ConfigError("--anchor out of range");
    auto dist = feature_distances(model, frames, a.anchor, a.pre_attention);
    std::ofstream out(fs::path(cfg.out_dir) / "distances.txt");
    for (size_t i = 0; i < dist.size(); ++i) {
      char line[160];
      snprintf(line, sizeof(line), "%zu %s %d %.17g\n", i, data[i].sequence_id.c_str(),
               data[i].frame_index, dist[i]);
      out << line;
    }
    printf("feature distances for %zu frames written to %s\n", dist.size(), cfg.out_dir.c_str());
  } else {  // trajectory; the option parser restricts the mode set
    std::vector<Vec3> gt, pred;
    const int chunk = 32;
    int n = static_cast<int>(frames.size());
    for (int start = 0; start < n; start += chunk) {
      int end = std::min(n, start + chunk);
      Tensor batch({end - start, 3, cfg.preprocess.crop, cfg.preprocess.crop});
      for (int i = start; i < end; ++i)
        std::copy(frames[i].data(), frames[i].data() + frames[i].size(),
                  batch.data() + static_cast<int64_t>(i - start) * frames[i].size());
      BatchPoseOutput out = model.forward(batch, false, nullptr);
      for (int i = start; i < end; ++i) {
        gt.push_back(data[i].pose.p);
        pred.push_back(out.item(i - start).p);
      }
    }
    std::string path = (fs::path(cfg.out_dir) / "trajectory.svg").string();
    trajectory_plot(gt, pred, path);
    printf("trajectory overlay written to %s\n", path.c_str());
  }
  return 0;
}

int cmd_ablate(const Args& a) {
  RunConfig cfg = resolve_config(a, "ablate", Split::kTrain);
  write_config_echo(cfg);
  auto train_data = load_dataset(cfg);
  RunConfig eval_cfg = cfg;
  eval_cfg.split = Split::kTest;
  auto eval_data = load_dataset(eval_cfg);

  auto entries = run_ablation(train_data, eval_data, cfg.encoder, cfg.train, cfg.preprocess,
                              (fs::path(cfg.out_dir) / "logs").string());
  std::string table = ablation_table(entries);
  std::ofstream(fs::path(cfg.out_dir) / "ablation.txt") << table;
  printf("%s", table.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"camera pose regression toolkit"};
  app.require_subcommand(1);

  Args train_args, eval_args, analyze_args, ablate_args, synth_args;

  CLI::App* train_cmd = app.add_subcommand("train", "train a pose network");
  add_common_options(train_cmd, train_args);
  train_args.o_epochs = train_cmd->add_option("--epochs", train_args.epochs, "epoch budget");
  train_args.o_batch =
      train_cmd->add_option("--batch-size", train_args.batch_size, "images per step");
  train_args.o_temporal =
      train_cmd->add_flag("--temporal", train_args.temporal, "train on frame triplets");
  train_cmd->add_option("--resume", train_args.resume, "checkpoint to continue from");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common_options(eval_cmd, eval_args);
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file");
  eval_args.o_split =
      eval_cmd->add_option("--split", eval_args.split, "dataset split (train|test|all)");

  CLI::App* analyze_cmd = app.add_subcommand("analyze", "model diagnostics");
  add_common_options(analyze_cmd, analyze_args);
  analyze_cmd->add_option("--checkpoint", analyze_args.checkpoint, "checkpoint file");
  analyze_cmd->add_option("--mode", analyze_args.mode, "saliency | distances | trajectory")
      ->check(CLI::IsMember({"saliency", "distances", "trajectory"}));
  analyze_cmd->add_option("--frame", analyze_args.frame, "frame index for saliency");
  analyze_cmd->add_option("--anchor", analyze_args.anchor, "anchor index for distances");
  analyze_cmd->add_flag("--pre-attention", analyze_args.pre_attention,
                        "use features from before the attention block");
  analyze_args.o_split =
      analyze_cmd->add_option("--split", analyze_args.split, "dataset split (train|test|all)");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "compare model variants");
  add_common_options(ablate_cmd, ablate_args);
  ablate_args.o_epochs = ablate_cmd->add_option("--epochs", ablate_args.epochs, "epoch budget");
  ablate_args.o_batch =
      ablate_cmd->add_option("--batch-size", ablate_args.batch_size, "images per step");

  CLI::App* synth_cmd = app.add_subcommand("synth-data", "render a synthetic dataset");
  add_common_options(synth_cmd, synth_args);
  synth_args.o_frames = synth_cmd->add_option("--frames", synth_args.frames, "frame count");
  synth_args.o_width = synth_cmd->add_option("--width", synth_args.width, "image width");
  synth_args.o_height = synth_cmd->add_option("--height", synth_args.height, "image height");
  synth_cmd->add_flag("--single-wall", synth_args.single_wall,
                      "texture only one wall of the scene");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (analyze_cmd->parsed()) return cmd_analyze(analyze_args);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args);
    if (synth_cmd->parsed()) return cmd_synth(synth_args);
  } catch (const CheckpointVersionError& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const CheckpointCorruptError& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
