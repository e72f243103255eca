#include "attnpose/ablate.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace attnpose {

std::vector<AblationEntry> run_ablation(const std::vector<DatasetSample>& train_data,
                                        const std::vector<DatasetSample>& eval_data,
                                        EncoderConfig encoder, TrainConfig train,
                                        const PreprocessConfig& preprocess,
                                        const std::string& log_dir) {
  struct Variant {
    const char* name;
    bool attention;
    bool temporal;
  };
  const Variant variants[] = {
      {"basic", false, false},
      {"attention", true, false},
      {"attention+temporal", true, true},
  };

  std::vector<AblationEntry> out;
  for (const Variant& v : variants) {
    EncoderConfig enc = encoder;
    enc.use_attention = v.attention;
    TrainConfig tc = train;
    tc.temporal = v.temporal;

    PoseNetwork model(enc);
    Rng init_rng(Rng::mix(tc.seed, 0x1247));
    model.init(init_rng);

    std::ofstream file_log;
    std::ostringstream null_log;
    std::ostream* log = &null_log;
    if (!log_dir.empty()) {
      std::filesystem::create_directories(log_dir);
      file_log.open(std::filesystem::path(log_dir) / (std::string(v.name) + ".log"));
      log = &file_log;
    }

    Trainer trainer(model, tc, preprocess);
    trainer.train(train_data, *log);
    out.push_back({v.name, evaluate(model, eval_data, preprocess)});
  }
  return out;
}

std::string ablation_table(const std::vector<AblationEntry>& entries) {
  std::ostringstream os;
  char line[160];
  snprintf(line, sizeof(line), "%-20s %14s %14s %14s %14s\n", "variant", "median_pos_m",
           "median_rot_deg", "mean_pos_m", "mean_rot_deg");
  os << line;
  for (const AblationEntry& e : entries) {
    snprintf(line, sizeof(line), "%-20s %14.4f %14.3f %14.4f %14.3f\n", e.variant.c_str(),
             e.report.median_position_m(), e.report.median_rotation_deg(),
             e.report.mean_position_m(), e.report.mean_rotation_deg());
    os << line;
  }
  return os.str();
}

}  // namespace attnpose
