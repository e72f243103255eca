#pragma once

// Training loop, Adam optimizer, versioned checkpoints, and evaluation.
//
// Checkpoints are single binary files. They open with a magic string and a
// format version; a version mismatch raises CheckpointVersionError before
// any state is touched, and truncation or checksum failure raises
// CheckpointCorruptError. Every learnable (network weights plus the two loss
// weighting scalars), the optimizer moments, the config echo, and the seed
// round-trip bit-identically.
//
// All epoch-level randomness (shuffle order, crop/jitter draws, dropout) is
// derived from (seed, epoch), so training resumed from a checkpoint follows
// the exact loss curve of an uninterrupted run.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "attnpose/data.hpp"
#include "attnpose/layers.hpp"
#include "attnpose/loss.hpp"
#include "attnpose/metrics.hpp"
#include "attnpose/model.hpp"

namespace attnpose {

inline constexpr uint32_t kCheckpointVersion = 1;

struct TrainConfig {
  double learning_rate = 5e-5;
  int batch_size = 64;
  double beta0 = 0.0;
  double gamma0 = -3.0;
  int epochs = 0;  // required; zero is rejected so runs state their budget
  uint64_t seed = 0;
  bool temporal = false;
  TemporalConfig temporal_cfg;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2, double eps);

  // One update from the gradients currently stored on the parameters.
  void step();

  void set_learning_rate(double lr) { lr_ = lr; }
  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }

  size_t size() const { return params_.size(); }
  Parameter* param(size_t i) { return params_[i]; }
  std::vector<double>& first_moment(size_t i) { return m_[i]; }
  std::vector<double>& second_moment(size_t i) { return v_[i]; }

 private:
  std::vector<Parameter*> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

struct CheckpointInfo {
  EncoderConfig encoder;
  TrainConfig train;
  int epochs_done = 0;
};

CheckpointInfo read_checkpoint_info(const std::string& path);

// Restores network weights only (no optimizer state); the model must have
// been built from the checkpoint's encoder config.
void load_checkpoint_weights(const std::string& path, PoseNetwork& model);

class Trainer {
 public:
  Trainer(PoseNetwork& model, const TrainConfig& cfg, const PreprocessConfig& preprocess);

  // Runs epochs [epochs_done, cfg.epochs), appending one
  // `epoch step loss beta gamma` line per optimizer step to `log`.
  void train(const std::vector<DatasetSample>& data, std::ostream& log);

  void save(const std::string& path);
  void resume_from(const std::string& path);

  LossState loss_state() const;
  int epochs_done() const { return epochs_done_; }
  Adam& optimizer() { return opt_; }

 private:
  void train_plain(const std::vector<DatasetSample>& data, std::ostream& log, int epoch);
  void train_temporal(const std::vector<DatasetSample>& data, std::ostream& log, int epoch);
  double step_batch(const std::vector<const DatasetSample*>& batch, bool temporal, int epoch,
                    int step, Rng& dropout_rng);

  PoseNetwork& model_;
  TrainConfig cfg_;
  PreprocessConfig preprocess_;
  Parameter loss_weights_;  // [beta, gamma], optimized jointly with the network
  Adam opt_;
  int epochs_done_ = 0;
};

// Center crop, no jitter, dropout inactive; deterministic for a fixed model
// and dataset. Throws ConfigError on an empty dataset.
MetricsReport evaluate(PoseNetwork& model, const std::vector<DatasetSample>& samples,
                       const PreprocessConfig& preprocess);

}  // namespace attnpose
