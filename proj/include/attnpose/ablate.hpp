#pragma once

// Back-to-back component ablation: trains the plain regressor, the
// attention-augmented one, and the attention+temporal variant under one
// budget, then evaluates each so the contribution of every component shows
// up in a single comparison table.

#include <string>
#include <vector>

#include "attnpose/data.hpp"
#include "attnpose/metrics.hpp"
#include "attnpose/model.hpp"
#include "attnpose/train.hpp"

namespace attnpose {

struct AblationEntry {
  std::string variant;
  MetricsReport report;
};

// Runs the three variants with identical seeds and budgets. When `log_dir`
// is non-empty each variant's training log lands in <log_dir>/<variant>.log.
std::vector<AblationEntry> run_ablation(const std::vector<DatasetSample>& train_data,
                                        const std::vector<DatasetSample>& eval_data,
                                        EncoderConfig encoder, TrainConfig train,
                                        const PreprocessConfig& preprocess,
                                        const std::string& log_dir = "");

// Fixed-width table, one row per variant: median/mean position and rotation.
std::string ablation_table(const std::vector<AblationEntry>& entries);

}  // namespace attnpose
