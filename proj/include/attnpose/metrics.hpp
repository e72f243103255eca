#pragma once

// Error statistics over evaluated trajectories: median/mean summaries, a
// per-sequence breakdown, and a serialized report that keeps the per-frame
// data so every summary can be recomputed from the file alone.

#include <string>
#include <vector>

namespace attnpose {

// Sorts a copy; even-length inputs return the midpoint of the two middle
// values. Throws ConfigError on empty input.
double median(std::vector<double> v);
double mean(const std::vector<double>& v);

// Rank correlation with average ranks on ties, in [-1, 1].
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct SequenceSummary {
  std::string sequence_id;
  int frames = 0;
  double median_position_m = 0.0;
  double mean_position_m = 0.0;
  double median_rotation_deg = 0.0;
  double mean_rotation_deg = 0.0;
};

struct MetricsReport {
  // Parallel per-frame arrays, in evaluation order.
  std::vector<std::string> sequence_ids;
  std::vector<int> frame_indices;
  std::vector<double> position_errors_m;
  std::vector<double> rotation_errors_deg;

  int frames() const { return static_cast<int>(position_errors_m.size()); }
  double median_position_m() const;
  double mean_position_m() const;
  double median_rotation_deg() const;
  double mean_rotation_deg() const;
  std::vector<SequenceSummary> per_sequence() const;

  // Compact "median position / median rotation" table cell, e.g. "0.105m, 3.62deg".
  std::string summary_line() const;

  // JSON document with summaries, the per-sequence breakdown, and the full
  // per-frame arrays. parse() inverts serialize() exactly.
  std::string serialize() const;
  static MetricsReport parse(const std::string& text);
};

}  // namespace attnpose
