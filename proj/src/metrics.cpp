#include "attnpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "json.hpp"

#include "attnpose/errors.hpp"

namespace attnpose {

double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of empty list");
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw ConfigError("mean of empty list");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("rank correlation needs equal-length lists");
  if (x.size() < 2) throw ConfigError("rank correlation needs at least two points");
  std::vector<double> rx = ranks(x), ry = ranks(y);
  double mx = mean(rx), my = mean(ry);
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0.0 || dy == 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

double MetricsReport::median_position_m() const { return median(position_errors_m); }
double MetricsReport::mean_position_m() const { return mean(position_errors_m); }
double MetricsReport::median_rotation_deg() const { return median(rotation_errors_deg); }
double MetricsReport::mean_rotation_deg() const { return mean(rotation_errors_deg); }

std::vector<SequenceSummary> MetricsReport::per_sequence() const {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (size_t i = 0; i < sequence_ids.size(); ++i) {
    auto& g = groups[sequence_ids[i]];
    g.first.push_back(position_errors_m[i]);
    g.second.push_back(rotation_errors_deg[i]);
  }
  std::vector<SequenceSummary> out;
  for (const auto& [id, g] : groups) {
    SequenceSummary s;
    s.sequence_id = id;
    s.frames = static_cast<int>(g.first.size());
    s.median_position_m = median(g.first);
    s.mean_position_m = mean(g.first);
    s.median_rotation_deg = median(g.second);
    s.mean_rotation_deg = mean(g.second);
    out.push_back(std::move(s));
  }
  return out;
}

std::string MetricsReport::summary_line() const {
  char buf[64];
  snprintf(buf, sizeof(buf), "%.3fm, %.2fdeg", median_position_m(), median_rotation_deg());
  return buf;
}

std::string MetricsReport::serialize() const {
  nlohmann::json doc;
  doc["frames"] = frames();
  doc["median_position_m"] = median_position_m();
  doc["mean_position_m"] = mean_position_m();
  doc["median_rotation_deg"] = median_rotation_deg();
  doc["mean_rotation_deg"] = mean_rotation_deg();
  nlohmann::json seqs = nlohmann::json::array();
  for (const SequenceSummary& s : per_sequence()) {
    seqs.push_back({{"sequence_id", s.sequence_id},
                    {"frames", s.frames},
                    {"median_position_m", s.median_position_m},
                    {"mean_position_m", s.mean_position_m},
                    {"median_rotation_deg", s.median_rotation_deg},
                    {"mean_rotation_deg", s.mean_rotation_deg}});
  }
  doc["sequences"] = std::move(seqs);
  doc["frame_sequence_ids"] = sequence_ids;
  doc["frame_indices"] = frame_indices;
  doc["position_errors_m"] = position_errors_m;
  doc["rotation_errors_deg"] = rotation_errors_deg;
  return doc.dump(2) + "\n";
}

MetricsReport MetricsReport::parse(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text);
  MetricsReport r;
  r.sequence_ids = doc.at("frame_sequence_ids").get<std::vector<std::string>>();
  r.frame_indices = doc.at("frame_indices").get<std::vector<int>>();
  r.position_errors_m = doc.at("position_errors_m").get<std::vector<double>>();
  r.rotation_errors_deg = doc.at("rotation_errors_deg").get<std::vector<double>>();
  return r;
}

}  // namespace attnpose
