#include "attnpose/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "attnpose/errors.hpp"
#include "attnpose/kernels.hpp"

namespace attnpose {

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter* p = params_[i];
    kernels::adam_step(p->value.size(), p->value.data(), p->grad.data(), m_[i].data(),
                       v_[i].data(), lr_, beta1_, beta2_, eps_, bc1, bc2);
  }
}

namespace {

constexpr char kMagic[8] = {'A', 'T', 'P', 'C', 'K', 'P', 'T', '\0'};

uint64_t fnv1a(const uint8_t* data, size_t n) {
  uint64_t h = 14695981039346656037ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return h;
}

struct PayloadWriter {
  std::vector<uint8_t> bytes;

  template <typename T>
  void put(T v) {
    uint8_t buf[sizeof(T)];
    memcpy(buf, &v, sizeof(T));
    bytes.insert(bytes.end(), buf, buf + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<uint32_t>(static_cast<uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void put_doubles(const double* d, size_t n) {
    const uint8_t* raw = reinterpret_cast<const uint8_t*>(d);
    bytes.insert(bytes.end(), raw, raw + n * sizeof(double));
  }
};

struct PayloadReader {
  const uint8_t* data;
  size_t size;
  size_t off = 0;

  void need(size_t n) const {
    if (off + n > size) throw CheckpointCorruptError("checkpoint payload ends prematurely");
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    memcpy(&v, data + off, sizeof(T));
    off += sizeof(T);
    return v;
  }
  std::string get_string() {
    uint32_t n = get<uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(data + off), n);
    off += n;
    return s;
  }
  std::vector<double> get_doubles(size_t n) {
    need(n * sizeof(double));
    std::vector<double> v(n);
    memcpy(v.data(), data + off, n * sizeof(double));
    off += n * sizeof(double);
    return v;
  }
};

std::string fmt_double(double v) {
  char buf[40];
  snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string encode_header(const EncoderConfig& enc, const TrainConfig& train) {
  std::ostringstream os;
  os << "backbone " << to_string(enc.backbone) << "\n"
     << "feature_dim " << enc.feature_dim << "\n"
     << "attention_ratio " << enc.attention_ratio << "\n"
     << "use_attention " << (enc.use_attention ? 1 : 0) << "\n"
     << "dropout_rate " << fmt_double(enc.dropout_rate) << "\n"
     << "learning_rate " << fmt_double(train.learning_rate) << "\n"
     << "batch_size " << train.batch_size << "\n"
     << "beta0 " << fmt_double(train.beta0) << "\n"
     << "gamma0 " << fmt_double(train.gamma0) << "\n"
     << "epochs " << train.epochs << "\n"
     << "seed " << train.seed << "\n"
     << "temporal " << (train.temporal ? 1 : 0) << "\n"
     << "temporal_alpha " << fmt_double(train.temporal_cfg.temporal_alpha) << "\n"
     << "frame_spacing " << train.temporal_cfg.frame_spacing << "\n"
     << "adam_beta1 " << fmt_double(train.adam_beta1) << "\n"
     << "adam_beta2 " << fmt_double(train.adam_beta2) << "\n"
     << "adam_eps " << fmt_double(train.adam_eps) << "\n";
  return os.str();
}

void decode_header(const std::string& text, EncoderConfig& enc, TrainConfig& train) {
  std::istringstream is(text);
  std::string key, value;
  while (is >> key >> value) {
    if (key == "backbone")
      enc.backbone = backbone_from_string(value);
    else if (key == "feature_dim")
      enc.feature_dim = std::stoi(value);
    else if (key == "attention_ratio")
      enc.attention_ratio = std::stoi(value);
    else if (key == "use_attention")
      enc.use_attention = value == "1";
    else if (key == "dropout_rate")
      enc.dropout_rate = std::stod(value);
    else if (key == "learning_rate")
      train.learning_rate = std::stod(value);
    else if (key == "batch_size")
      train.batch_size = std::stoi(value);
    else if (key == "beta0")
      train.beta0 = std::stod(value);
    else if (key == "gamma0")
      train.gamma0 = std::stod(value);
    else if (key == "epochs")
      train.epochs = std::stoi(value);
    else if (key == "seed")
      train.seed = std::stoull(value);
    else if (key == "temporal")
      train.temporal = value == "1";
    else if (key == "temporal_alpha")
      train.temporal_cfg.temporal_alpha = std::stod(value);
    else if (key == "frame_spacing")
      train.temporal_cfg.frame_spacing = std::stoi(value);
    else if (key == "adam_beta1")
      train.adam_beta1 = std::stod(value);
    else if (key == "adam_beta2")
      train.adam_beta2 = std::stod(value);
    else if (key == "adam_eps")
      train.adam_eps = std::stod(value);
    else
      throw CheckpointCorruptError("unknown checkpoint header key: " + key);
  }
}

struct ParamRecord {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> m;
  std::vector<double> v;
};

struct ParsedCheckpoint {
  CheckpointInfo info;
  int64_t adam_steps = 0;
  std::map<std::string, ParamRecord> params;
};

ParsedCheckpoint parse_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) + sizeof(uint32_t) + sizeof(uint64_t))
    throw CheckpointCorruptError("checkpoint too small: " + path);
  if (memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointCorruptError("not a checkpoint file: " + path);

  uint32_t version;
  memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  if (version != kCheckpointVersion)
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) +
                                 " is incompatible (expected " +
                                 std::to_string(kCheckpointVersion) + ")");

  size_t payload_off = sizeof(kMagic) + sizeof(uint32_t);
  size_t payload_len = bytes.size() - payload_off - sizeof(uint64_t);
  uint64_t stored;
  memcpy(&stored, bytes.data() + payload_off + payload_len, sizeof(stored));
  if (fnv1a(bytes.data() + payload_off, payload_len) != stored)
    throw CheckpointCorruptError("checkpoint checksum mismatch: " + path);

  PayloadReader r{bytes.data() + payload_off, payload_len};
  ParsedCheckpoint out;
  decode_header(r.get_string(), out.info.encoder, out.info.train);
  out.info.epochs_done = r.get<int32_t>();
  out.adam_steps = r.get<int64_t>();

  uint32_t n_params = r.get<uint32_t>();
  for (uint32_t i = 0; i < n_params; ++i) {
    std::string name = r.get_string();
    ParamRecord rec;
    uint32_t rank = r.get<uint32_t>();
    int64_t count = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      int32_t dim = r.get<int32_t>();
      if (dim <= 0) throw CheckpointCorruptError("invalid shape in checkpoint");
      rec.shape.push_back(dim);
      count *= dim;
    }
    rec.data = r.get_doubles(static_cast<size_t>(count));
    rec.m = r.get_doubles(static_cast<size_t>(count));
    rec.v = r.get_doubles(static_cast<size_t>(count));
    out.params.emplace(std::move(name), std::move(rec));
  }
  if (r.off != payload_len) throw CheckpointCorruptError("trailing bytes in checkpoint payload");
  return out;
}

const ParamRecord& find_record(const ParsedCheckpoint& ck, const Parameter& p) {
  auto it = ck.params.find(p.name);
  if (it == ck.params.end())
    throw CheckpointCorruptError("checkpoint is missing parameter " + p.name);
  const ParamRecord& rec = it->second;
  std::vector<int> shape(p.value.shape().begin(), p.value.shape().end());
  if (rec.shape != shape)
    throw CheckpointCorruptError("checkpoint shape mismatch for parameter " + p.name);
  return rec;
}

std::string frame_label(const DatasetSample& s) {
  return s.sequence_id + "/frame-" + std::to_string(s.frame_index);
}

}  // namespace

CheckpointInfo read_checkpoint_info(const std::string& path) {
  return parse_checkpoint(path).info;
}

void load_checkpoint_weights(const std::string& path, PoseNetwork& model) {
  ParsedCheckpoint ck = parse_checkpoint(path);
  for (Parameter* p : model.params()) {
    const ParamRecord& rec = find_record(ck, *p);
    std::copy(rec.data.begin(), rec.data.end(), p->value.data());
  }
}

Trainer::Trainer(PoseNetwork& model, const TrainConfig& cfg, const PreprocessConfig& preprocess)
    : model_(model),
      cfg_(cfg),
      preprocess_(preprocess),
      loss_weights_("loss.weights", {2}),
      opt_([&] {
        std::vector<Parameter*> params = model.params();
        params.push_back(&loss_weights_);
        return params;
      }(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps) {
  if (cfg_.epochs <= 0) throw ConfigError("epochs must be set explicitly and be positive");
  if (cfg_.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(cfg_.learning_rate >= 0.0) || !std::isfinite(cfg_.learning_rate))
    throw ConfigError("learning rate must be finite and non-negative");
  loss_weights_.value[0] = cfg_.beta0;
  loss_weights_.value[1] = cfg_.gamma0;
}

LossState Trainer::loss_state() const {
  return LossState{loss_weights_.value[0], loss_weights_.value[1]};
}

double Trainer::step_batch(const std::vector<const DatasetSample*>& batch, bool temporal,
                           int epoch, int step, Rng& dropout_rng) {
  int n = static_cast<int>(batch.size());
  int crop = preprocess_.crop;
  Tensor images({n, 3, crop, crop});
  std::vector<Pose> targets;
  targets.reserve(n);
  for (int i = 0; i < n; ++i) {
    uint64_t sample_seed =
        Rng::mix(Rng::mix(Rng::mix(cfg_.seed, 2), static_cast<uint64_t>(epoch)),
                 static_cast<uint64_t>(batch[i]->frame_index) * 1000003ull +
                     std::hash<std::string>{}(batch[i]->sequence_id));
    Tensor t = preprocess(batch[i]->image, preprocess_, true, sample_seed);
    std::copy(t.data(), t.data() + t.size(), images.data() + static_cast<int64_t>(i) * t.size());
    targets.push_back(batch[i]->pose);
  }

  BatchPoseOutput out = model_.forward(images, true, &dropout_rng);
  LossState state = loss_state();
  LossGrads grads;
  try {
    grads = temporal ? temporal_batch_loss(out, targets, 3, state, cfg_.temporal_cfg)
                     : batch_loss(out, targets, state);
  } catch (const NumericError&) {
    grads.value = std::numeric_limits<double>::quiet_NaN();
  }
  if (!std::isfinite(grads.value)) {
    std::string names;
    for (const DatasetSample* s : batch) names += " " + frame_label(*s);
    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                       std::to_string(step) + ", batch:" + names);
  }

  model_.zero_grad();
  loss_weights_.zero_grad();
  model_.backward(grads.dp, grads.dlogq);
  loss_weights_.grad[0] = grads.dbeta;
  loss_weights_.grad[1] = grads.dgamma;
  opt_.step();
  return grads.value;
}

void Trainer::train_plain(const std::vector<DatasetSample>& data, std::ostream& log, int epoch) {
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(Rng::mix(Rng::mix(cfg_.seed, 1), static_cast<uint64_t>(epoch)));
  shuffle_rng.shuffle(order);
  Rng dropout_rng(Rng::mix(Rng::mix(cfg_.seed, 3), static_cast<uint64_t>(epoch)));

  int step = 0;
  for (size_t start = 0; start < order.size(); start += cfg_.batch_size, ++step) {
    size_t end = std::min(order.size(), start + cfg_.batch_size);
    std::vector<const DatasetSample*> batch;
    for (size_t i = start; i < end; ++i) batch.push_back(&data[order[i]]);
    double loss = step_batch(batch, false, epoch, step, dropout_rng);
    char line[128];
    snprintf(line, sizeof(line), "%d %d %.17g %.17g %.17g\n", epoch, step, loss,
             loss_weights_.value[0], loss_weights_.value[1]);
    log << line;
  }
}

void Trainer::train_temporal(const std::vector<DatasetSample>& data, std::ostream& log,
                             int epoch) {
  std::vector<std::array<int, 3>> tuples;
  size_t run_start = 0;
  for (size_t i = 1; i <= data.size(); ++i) {
    if (i == data.size() || data[i].sequence_id != data[run_start].sequence_id) {
      for (auto t : sample_triplets(static_cast<int>(i - run_start),
                                    cfg_.temporal_cfg.frame_spacing)) {
        int base = static_cast<int>(run_start);
        tuples.push_back({base + t[0], base + t[1], base + t[2]});
      }
      run_start = i;
    }
  }
  if (tuples.empty())
    throw ConfigError("temporal training needs at least one frame triplet; "
                      "sequences are shorter than 2*spacing+1");

  Rng shuffle_rng(Rng::mix(Rng::mix(cfg_.seed, 1), static_cast<uint64_t>(epoch)));
  shuffle_rng.shuffle(tuples);
  Rng dropout_rng(Rng::mix(Rng::mix(cfg_.seed, 3), static_cast<uint64_t>(epoch)));

  size_t per_batch = std::max<size_t>(1, static_cast<size_t>(cfg_.batch_size) / 3);
  int step = 0;
  for (size_t start = 0; start < tuples.size(); start += per_batch, ++step) {
    size_t end = std::min(tuples.size(), start + per_batch);
    std::vector<const DatasetSample*> batch;
    for (size_t i = start; i < end; ++i)
      for (int idx : tuples[i]) batch.push_back(&data[idx]);
    double loss = step_batch(batch, true, epoch, step, dropout_rng);
    char line[128];
    snprintf(line, sizeof(line), "%d %d %.17g %.17g %.17g\n", epoch, step, loss,
             loss_weights_.value[0], loss_weights_.value[1]);
    log << line;
  }
}

void Trainer::train(const std::vector<DatasetSample>& data, std::ostream& log) {
  if (data.empty()) throw ConfigError("cannot train on an empty dataset");
  for (int epoch = epochs_done_; epoch < cfg_.epochs; ++epoch) {
    if (cfg_.temporal)
      train_temporal(data, log, epoch);
    else
      train_plain(data, log, epoch);
    epochs_done_ = epoch + 1;
  }
}

void Trainer::save(const std::string& path) {
  PayloadWriter w;
  w.put_string(encode_header(model_.config(), cfg_));
  w.put<int32_t>(epochs_done_);
  w.put<int64_t>(opt_.step_count());
  w.put<uint32_t>(static_cast<uint32_t>(opt_.size()));
  for (size_t i = 0; i < opt_.size(); ++i) {
    Parameter* p = opt_.param(i);
    w.put_string(p->name);
    w.put<uint32_t>(static_cast<uint32_t>(p->value.rank()));
    for (int d = 0; d < p->value.rank(); ++d) w.put<int32_t>(p->value.dim(d));
    w.put_doubles(p->value.data(), p->value.size());
    w.put_doubles(opt_.first_moment(i).data(), opt_.first_moment(i).size());
    w.put_doubles(opt_.second_moment(i).data(), opt_.second_moment(i).size());
  }

  uint64_t checksum = fnv1a(w.bytes.data(), w.bytes.size());
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    uint32_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(w.bytes.data()),
              static_cast<std::streamsize>(w.bytes.size()));
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    if (!out) throw Error("checkpoint write failed: " + path);
  }
  std::filesystem::rename(tmp, path);
}

void Trainer::resume_from(const std::string& path) {
  ParsedCheckpoint ck = parse_checkpoint(path);
  for (size_t i = 0; i < opt_.size(); ++i) {
    Parameter* p = opt_.param(i);
    const ParamRecord& rec = find_record(ck, *p);
    std::copy(rec.data.begin(), rec.data.end(), p->value.data());
    opt_.first_moment(i) = rec.m;
    opt_.second_moment(i) = rec.v;
  }
  opt_.set_step_count(ck.adam_steps);
  epochs_done_ = ck.info.epochs_done;
}

MetricsReport evaluate(PoseNetwork& model, const std::vector<DatasetSample>& samples,
                       const PreprocessConfig& preprocess_cfg) {
  if (samples.empty()) throw ConfigError("cannot evaluate an empty dataset");
  MetricsReport report;
  int crop = preprocess_cfg.crop;
  const size_t chunk = 32;
  for (size_t start = 0; start < samples.size(); start += chunk) {
    size_t end = std::min(samples.size(), start + chunk);
    int n = static_cast<int>(end - start);
    Tensor images({n, 3, crop, crop});
    for (int i = 0; i < n; ++i) {
      Tensor t = preprocess(samples[start + i].image, preprocess_cfg, false, 0);
      std::copy(t.data(), t.data() + t.size(),
                images.data() + static_cast<int64_t>(i) * t.size());
    }
    BatchPoseOutput out = model.forward(images, false, nullptr);
    for (int i = 0; i < n; ++i) {
      const DatasetSample& s = samples[start + i];
      PoseNetworkOutput pred = out.item(i);
      report.sequence_ids.push_back(s.sequence_id);
      report.frame_indices.push_back(s.frame_index);
      report.position_errors_m.push_back(position_error(s.pose.p, pred.p));
      report.rotation_errors_deg.push_back(rotation_error(s.pose.q, pred.q));
    }
  }
  return report;
}

}  // namespace attnpose
