#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "attnpose/analysis.hpp"
#include "attnpose/data.hpp"
#include "attnpose/errors.hpp"
#include "attnpose/train.hpp"

using namespace attnpose;
namespace fs = std::filesystem;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.backbone = Backbone::kTinyResidual;
  cfg.feature_dim = 32;
  cfg.attention_ratio = 8;
  cfg.use_attention = true;
  cfg.dropout_rate = 0.0;
  return cfg;
}

PreprocessConfig tiny_preprocess() {
  PreprocessConfig cfg;
  cfg.rescale_short_side = 24;
  cfg.crop = 24;
  return cfg;
}

TrainConfig tiny_train(int epochs, uint64_t seed = 5) {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 8;
  cfg.epochs = epochs;
  cfg.seed = seed;
  return cfg;
}

std::vector<DatasetSample> tiny_dataset(int frames = 12) {
  SceneConfig scene;
  scene.width = 48;
  scene.height = 36;
  return generate_synthetic_scene(frames, 99, scene);
}

PoseNetwork seeded_model(const EncoderConfig& cfg, uint64_t seed = 17) {
  PoseNetwork model(cfg);
  Rng rng(seed);
  model.init(rng);
  return model;
}

std::vector<std::vector<double>> snapshot(PoseNetwork& model) {
  std::vector<std::vector<double>> out;
  for (Parameter* p : model.params())
    out.emplace_back(p->value.data(), p->value.data() + p->value.size());
  return out;
}

fs::path temp_file(const char* name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove(p);
  return p;
}

}  // namespace

TEST_CASE("training logs are machine-parseable and seed-deterministic") {
  auto data = tiny_dataset();
  std::ostringstream log_a, log_b;

  {
    PoseNetwork model = seeded_model(tiny_encoder());
    Trainer trainer(model, tiny_train(2), tiny_preprocess());
    trainer.train(data, log_a);
  }
  {
    PoseNetwork model = seeded_model(tiny_encoder());
    Trainer trainer(model, tiny_train(2), tiny_preprocess());
    trainer.train(data, log_b);
  }
  CHECK(log_a.str() == log_b.str());
  CHECK(!log_a.str().empty());

  std::istringstream lines(log_a.str());
  std::string line;
  int count = 0, last_epoch = -1;
  while (std::getline(lines, line)) {
    std::istringstream ls(line);
    int epoch, step;
    double loss, beta, gamma;
    REQUIRE((ls >> epoch >> step >> loss >> beta >> gamma));
    std::string extra;
    CHECK(!(ls >> extra));
    CHECK(std::isfinite(loss));
    CHECK(epoch >= last_epoch);
    last_epoch = epoch;
    ++count;
  }
  CHECK(count == 4);  // 12 frames / batch 8 -> 2 steps, 2 epochs
  CHECK(last_epoch == 1);
}

TEST_CASE("zero learning rate leaves every weight unchanged") {
  auto data = tiny_dataset(8);
  PoseNetwork model = seeded_model(tiny_encoder());
  auto before = snapshot(model);

  TrainConfig cfg = tiny_train(1);
  cfg.learning_rate = 0.0;
  Trainer trainer(model, cfg, tiny_preprocess());
  std::ostringstream log;
  trainer.train(data, log);

  auto after = snapshot(model);
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
  CHECK(trainer.loss_state().beta == 0.0);
  CHECK(trainer.loss_state().gamma == -3.0);
}

TEST_CASE("training moves the loss weights off their initial values") {
  auto data = tiny_dataset(8);
  PoseNetwork model = seeded_model(tiny_encoder());
  Trainer trainer(model, tiny_train(1), tiny_preprocess());
  std::ostringstream log;
  trainer.train(data, log);
  CHECK(trainer.loss_state().beta != 0.0);
  CHECK(trainer.loss_state().gamma != -3.0);
}

TEST_CASE("checkpoints round-trip bit-identically") {
  auto data = tiny_dataset();
  fs::path path = temp_file("attnpose_ckpt.bin");

  PoseNetwork model = seeded_model(tiny_encoder());
  TrainConfig cfg = tiny_train(2, 31);
  Trainer trainer(model, cfg, tiny_preprocess());
  std::ostringstream log;
  trainer.train(data, log);
  trainer.save(path.string());

  CheckpointInfo info = read_checkpoint_info(path.string());
  CHECK(info.encoder.backbone == Backbone::kTinyResidual);
  CHECK(info.encoder.feature_dim == 32);
  CHECK(info.train.seed == 31);
  CHECK(info.train.epochs == 2);
  CHECK(info.epochs_done == 2);

  PoseNetwork restored(info.encoder);
  load_checkpoint_weights(path.string(), restored);
  auto a = snapshot(model), b = snapshot(restored);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  MetricsReport ra = evaluate(model, data, tiny_preprocess());
  MetricsReport rb = evaluate(restored, data, tiny_preprocess());
  CHECK(ra.serialize() == rb.serialize());
}

TEST_CASE("resumed training continues the exact loss curve") {
  auto data = tiny_dataset();
  fs::path path = temp_file("attnpose_resume.bin");

  std::ostringstream straight;
  PoseNetwork model_a = seeded_model(tiny_encoder());
  {
    Trainer trainer(model_a, tiny_train(4), tiny_preprocess());
    trainer.train(data, straight);
  }

  std::ostringstream first_half, second_half;
  PoseNetwork model_b = seeded_model(tiny_encoder());
  {
    Trainer trainer(model_b, tiny_train(2), tiny_preprocess());
    trainer.train(data, first_half);
    trainer.save(path.string());
  }
  PoseNetwork model_c = seeded_model(tiny_encoder(), 555);  // init overwritten by resume
  {
    Trainer trainer(model_c, tiny_train(4), tiny_preprocess());
    trainer.resume_from(path.string());
    CHECK(trainer.epochs_done() == 2);
    trainer.train(data, second_half);
  }

  CHECK(first_half.str() + second_half.str() == straight.str());
  auto a = snapshot(model_a), c = snapshot(model_c);
  REQUIRE(a.size() == c.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == c[i]);
}

TEST_CASE("checkpoint version and corruption are distinct explicit errors") {
  auto data = tiny_dataset(6);
  fs::path path = temp_file("attnpose_ckpt_bad.bin");
  PoseNetwork model = seeded_model(tiny_encoder());
  Trainer trainer(model, tiny_train(1), tiny_preprocess());
  std::ostringstream log;
  trainer.train(data, log);
  trainer.save(path.string());

  auto read_bytes = [&] {
    std::ifstream in(path, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  };
  auto write_bytes = [](const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };
  std::vector<char> good = read_bytes();

  SUBCASE("future version is rejected without partial loading") {
    std::vector<char> bumped = good;
    bumped[8] = 99;  // version field follows the 8-byte magic
    fs::path p2 = temp_file("attnpose_ckpt_v99.bin");
    write_bytes(p2, bumped);
    PoseNetwork fresh = seeded_model(tiny_encoder(), 1234);
    auto before = snapshot(fresh);
    CHECK_THROWS_AS(load_checkpoint_weights(p2.string(), fresh), CheckpointVersionError);
    CHECK(snapshot(fresh) == before);
  }

  SUBCASE("truncation is reported as corruption") {
    std::vector<char> cut(good.begin(), good.begin() + good.size() / 2);
    fs::path p2 = temp_file("attnpose_ckpt_cut.bin");
    write_bytes(p2, cut);
    PoseNetwork fresh = seeded_model(tiny_encoder(), 1234);
    CHECK_THROWS_AS(load_checkpoint_weights(p2.string(), fresh), CheckpointCorruptError);
  }

  SUBCASE("bit flips fail the checksum") {
    std::vector<char> flipped = good;
    flipped[flipped.size() / 2] ^= 0x40;
    fs::path p2 = temp_file("attnpose_ckpt_flip.bin");
    write_bytes(p2, flipped);
    CHECK_THROWS_AS(read_checkpoint_info(p2.string()), CheckpointCorruptError);
  }

  SUBCASE("unrelated files are rejected") {
    fs::path p2 = temp_file("attnpose_ckpt_junk.bin");
    std::ofstream(p2) << "not a checkpoint";
    CHECK_THROWS_AS(read_checkpoint_info(p2.string()), CheckpointCorruptError);
  }
}

TEST_CASE("non-finite losses abort and name the batch") {
  auto data = tiny_dataset(6);
  PoseNetwork model = seeded_model(tiny_encoder());
  // Poison a head weight; anything earlier could be masked by a ReLU.
  for (Parameter* p : model.params())
    if (p->name == "reg.head_p.w") p->value[0] = std::numeric_limits<double>::quiet_NaN();

  Trainer trainer(model, tiny_train(1), tiny_preprocess());
  std::ostringstream log;
  try {
    trainer.train(data, log);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    std::string msg = e.what();
    CHECK(msg.find("epoch 0") != std::string::npos);
    CHECK(msg.find("seq-01/frame-") != std::string::npos);
  }
}

TEST_CASE("trainer validates its configuration") {
  auto data = tiny_dataset(6);
  PoseNetwork model = seeded_model(tiny_encoder());

  TrainConfig no_epochs = tiny_train(1);
  no_epochs.epochs = 0;
  CHECK_THROWS_AS(Trainer(model, no_epochs, tiny_preprocess()), ConfigError);

  TrainConfig bad_batch = tiny_train(1);
  bad_batch.batch_size = 0;
  CHECK_THROWS_AS(Trainer(model, bad_batch, tiny_preprocess()), ConfigError);

  TrainConfig bad_lr = tiny_train(1);
  bad_lr.learning_rate = -1.0;
  CHECK_THROWS_AS(Trainer(model, bad_lr, tiny_preprocess()), ConfigError);

  Trainer ok(model, tiny_train(1), tiny_preprocess());
  std::ostringstream log;
  std::vector<DatasetSample> empty;
  CHECK_THROWS_AS(ok.train(empty, log), ConfigError);
}

TEST_CASE("temporal training consumes whole triplets") {
  auto data = tiny_dataset(12);
  PoseNetwork model = seeded_model(tiny_encoder());
  TrainConfig cfg = tiny_train(1);
  cfg.temporal = true;
  cfg.temporal_cfg.frame_spacing = 2;
  cfg.batch_size = 9;  // three triplets per step

  Trainer trainer(model, cfg, tiny_preprocess());
  std::ostringstream log;
  trainer.train(data, log);

  // 12 frames, spacing 2 -> 8 triplets -> ceil(8/3) = 3 steps.
  int steps = 0;
  std::istringstream lines(log.str());
  std::string line;
  while (std::getline(lines, line)) ++steps;
  CHECK(steps == 3);
}

TEST_CASE("temporal training rejects sequences with no triplets") {
  auto data = tiny_dataset(4);
  PoseNetwork model = seeded_model(tiny_encoder());
  TrainConfig cfg = tiny_train(1);
  cfg.temporal = true;
  cfg.temporal_cfg.frame_spacing = 10;
  Trainer trainer(model, cfg, tiny_preprocess());
  std::ostringstream log;
  CHECK_THROWS_AS(trainer.train(data, log), ConfigError);
}

TEST_CASE("evaluation is deterministic and rejects empty input") {
  auto data = tiny_dataset(6);
  PoseNetwork model = seeded_model(tiny_encoder());

  MetricsReport a = evaluate(model, data, tiny_preprocess());
  MetricsReport b = evaluate(model, data, tiny_preprocess());
  CHECK(a.frames() == 6);
  CHECK(a.serialize() == b.serialize());
  for (double e : a.position_errors_m) CHECK(std::isfinite(e));
  for (double e : a.rotation_errors_deg) {
    CHECK(e >= 0.0);
    CHECK(e <= 180.0);
  }

  std::vector<DatasetSample> empty;
  CHECK_THROWS_AS(evaluate(model, empty, tiny_preprocess()), ConfigError);
}

TEST_CASE("evaluation does not touch the weights") {
  auto data = tiny_dataset(4);
  PoseNetwork model = seeded_model(tiny_encoder());
  uint64_t before = weights_fingerprint(model);
  evaluate(model, data, tiny_preprocess());
  CHECK(weights_fingerprint(model) == before);
}
