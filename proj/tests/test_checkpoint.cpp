#include <doctest.h>

#include <string>

#include "disvae/checkpoint.hpp"
#include "test_support.hpp"

using namespace disvae;

namespace {

TrainConfig small_config(TrainMode mode = TrainMode::kFull) {
  TrainConfig c;
  c.encoder_hidden = {6, 6};
  c.decoder_hidden = {6, 6};
  c.classifier_hidden = {6};
  c.discriminator_hidden = {6, 6};
  c.batch_size = 16;
  c.epochs = 50;
  c.rng_seed = 5;
  c.mode = mode;
  return c;
}

void expect_field_error(const std::string& bytes, const std::string& field) {
  try {
    deserialize_checkpoint(bytes);
    FAIL("expected an error for field " << field);
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    CHECK_MESSAGE(what.find("checkpoint field '" + field + "'") != std::string::npos, what);
  }
}

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("fresh states round-trip exactly in every mode") {
  for (auto mode : {TrainMode::kFull, TrainMode::kSemisupervisedFinetune, TrainMode::kBaselineCvaeGan}) {
    const TrainState s = init_training(small_config(mode));
    const std::string bytes = serialize_checkpoint(s);
    CHECK(bytes.rfind("DISVAE1\n", 0) == 0);
    const TrainState back = deserialize_checkpoint(bytes);
    CHECK(back.config == s.config);
    CHECK(back.params == s.params);
    CHECK(back.baseline == s.baseline);
    CHECK(back.optimizers == s.optimizers);
    CHECK(back.rng == s.rng);
    CHECK(back.epoch == s.epoch);
    CHECK(serialize_checkpoint(back) == bytes);
  }
}

TEST_CASE("resuming from epoch 25 reproduces the uninterrupted run") {
  const TrainConfig c = small_config();
  const Dataset ds = generate_toy_dataset(20, 1);

  TrainState straight = init_training(c);
  std::string at_25;
  run_epochs(straight, ds, 0, [&](const TrainState& s) {
    if (s.epoch == 25) at_25 = serialize_checkpoint(s);
  });

  TrainState resumed = deserialize_checkpoint(at_25);
  CHECK(resumed.epoch == 25);
  CHECK(resumed.history.epochs.size() == 25);
  run_epochs(resumed, ds);
  CHECK(resumed.history == straight.history);
  CHECK(resumed.params == straight.params);
  CHECK(resumed.optimizers == straight.optimizers);
  CHECK(serialize_checkpoint(resumed) == serialize_checkpoint(straight));
}

TEST_CASE("baseline resume is exact") {
  TrainConfig c = small_config(TrainMode::kBaselineCvaeGan);
  c.epochs = 6;
  const Dataset ds = generate_toy_dataset(20, 2);
  TrainState straight = init_training(c);
  std::string at_3;
  run_epochs(straight, ds, 0, [&](const TrainState& s) {
    if (s.epoch == 3) at_3 = serialize_checkpoint(s);
  });
  TrainState resumed = deserialize_checkpoint(at_3);
  run_epochs(resumed, ds);
  CHECK(serialize_checkpoint(resumed) == serialize_checkpoint(straight));
}

TEST_CASE("files are written and read back") {
  disvae::testing::TempDir dir;
  const TrainState s = init_training(small_config());
  const auto path = dir.file("run/model.ckpt");
  save_checkpoint(path, s);
  CHECK(load_checkpoint(path).params == s.params);
  CHECK_THROWS(load_checkpoint(dir.file("missing.ckpt")));
}

TEST_CASE("corrupt checkpoints are refused with the offending field") {
  TrainState s = init_training(small_config());
  run_epochs(s, generate_toy_dataset(10, 3), 1);
  const std::string bytes = serialize_checkpoint(s);

  expect_field_error(replace_once(bytes, "DISVAE1", "DISVAE2"), "version");
  expect_field_error("hello\n", "version");
  expect_field_error(bytes.substr(0, bytes.size() - 8), "payload");
  expect_field_error(bytes + "xxxxxxxx", "payload");
  expect_field_error(bytes.substr(0, bytes.find("history")), "history");
  expect_field_error(replace_once(bytes, "tensor enc_s/w0 2 2 6", "tensor enc_s/w0 2 2 7"), "tensor enc_s/w0");
  expect_field_error(replace_once(bytes, "tensor enc_s/w0 ", "tensor enc_q/w0 "), "tensor enc_q/w0");
  expect_field_error(replace_once(bytes, "optimizers 7", "optimizers 6"), "optimizers");
  expect_field_error(replace_once(bytes, "epoch 1\n", "epoch one\n"), "epoch");

  // Truncation anywhere fails cleanly.
  for (std::size_t cut = 0; cut < bytes.size(); cut += bytes.size() / 97 + 1) {
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, cut)), std::runtime_error);
  }
}
