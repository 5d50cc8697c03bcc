#include <doctest.h>

#include <stdexcept>

#include "disvae/config.hpp"

using namespace disvae;

TEST_CASE("defaults describe the toy setup") {
  const TrainConfig c;
  CHECK(c.encoder_hidden == std::vector<std::size_t>{32, 64, 64});
  CHECK(c.n_gm == 3);
  CHECK(c.learning_rate == 0.0005);
  CHECK(c.beta1 == 0.0);
  CHECK(c.beta2 == 0.9);
  CHECK(c.lambda_lkd == 0.1);
  CHECK(c.lambda_kl == 5.0);
  CHECK(c.lambda_rec == 0.5);
  CHECK(c.sigma_c_decay_factor == 0.01);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("derived loss weights follow the dimensions") {
  TrainConfig c;
  c.data_dim = 4;
  c.dim_z_u = 8;
  c.derive_loss_weights();
  CHECK(c.lambda_kl == doctest::Approx(2.5));
  CHECK(c.lambda_rec == doctest::Approx(0.125));

  const TrainConfig parsed = parse_config("[model]\ndata_dim = 5\ndim_z_u = 4\n");
  CHECK(parsed.lambda_kl == doctest::Approx(2.0));
  CHECK(parsed.lambda_rec == doctest::Approx(0.25));
  CHECK(parse_config("[model]\ndata_dim = 5\n[loss]\nlambda_kl = 1.5\n").lambda_kl == 1.5);
}

TEST_CASE("format and parse round-trip") {
  TrainConfig c;
  c.encoder_hidden = {7, 9};
  c.activation = Activation::kTanh;
  c.mode = TrainMode::kBaselineCvaeGan;
  c.learning_rate = 0.1 + 0.2;
  c.rng_seed = 123456789012345ULL;
  c.lambda_lkd = 1.0 / 3.0;
  CHECK(parse_config(format_config(c)) == c);
  CHECK(parse_config("") == TrainConfig{});
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_AS(parse_config("[model]\nbogus = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("loose = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[model]\nnum_classes = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[optimizer]\nbeta2 = 1.0\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[train]\nepochs = 0\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[train]\nmode = sideways\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[train]\nbatch_size = many\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[train]\nepochs = -1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[optimizer]\nlearning_rate = 1e-3x\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[loss]\nlambda_kl = -1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[model]\nencoder_hidden = 4,x\n"), std::invalid_argument);
}

TEST_CASE("mode and activation names") {
  for (auto m : {TrainMode::kFull, TrainMode::kSemisupervisedFinetune, TrainMode::kBaselineCvaeGan}) {
    CHECK(parse_train_mode(to_string(m)) == m);
  }
  CHECK(to_string(TrainMode::kSemisupervisedFinetune) == "semisupervised-finetune");
  CHECK(parse_activation("tanh") == Activation::kTanh);
}
