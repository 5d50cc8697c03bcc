#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace disvae {

enum class TrainMode { kFull, kSemisupervisedFinetune, kBaselineCvaeGan };
enum class Activation { kRelu, kTanh };

std::string to_string(TrainMode mode);
std::string to_string(Activation act);
TrainMode parse_train_mode(const std::string& s);
Activation parse_activation(const std::string& s);

struct TrainConfig {
  // model
  std::size_t data_dim = 2;
  std::size_t dim_z_s = 2;
  std::size_t dim_z_u = 2;
  std::size_t num_classes = 3;
  std::vector<std::size_t> encoder_hidden{32, 64, 64};
  std::vector<std::size_t> decoder_hidden{64, 64, 32};
  std::vector<std::size_t> classifier_hidden{64};
  std::vector<std::size_t> discriminator_hidden{32, 64, 64};
  Activation activation = Activation::kRelu;

  // schedule
  std::size_t n_gm = 3;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  std::uint64_t rng_seed = 0;
  TrainMode mode = TrainMode::kFull;

  // optimizer
  double learning_rate = 0.0005;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double adam_eps = 1e-8;
  double sigma_c_decay_factor = 0.01;
  // Sigma_c uses the decayed rate once this many epochs have completed.
  std::size_t sigma_c_decay_epoch = 2;

  // loss weights; lambda_kl = 10 / data_dim and lambda_rec = 1 / dim_z_u
  double lambda_lkd = 0.1;
  double lambda_kl = 5.0;
  double lambda_rec = 0.5;

  // Recomputes lambda_kl and lambda_rec from the current dimensions.
  void derive_loss_weights();
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Flat "key = value" text with [model], [train], [optimizer] and [loss]
// sections. Keys absent from the text keep their defaults; the loss weights
// that depend on dimensions are derived unless given explicitly.
TrainConfig parse_config(const std::string& text);
std::string format_config(const TrainConfig& config);
TrainConfig load_config(const std::string& path);

}  // namespace disvae
