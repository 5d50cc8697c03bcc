#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "disvae/config.hpp"
#include "disvae/data.hpp"
#include "disvae/losses.hpp"
#include "disvae/models.hpp"
#include "disvae/rng.hpp"

namespace disvae {

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::string name;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
  double lr_multiplier = 1.0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct AdamSettings {
  double learning_rate = 0.0005;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double eps = 1e-8;

  static AdamSettings from(const TrainConfig& c) { return {c.learning_rate, c.beta1, c.beta2, c.adam_eps}; }
};

AdamState make_adam_state(std::string name, std::span<const Tensor* const> params);

// One bias-corrected Adam step, applied in place. Throws, naming the group,
// if any gradient is non-finite; nothing is modified in that case.
void adam_update(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
                 const AdamSettings& settings);

// ---------------------------------------------------------------------------
// Parameter groups

enum class ParamGroup { kPsi, kPhi, kTheta, kOmega, kThetaD, kMixtureMu, kMixtureLogVar };

inline constexpr ParamGroup kAllGroups[] = {ParamGroup::kPsi,   ParamGroup::kPhi,     ParamGroup::kTheta,
                                            ParamGroup::kOmega, ParamGroup::kThetaD,  ParamGroup::kMixtureMu,
                                            ParamGroup::kMixtureLogVar};

std::string group_name(ParamGroup g);
std::vector<Tensor*> group_tensors(NetworkParams& p, ParamGroup g);
std::vector<const Tensor*> group_tensors(const NetworkParams& p, ParamGroup g);

using GroupGradients = std::map<ParamGroup, std::vector<Tensor>>;

// ---------------------------------------------------------------------------
// cVAE-GAN baseline: one encoder q(z | x, c), decoder p(x | z, c) and the same
// label-conditioned discriminator.

struct BaselineParams {
  Mlp encoder;
  Mlp decoder;
  Mlp discriminator;
  std::size_t num_classes = 0;

  std::size_t latent_dim() const { return decoder.spec.input_dim - num_classes; }
  friend bool operator==(const BaselineParams&, const BaselineParams&) = default;
};

// Latent size is dim_z_s + dim_z_u so both models get the same code width.
BaselineParams build_baseline(const TrainConfig& config, Rng& rng);
Tensor baseline_decode(const BaselineParams& p, const Tensor& z, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Training state and history

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown losses;         // means over the epoch's joint steps
  double gm_stage_loss = 0.0;   // mean L_GM over the epoch's GM-stage steps
  double wall_seconds = 0.0;    // not part of equality or checkpoints

  friend bool operator==(const EpochRecord& a, const EpochRecord& b) {
    return a.epoch == b.epoch && a.losses == b.losses && a.gm_stage_loss == b.gm_stage_loss;
  }
};

struct TrainHistory {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;

  friend bool operator==(const TrainHistory& a, const TrainHistory& b) {
    return a.seed == b.seed && a.epochs == b.epochs;
  }
};

std::string history_csv(const TrainHistory& h);

struct TrainState {
  TrainConfig config;
  NetworkParams params;      // full and finetune modes
  BaselineParams baseline;   // baseline mode
  std::map<std::string, AdamState> optimizers;
  Rng rng;
  std::size_t epoch = 0;     // completed epochs
  TrainHistory history;
};

// Fresh parameters and optimizer state for config.mode, seeded by
// config.rng_seed.
TrainState init_training(const TrainConfig& config);

using EpochCallback = std::function<void(const TrainState&)>;

// Runs epochs state.epoch + 1 .. last_epoch (config.epochs when 0).
void run_epochs(TrainState& state, const Dataset& data, std::size_t last_epoch = 0,
                const EpochCallback& on_epoch = {});

struct TrainResult {
  NetworkParams params;
  TrainHistory history;
};

TrainResult train(const TrainConfig& config, const Dataset& labeled, const EpochCallback& on_epoch = {});

struct BaselineResult {
  BaselineParams params;
  TrainHistory history;
};

BaselineResult train_baseline_cvaegan(const TrainConfig& config, const Dataset& labeled,
                                      const EpochCallback& on_epoch = {});

// Continues training a pretrained model on unlabeled data with the mixture
// frozen and z_s regularized toward the moment-matched total Gaussian. Uses
// fresh optimizer state and config.epochs passes.
NetworkParams finetune_semisupervised(const NetworkParams& pretrained, const Dataset& unlabeled,
                                      const TrainConfig& config, const EpochCallback& on_epoch = {});
// Stateful form used by the CLI; `state` must hold a pretrained model.
void begin_finetune(TrainState& state, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Single steps, exposed for auditing

struct GmPass {
  GmLoss loss;
  GroupGradients grads;  // psi, mixture mu, mixture log-variance
};

GmPass gm_forward_backward(const NetworkParams& params, const Tensor& x, std::span<const int> labels,
                           const TrainConfig& config);

// One GM-stage update of psi, mu_c and Sigma_c.
GmLoss train_stage_gm(NetworkParams& params, std::map<std::string, AdamState>& optimizers, const Tensor& x,
                      std::span<const int> labels, const TrainConfig& config);

// Random draws consumed by one joint step, in the order they are taken.
struct JointNoise {
  Tensor eps;                    // n x dim_z_u
  Tensor z_s_prior;              // n x dim_z_s
  Tensor z_u_prior;              // n x dim_z_u
  std::vector<int> prior_labels; // class of each prior code
};

// Prior codes are drawn from p(z_s | c) for the given classes, or from the
// whole mixture (classes sampled from the priors) when `prior_classes` is
// empty.
JointNoise draw_joint_noise(const NetworkParams& params, std::size_t batch, std::span<const int> prior_classes,
                            const TrainConfig& config, Rng& rng);

// Loss each group descends in the joint stage.
struct GroupObjectives {
  double psi = 0.0;     // L_rec + lambda_lkd L_lkd
  double phi = 0.0;     // L_E^adv + lambda_kl L_kl + lambda_rec L_rec
  double omega = 0.0;   // L_C^adv
  double theta = 0.0;   // L_rec + L_GD^adv
  double theta_d = 0.0; // L_D^adv
};

struct JointPass {
  LossBreakdown losses;
  GroupObjectives objectives;
  GroupGradients grads;  // psi, phi, omega, theta, theta_d
};

// In semi-supervised mode `labels` are pseudo-labels used only to condition
// the discriminator, L_lkd uses the total-moment Gaussian, and the latent
// adversarial terms are dropped (omega receives no gradient).
JointPass joint_forward_backward(const NetworkParams& params, const Tensor& x, std::span<const int> labels,
                                 const TrainConfig& config, const JointNoise& noise, bool semisupervised = false);

// Called after each group's update during a joint step.
using UpdateObserver = std::function<void(ParamGroup)>;

LossBreakdown train_step_joint(NetworkParams& params, std::map<std::string, AdamState>& optimizers,
                               const Tensor& x, std::span<const int> labels, const TrainConfig& config, Rng& rng,
                               const UpdateObserver& observer = {});

LossBreakdown train_step_finetune(NetworkParams& params, std::map<std::string, AdamState>& optimizers,
                                  const Tensor& x, const TrainConfig& config, Rng& rng,
                                  const UpdateObserver& observer = {});

LossBreakdown train_step_baseline(BaselineParams& params, std::map<std::string, AdamState>& optimizers,
                                  const Tensor& x, std::span<const int> labels, const TrainConfig& config, Rng& rng);

// Hard class assignment of z_s codes under the mixture posterior.
std::vector<int> mixture_assign(const NetworkParams& params, const Tensor& z_s);

}  // namespace disvae
