#include "disvae/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace disvae {

// ---------------------------------------------------------------------------
// Adam

AdamState make_adam_state(std::string name, std::span<const Tensor* const> params) {
  AdamState s;
  s.name = std::move(name);
  for (const Tensor* p : params) {
    s.m.push_back(Tensor(p->shape()));
    s.v.push_back(Tensor(p->shape()));
  }
  return s;
}

void adam_update(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
                 const AdamSettings& settings) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam[" + state.name + "]: " + std::to_string(params.size()) + " parameters, " +
                                std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) +
                                " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->shape() || state.m[i].shape() != params[i]->shape()) {
      throw std::invalid_argument("adam[" + state.name + "]: shape mismatch at tensor " + std::to_string(i));
    }
    if (!grads[i].all_finite()) {
      throw std::runtime_error("non-finite gradient in parameter group '" + state.name + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(settings.beta1, t);
  const double c2 = 1.0 - std::pow(settings.beta2, t);
  const double lr = settings.learning_rate * state.lr_multiplier;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = settings.beta1 * m[k] + (1.0 - settings.beta1) * g[k];
      v[k] = settings.beta2 * v[k] + (1.0 - settings.beta2) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + settings.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Parameter groups

std::string group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kPsi: return "psi";
    case ParamGroup::kPhi: return "phi";
    case ParamGroup::kTheta: return "theta";
    case ParamGroup::kOmega: return "omega";
    case ParamGroup::kThetaD: return "theta_d";
    case ParamGroup::kMixtureMu: return "mixture_mu";
    case ParamGroup::kMixtureLogVar: return "mixture_log_var";
  }
  throw std::invalid_argument("unknown parameter group");
}

std::vector<Tensor*> group_tensors(NetworkParams& p, ParamGroup g) {
  switch (g) {
    case ParamGroup::kPsi: return p.enc_s.tensors();
    case ParamGroup::kPhi: return p.enc_u.tensors();
    case ParamGroup::kTheta: return p.decoder.tensors();
    case ParamGroup::kOmega: return p.adv_classifier.tensors();
    case ParamGroup::kThetaD: return p.discriminator.tensors();
    case ParamGroup::kMixtureMu: {
      std::vector<Tensor*> out;
      for (auto& c : p.mixture.components) out.push_back(&c.mu);
      return out;
    }
    case ParamGroup::kMixtureLogVar: {
      std::vector<Tensor*> out;
      for (auto& c : p.mixture.components) out.push_back(&c.log_var);
      return out;
    }
  }
  throw std::invalid_argument("unknown parameter group");
}

std::vector<const Tensor*> group_tensors(const NetworkParams& p, ParamGroup g) {
  auto mut = group_tensors(const_cast<NetworkParams&>(p), g);
  return {mut.begin(), mut.end()};
}

namespace {

std::vector<Tensor> collect(const Gradients& grads, std::span<const NodeId> ids) {
  std::vector<Tensor> out;
  out.reserve(ids.size());
  for (NodeId id : ids) out.push_back(grads.at(id));
  return out;
}

AdamState& optimizer(std::map<std::string, AdamState>& opts, const std::string& name) {
  auto it = opts.find(name);
  if (it == opts.end()) throw std::invalid_argument("no optimizer state for group '" + name + "'");
  return it->second;
}

void apply_group(NetworkParams& params, std::map<std::string, AdamState>& opts, ParamGroup g,
                 const std::vector<Tensor>& grads, const AdamSettings& settings) {
  auto tensors = group_tensors(params, g);
  adam_update(tensors, grads, optimizer(opts, group_name(g)), settings);
}

void check_labeled(std::span<const int> labels, std::size_t rows, std::size_t num_classes) {
  if (labels.size() != rows) {
    throw std::invalid_argument(std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw std::invalid_argument("training requires labels in [0, " + std::to_string(num_classes) + "), got " +
                                  std::to_string(y));
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Baseline networks

BaselineParams build_baseline(const TrainConfig& config, Rng& rng) {
  config.validate();
  const std::size_t C = config.num_classes;
  const std::size_t latent = config.dim_z_s + config.dim_z_u;
  BaselineParams p;
  p.num_classes = C;
  p.encoder = make_mlp({config.data_dim + C, config.encoder_hidden, latent, config.activation,
                        OutputHead::kGaussianPair},
                       rng);
  p.decoder = make_mlp({latent + C, config.decoder_hidden, config.data_dim, config.activation, OutputHead::kLinear},
                       rng);
  p.discriminator = make_mlp({config.data_dim + C, config.discriminator_hidden, 1, config.activation,
                              OutputHead::kSigmoid},
                             rng);
  return p;
}

Tensor baseline_decode(const BaselineParams& p, const Tensor& z, std::span<const int> labels) {
  if (z.rank() != 2 || z.cols() != p.latent_dim() || z.rows() != labels.size()) {
    throw std::invalid_argument("baseline_decode: codes " + shape_str(z.shape()) + " with " +
                                std::to_string(labels.size()) + " labels");
  }
  return mlp_forward(p.decoder, hconcat(z, one_hot(labels, p.num_classes)));
}

// ---------------------------------------------------------------------------
// GM stage

GmPass gm_forward_backward(const NetworkParams& params, const Tensor& x, std::span<const int> labels,
                           const TrainConfig& config) {
  check_labeled(labels, x.rows(), params.mixture.size());
  Graph g;
  NodeId xin = g.constant(x, "x");
  BoundMlp psi = bind(g, params.enc_s, "enc_s");
  NodeId z_s = apply(g, psi, xin);
  auto mix = ops::mixture_parameters(g, params.mixture);
  auto gm = ops::gm_loss(g, z_s, mix, labels, config.lambda_lkd, params.mixture.dim());
  Evaluation ev = evaluate(g);
  Gradients grads = backward(g, ev, gm.l_gm);

  GmPass out{{ev.scalar(gm.l_cls), ev.scalar(gm.l_lkd), ev.scalar(gm.l_gm)}, {}};
  out.grads[ParamGroup::kPsi] = collect(grads, psi.params);
  out.grads[ParamGroup::kMixtureMu] = collect(grads, mix.mu);
  out.grads[ParamGroup::kMixtureLogVar] = collect(grads, mix.log_var);
  return out;
}

GmLoss train_stage_gm(NetworkParams& params, std::map<std::string, AdamState>& optimizers, const Tensor& x,
                      std::span<const int> labels, const TrainConfig& config) {
  GmPass pass = gm_forward_backward(params, x, labels, config);
  const auto settings = AdamSettings::from(config);
  for (ParamGroup grp : {ParamGroup::kPsi, ParamGroup::kMixtureMu, ParamGroup::kMixtureLogVar}) {
    apply_group(params, optimizers, grp, pass.grads.at(grp), settings);
  }
  return pass.loss;
}

// ---------------------------------------------------------------------------
// Joint stage

JointNoise draw_joint_noise(const NetworkParams& params, std::size_t batch, std::span<const int> prior_classes,
                            const TrainConfig& config, Rng& rng) {
  if (!prior_classes.empty()) check_labeled(prior_classes, batch, params.mixture.size());
  JointNoise noise;
  noise.eps = rng.normal_tensor(batch, config.dim_z_u);
  noise.z_s_prior = Tensor({batch, config.dim_z_s});
  noise.prior_labels.resize(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    Tensor z;
    if (prior_classes.empty()) {
      MixtureSample s = sample_mixture(params.mixture, rng);
      z = std::move(s.z);
      noise.prior_labels[i] = s.component;
    } else {
      const int c = prior_classes[i];
      z = reparameterize(params.mixture.components[static_cast<std::size_t>(c)],
                         rng.normal_tensor(1, config.dim_z_s));
      noise.prior_labels[i] = c;
    }
    for (std::size_t j = 0; j < config.dim_z_s; ++j) noise.z_s_prior.at(i, j) = z[j];
  }
  noise.z_u_prior = rng.normal_tensor(batch, config.dim_z_u);
  return noise;
}

JointPass joint_forward_backward(const NetworkParams& params, const Tensor& x, std::span<const int> labels,
                                 const TrainConfig& config, const JointNoise& noise, bool semisupervised) {
  const std::size_t n = x.rows();
  const std::size_t C = params.mixture.size();
  const std::size_t dzs = config.dim_z_s;
  const std::size_t dzu = config.dim_z_u;
  check_labeled(labels, n, C);
  if (noise.eps.rows() != n || noise.z_s_prior.rows() != n || noise.z_u_prior.rows() != n) {
    throw std::invalid_argument("joint step: noise batch does not match data batch");
  }

  Graph g;
  NodeId xin = g.constant(x, "x");
  BoundMlp psi = bind(g, params.enc_s, "enc_s");
  BoundMlp phi = bind(g, params.enc_u, "enc_u");
  BoundMlp theta = bind(g, params.decoder, "decoder");
  BoundMlp omega = bind(g, params.adv_classifier, "classifier");
  BoundMlp theta_d = bind(g, params.discriminator, "discriminator");

  // q(z_u | x)
  NodeId raw = apply(g, phi, xin);
  NodeId mu = g.slice_cols(raw, 0, dzu);
  NodeId log_var = g.slice_cols(raw, dzu, 2 * dzu);
  NodeId l_kl = ops::kl_loss(g, mu, log_var, dzu);
  NodeId z_u = ops::reparameterize(g, mu, log_var, g.constant(noise.eps, "eps"));

  // z_s and its likelihood regularizer
  NodeId z_s = apply(g, psi, xin);
  NodeId l_lkd, l_cls{}, l_gm{};
  if (semisupervised) {
    const DiagGaussian total = mixture_total_moments(params.mixture);
    NodeId lp = ops::gaussian_log_pdf(g, z_s, g.constant(total.mu), g.constant(total.log_var), n, dzs);
    l_lkd = g.neg(g.mean(lp));
  } else {
    auto mix = ops::mixture_parameters(g, params.mixture);
    auto gm = ops::gm_loss(g, z_s, mix, labels, config.lambda_lkd, dzs);
    l_lkd = gm.l_lkd;
    l_cls = gm.l_cls;
    l_gm = gm.l_gm;
  }

  // Latent adversary on z_u
  NodeId l_c{}, l_e{};
  if (!semisupervised) {
    auto adv = ops::adv_classifier_losses(g, apply(g, omega, z_u), labels, C);
    l_c = adv.l_c_adv;
    l_e = adv.l_e_adv;
  }

  // Reconstruction and prior samples
  NodeId x_rec = apply(g, theta, g.concat(z_s, z_u));
  NodeId l_rec = ops::rec_loss(g, xin, x_rec, n);
  NodeId z_prior = g.constant(hconcat(noise.z_s_prior, noise.z_u_prior), "z_prior");
  NodeId x_prior = apply(g, theta, z_prior);

  NodeId cond = g.constant(one_hot(labels, C), "cond");
  NodeId cond_prior = g.constant(one_hot(noise.prior_labels, C), "cond_prior");
  NodeId d_real = apply(g, theta_d, g.concat(xin, cond));
  NodeId d_rec = apply(g, theta_d, g.concat(x_rec, cond));
  NodeId d_prior = apply(g, theta_d, g.concat(x_prior, cond_prior));
  auto gan = ops::gan_losses(g, d_real, d_rec, d_prior);

  NodeId obj_psi = g.add(l_rec, g.scale(l_lkd, config.lambda_lkd));
  NodeId obj_phi = g.add(g.scale(l_kl, config.lambda_kl), g.scale(l_rec, config.lambda_rec));
  if (!semisupervised) obj_phi = g.add(l_e, obj_phi);
  NodeId obj_theta = g.add(l_rec, gan.l_gd_adv);
  NodeId obj_theta_d = gan.l_d_adv;

  Evaluation ev = evaluate(g);
  JointPass out;
  LossBreakdown& L = out.losses;
  L.l_rec = ev.scalar(l_rec);
  L.l_kl = ev.scalar(l_kl);
  L.l_lkd = ev.scalar(l_lkd);
  L.l_d_adv = ev.scalar(gan.l_d_adv);
  L.l_gd_adv = ev.scalar(gan.l_gd_adv);
  if (!semisupervised) {
    L.l_cls = ev.scalar(l_cls);
    L.l_gm = ev.scalar(l_gm);
    L.l_c_adv = ev.scalar(l_c);
    L.l_e_adv = ev.scalar(l_e);
  }
  L.elbo_estimate = -(L.l_rec + L.l_kl + L.l_lkd);

  out.objectives.psi = ev.scalar(obj_psi);
  out.objectives.phi = ev.scalar(obj_phi);
  out.objectives.theta = ev.scalar(obj_theta);
  out.objectives.theta_d = ev.scalar(obj_theta_d);
  out.grads[ParamGroup::kPsi] = collect(backward(g, ev, obj_psi), psi.params);
  out.grads[ParamGroup::kPhi] = collect(backward(g, ev, obj_phi), phi.params);
  out.grads[ParamGroup::kTheta] = collect(backward(g, ev, obj_theta), theta.params);
  out.grads[ParamGroup::kThetaD] = collect(backward(g, ev, obj_theta_d), theta_d.params);
  if (!semisupervised) {
    out.objectives.omega = ev.scalar(l_c);
    out.grads[ParamGroup::kOmega] = collect(backward(g, ev, l_c), omega.params);
  }
  return out;
}

LossBreakdown train_step_joint(NetworkParams& params, std::map<std::string, AdamState>& optimizers,
                               const Tensor& x, std::span<const int> labels, const TrainConfig& config, Rng& rng,
                               const UpdateObserver& observer) {
  JointNoise noise = draw_joint_noise(params, x.rows(), labels, config, rng);
  JointPass pass = joint_forward_backward(params, x, labels, config, noise, false);
  const auto settings = AdamSettings::from(config);
  for (ParamGroup grp : {ParamGroup::kPsi, ParamGroup::kPhi, ParamGroup::kOmega, ParamGroup::kTheta,
                         ParamGroup::kThetaD}) {
    apply_group(params, optimizers, grp, pass.grads.at(grp), settings);
    if (observer) observer(grp);
  }
  return pass.losses;
}

std::vector<int> mixture_assign(const NetworkParams& params, const Tensor& z_s) {
  std::vector<int> out(z_s.rows());
  for (std::size_t i = 0; i < z_s.rows(); ++i) {
    const auto post = mixture_posterior(z_s.row_copy(i), params.mixture);
    out[i] = static_cast<int>(std::max_element(post.begin(), post.end()) - post.begin());
  }
  return out;
}

LossBreakdown train_step_finetune(NetworkParams& params, std::map<std::string, AdamState>& optimizers,
                                  const Tensor& x, const TrainConfig& config, Rng& rng,
                                  const UpdateObserver& observer) {
  const std::vector<int> pseudo = mixture_assign(params, encoder_s_forward(params, x));
  JointNoise noise = draw_joint_noise(params, x.rows(), {}, config, rng);
  JointPass pass = joint_forward_backward(params, x, pseudo, config, noise, true);
  const auto settings = AdamSettings::from(config);
  for (ParamGroup grp : {ParamGroup::kPsi, ParamGroup::kPhi, ParamGroup::kTheta, ParamGroup::kThetaD}) {
    apply_group(params, optimizers, grp, pass.grads.at(grp), settings);
    if (observer) observer(grp);
  }
  return pass.losses;
}

LossBreakdown train_step_baseline(BaselineParams& params, std::map<std::string, AdamState>& optimizers,
                                  const Tensor& x, std::span<const int> labels, const TrainConfig& config, Rng& rng) {
  const std::size_t n = x.rows();
  const std::size_t C = params.num_classes;
  const std::size_t k = params.latent_dim();
  check_labeled(labels, n, C);
  const Tensor eps = rng.normal_tensor(n, k);
  const Tensor z_prior = rng.normal_tensor(n, k);

  Graph g;
  NodeId xin = g.constant(x, "x");
  NodeId cond = g.constant(one_hot(labels, C), "cond");
  BoundMlp enc = bind(g, params.encoder, "encoder");
  BoundMlp dec = bind(g, params.decoder, "decoder");
  BoundMlp disc = bind(g, params.discriminator, "discriminator");

  NodeId raw = apply(g, enc, g.concat(xin, cond));
  NodeId mu = g.slice_cols(raw, 0, k);
  NodeId log_var = g.slice_cols(raw, k, 2 * k);
  NodeId l_kl = ops::kl_loss(g, mu, log_var, k);
  NodeId z = ops::reparameterize(g, mu, log_var, g.constant(eps, "eps"));
  NodeId x_rec = apply(g, dec, g.concat(z, cond));
  NodeId l_rec = ops::rec_loss(g, xin, x_rec, n);
  NodeId x_prior = apply(g, dec, g.concat(g.constant(z_prior, "z_prior"), cond));
  auto gan = ops::gan_losses(g, apply(g, disc, g.concat(xin, cond)), apply(g, disc, g.concat(x_rec, cond)),
                             apply(g, disc, g.concat(x_prior, cond)));

  NodeId obj_enc = g.add(l_rec, g.scale(l_kl, config.lambda_kl));
  NodeId obj_dec = g.add(l_rec, gan.l_gd_adv);
  Evaluation ev = evaluate(g);
  const auto ge = collect(backward(g, ev, obj_enc), enc.params);
  const auto gd = collect(backward(g, ev, obj_dec), dec.params);
  const auto gdisc = collect(backward(g, ev, gan.l_d_adv), disc.params);

  const auto settings = AdamSettings::from(config);
  adam_update(params.encoder.tensors(), ge, optimizer(optimizers, "encoder"), settings);
  adam_update(params.decoder.tensors(), gd, optimizer(optimizers, "decoder"), settings);
  adam_update(params.discriminator.tensors(), gdisc, optimizer(optimizers, "discriminator"), settings);

  LossBreakdown L;
  L.l_rec = ev.scalar(l_rec);
  L.l_kl = ev.scalar(l_kl);
  L.l_d_adv = ev.scalar(gan.l_d_adv);
  L.l_gd_adv = ev.scalar(gan.l_gd_adv);
  L.elbo_estimate = -(L.l_rec + L.l_kl);
  return L;
}

// ---------------------------------------------------------------------------
// Epoch loop

namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& l) {
  acc.l_rec += l.l_rec;
  acc.l_kl += l.l_kl;
  acc.l_lkd += l.l_lkd;
  acc.l_cls += l.l_cls;
  acc.l_gm += l.l_gm;
  acc.l_e_adv += l.l_e_adv;
  acc.l_c_adv += l.l_c_adv;
  acc.l_d_adv += l.l_d_adv;
  acc.l_gd_adv += l.l_gd_adv;
  acc.elbo_estimate += l.elbo_estimate;
}

LossBreakdown scaled(LossBreakdown l, double k) {
  for (double* f : {&l.l_rec, &l.l_kl, &l.l_lkd, &l.l_cls, &l.l_gm, &l.l_e_adv, &l.l_c_adv, &l.l_d_adv,
                    &l.l_gd_adv, &l.elbo_estimate}) {
    *f *= k;
  }
  return l;
}

std::map<std::string, AdamState> fresh_optimizers(const NetworkParams& p, std::span<const ParamGroup> groups) {
  std::map<std::string, AdamState> out;
  for (ParamGroup grp : groups) {
    const std::string name = group_name(grp);
    out.emplace(name, make_adam_state(name, group_tensors(p, grp)));
  }
  return out;
}

constexpr ParamGroup kFinetuneGroups[] = {ParamGroup::kPsi, ParamGroup::kPhi, ParamGroup::kTheta,
                                          ParamGroup::kThetaD};

}  // namespace

TrainState init_training(const TrainConfig& config) {
  config.validate();
  TrainState s{config, {}, {}, {}, Rng(config.rng_seed), 0, {}};
  s.history.seed = config.rng_seed;
  if (config.mode == TrainMode::kBaselineCvaeGan) {
    s.baseline = build_baseline(config, s.rng);
    s.optimizers.emplace("encoder", make_adam_state("encoder", s.baseline.encoder.tensors()));
    s.optimizers.emplace("decoder", make_adam_state("decoder", s.baseline.decoder.tensors()));
    s.optimizers.emplace("discriminator", make_adam_state("discriminator", s.baseline.discriminator.tensors()));
  } else if (config.mode == TrainMode::kFull) {
    s.params = build_networks(config, s.rng);
    s.optimizers = fresh_optimizers(s.params, kAllGroups);
  } else {
    s.params = build_networks(config, s.rng);
    s.optimizers = fresh_optimizers(s.params, kFinetuneGroups);
  }
  return s;
}

void begin_finetune(TrainState& state, const TrainConfig& config) {
  config.validate();
  if (config.mode != TrainMode::kSemisupervisedFinetune) {
    throw std::invalid_argument("begin_finetune: config mode must be semisupervised-finetune");
  }
  if (state.params.mixture.size() != config.num_classes || state.params.enc_s.spec.input_dim != config.data_dim) {
    throw std::invalid_argument("begin_finetune: pretrained model does not match the config dimensions");
  }
  state.config = config;
  state.optimizers = fresh_optimizers(state.params, kFinetuneGroups);
  state.rng = Rng(config.rng_seed);
  state.epoch = 0;
  state.history = {};
  state.history.seed = config.rng_seed;
}

void run_epochs(TrainState& state, const Dataset& data, std::size_t last_epoch, const EpochCallback& on_epoch) {
  data.validate();
  const TrainConfig& cfg = state.config;
  const TrainMode mode = cfg.mode;
  if (data.dim() != cfg.data_dim) {
    throw std::invalid_argument("data has " + std::to_string(data.dim()) + " features, config expects " +
                                std::to_string(cfg.data_dim));
  }
  if (mode != TrainMode::kSemisupervisedFinetune) check_labeled(data.labels, data.size(), cfg.num_classes);
  if (last_epoch == 0) last_epoch = cfg.epochs;

  const std::size_t n = data.size();
  const std::size_t gm_batch = std::min(cfg.batch_size, n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  while (state.epoch < last_epoch) {
    const std::size_t epoch = state.epoch + 1;
    const auto start = std::chrono::steady_clock::now();
    if (mode == TrainMode::kFull) {
      optimizer(state.optimizers, group_name(ParamGroup::kMixtureLogVar)).lr_multiplier =
          epoch > cfg.sigma_c_decay_epoch ? cfg.sigma_c_decay_factor : 1.0;
    }

    LossBreakdown acc;
    double gm_acc = 0.0;
    std::size_t joint_steps = 0, gm_steps = 0;
    for (const auto& rows : batch_iter(n, cfg.batch_size, cfg.rng_seed, epoch)) {
      const Dataset batch = data.subset(rows);
      LossBreakdown l;
      if (mode == TrainMode::kFull) {
        for (std::size_t i = 0; i < cfg.n_gm; ++i) {
          std::vector<std::size_t> pick;
          pick.reserve(gm_batch);
          std::sample(all.begin(), all.end(), std::back_inserter(pick), gm_batch, state.rng.engine());
          const Dataset gm = data.subset(pick);
          gm_acc += train_stage_gm(state.params, state.optimizers, gm.x, gm.labels, cfg).l_gm;
          ++gm_steps;
        }
        l = train_step_joint(state.params, state.optimizers, batch.x, batch.labels, cfg, state.rng);
      } else if (mode == TrainMode::kSemisupervisedFinetune) {
        l = train_step_finetune(state.params, state.optimizers, batch.x, cfg, state.rng);
      } else {
        l = train_step_baseline(state.baseline, state.optimizers, batch.x, batch.labels, cfg, state.rng);
      }
      accumulate(acc, l);
      ++joint_steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.losses = scaled(acc, 1.0 / static_cast<double>(joint_steps));
    rec.gm_stage_loss = gm_steps > 0 ? gm_acc / static_cast<double>(gm_steps) : 0.0;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    state.history.epochs.push_back(rec);
    state.epoch = epoch;
    if (on_epoch) on_epoch(state);
  }
}

TrainResult train(const TrainConfig& config, const Dataset& labeled, const EpochCallback& on_epoch) {
  if (config.mode != TrainMode::kFull) throw std::invalid_argument("train: config mode must be full");
  TrainState s = init_training(config);
  run_epochs(s, labeled, 0, on_epoch);
  return {std::move(s.params), std::move(s.history)};
}

BaselineResult train_baseline_cvaegan(const TrainConfig& config, const Dataset& labeled,
                                      const EpochCallback& on_epoch) {
  TrainConfig c = config;
  c.mode = TrainMode::kBaselineCvaeGan;
  TrainState s = init_training(c);
  run_epochs(s, labeled, 0, on_epoch);
  return {std::move(s.baseline), std::move(s.history)};
}

NetworkParams finetune_semisupervised(const NetworkParams& pretrained, const Dataset& unlabeled,
                                      const TrainConfig& config, const EpochCallback& on_epoch) {
  TrainConfig c = config;
  c.mode = TrainMode::kSemisupervisedFinetune;
  TrainState s{c, pretrained, {}, {}, Rng(c.rng_seed), 0, {}};
  begin_finetune(s, c);
  run_epochs(s, unlabeled, 0, on_epoch);
  return std::move(s.params);
}

std::string history_csv(const TrainHistory& h) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "epoch,l_rec,l_kl,l_lkd,l_cls,l_gm,l_e_adv,l_c_adv,l_d_adv,l_gd_adv,elbo_estimate,gm_stage_loss,"
        "wall_seconds\n";
  for (const auto& e : h.epochs) {
    const auto& l = e.losses;
    os << e.epoch << ',' << l.l_rec << ',' << l.l_kl << ',' << l.l_lkd << ',' << l.l_cls << ',' << l.l_gm << ','
       << l.l_e_adv << ',' << l.l_c_adv << ',' << l.l_d_adv << ',' << l.l_gd_adv << ',' << l.elbo_estimate << ','
       << e.gm_stage_loss << ',' << e.wall_seconds << '\n';
  }
  return os.str();
}

}  // namespace disvae
