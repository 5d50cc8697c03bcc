#pragma once

#include <span>

#include "disvae/autodiff.hpp"
#include "disvae/distributions.hpp"
#include "disvae/models.hpp"
#include "disvae/rng.hpp"

namespace disvae {

// Every loss is a batch mean.
struct LossBreakdown {
  double l_rec = 0.0;
  double l_kl = 0.0;
  double l_lkd = 0.0;
  double l_cls = 0.0;
  double l_gm = 0.0;
  double l_e_adv = 0.0;
  double l_c_adv = 0.0;
  double l_d_adv = 0.0;
  double l_gd_adv = 0.0;
  // -(l_rec + l_kl + l_lkd): the three-term bound with the Gaussian
  // likelihood normalizer and the delta-posterior entropy constants dropped.
  double elbo_estimate = 0.0;
  // Monte Carlo standard error of l_rec (elbo_report only).
  double l_rec_stderr = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

struct GmLoss {
  double l_cls;
  double l_lkd;
  double l_gm;
};

struct AdvLoss {
  double l_c_adv;
  double l_e_adv;
};

struct GanLoss {
  double l_d_adv;
  double l_gd_adv;
};

double rec_loss(const Tensor& x, const Tensor& x_rec);
GmLoss gm_loss(const Tensor& z_s, std::span<const int> labels, const GaussianMixture& mixture, double lambda_lkd);
AdvLoss adv_classifier_losses(const Tensor& logits, std::span<const int> labels);
GanLoss gan_losses(const Tensor& d_real, const Tensor& d_fake_rec, const Tensor& d_fake_prior);
double kl_loss(const GaussianBatch& q);

// Estimates the terms of the evidence bound on a labeled batch: the
// reconstruction term is averaged over n_mc draws of z_u, the KL term is
// exact, and the z_s term is the likelihood regularizer. The adversarial
// terms are evaluated on the first draw.
LossBreakdown elbo_report(const Tensor& x, const NetworkParams& params, std::span<const int> labels, Rng& rng,
                          std::size_t n_mc, double lambda_lkd);

namespace ops {

NodeId rec_loss(Graph& g, NodeId x, NodeId x_rec, std::size_t batch);
NodeId kl_loss(Graph& g, NodeId mu, NodeId log_var, std::size_t dim);

struct GmLossNodes {
  NodeId l_cls;
  NodeId l_lkd;
  NodeId l_gm;
};
GmLossNodes gm_loss(Graph& g, NodeId z_s, const MixtureNodes& mixture, std::span<const int> labels,
                    double lambda_lkd, std::size_t dim);

struct AdvLossNodes {
  NodeId l_c_adv;
  NodeId l_e_adv;
};
AdvLossNodes adv_classifier_losses(Graph& g, NodeId logits, std::span<const int> labels, std::size_t num_classes);

struct GanLossNodes {
  NodeId l_d_adv;
  NodeId l_gd_adv;
};
GanLossNodes gan_losses(Graph& g, NodeId d_real, NodeId d_fake_rec, NodeId d_fake_prior);

}  // namespace ops

}  // namespace disvae
