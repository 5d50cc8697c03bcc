#include "disvae/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace disvae {

namespace ops {

NodeId rec_loss(Graph& g, NodeId x, NodeId x_rec, std::size_t batch) {
  return g.scale(g.sum(g.square(g.sub(x, x_rec))), 0.5 / static_cast<double>(batch));
}

NodeId kl_loss(Graph& g, NodeId mu, NodeId log_var, std::size_t dim) {
  return g.mean(disvae::ops::kl_to_standard(g, mu, log_var, dim));
}

GmLossNodes gm_loss(Graph& g, NodeId z_s, const MixtureNodes& mixture, std::span<const int> labels,
                    double lambda_lkd, std::size_t dim) {
  const std::size_t n = labels.size();
  NodeId joint = mixture_log_joint(g, z_s, mixture, n, dim);
  NodeId mask = g.constant(one_hot(labels, mixture.mu.size()), "labels");
  NodeId picked = g.sum_cols(g.mul(joint, mask));  // log p(y) + log N(z; mu_y, Sigma_y)
  NodeId l_cls = g.mean(g.sub(g.logsumexp_rows(joint), picked));

  // -log N(z; mu_y, Sigma_y) = -(picked - log p(y))
  std::vector<double> log_prior_of_label(n);
  for (std::size_t i = 0; i < n; ++i) log_prior_of_label[i] = std::log(mixture.priors[labels[i]]);
  NodeId prior = g.constant(Tensor({n, 1}, std::move(log_prior_of_label)));
  NodeId l_lkd = g.mean(g.sub(prior, picked));

  NodeId l_gm = g.add(l_cls, g.scale(l_lkd, lambda_lkd));
  return {l_cls, l_lkd, l_gm};
}

AdvLossNodes adv_classifier_losses(Graph& g, NodeId logits, std::span<const int> labels, std::size_t num_classes) {
  NodeId lse = g.logsumexp_rows(logits);
  NodeId mask = g.constant(one_hot(labels, num_classes), "labels");
  NodeId l_c = g.mean(g.sub(lse, g.sum_cols(g.mul(logits, mask))));
  NodeId avg_logit = g.scale(g.sum_cols(logits), 1.0 / static_cast<double>(num_classes));
  NodeId l_e = g.mean(g.sub(lse, avg_logit));
  return {l_c, l_e};
}

GanLossNodes gan_losses(Graph& g, NodeId d_real, NodeId d_fake_rec, NodeId d_fake_prior) {
  NodeId one = g.constant(Tensor::scalar(1.0));
  auto log_one_minus = [&](NodeId p) { return g.log(g.add_bias(g.neg(p), one)); };
  NodeId d_terms = g.add(g.add(g.log(d_real), log_one_minus(d_fake_rec)), log_one_minus(d_fake_prior));
  NodeId l_d = g.neg(g.mean(d_terms));
  NodeId l_gd = g.neg(g.mean(g.add(g.log(d_fake_rec), g.log(d_fake_prior))));
  return {l_d, l_gd};
}

}  // namespace ops

namespace {

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t num_classes) {
  if (labels.size() != rows) {
    throw std::invalid_argument(std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

}  // namespace

double rec_loss(const Tensor& x, const Tensor& x_rec) {
  if (x.shape() != x_rec.shape() || x.rank() != 2) {
    throw std::invalid_argument("rec_loss: shapes " + shape_str(x.shape()) + " and " + shape_str(x_rec.shape()));
  }
  Graph g;
  NodeId a = g.input("x"), b = g.input("x_rec");
  NodeId l = ops::rec_loss(g, a, b, x.rows());
  return evaluate(g, {{a, x}, {b, x_rec}}).scalar(l);
}

GmLoss gm_loss(const Tensor& z_s, std::span<const int> labels, const GaussianMixture& mixture, double lambda_lkd) {
  mixture.validate();
  if (z_s.rank() != 2 || z_s.cols() != mixture.dim()) {
    throw std::invalid_argument("gm_loss: codes " + shape_str(z_s.shape()) + " vs mixture dimension " +
                                std::to_string(mixture.dim()));
  }
  check_labels(labels, z_s.rows(), mixture.size());
  Graph g;
  NodeId z = g.input("z_s");
  auto m = ops::mixture_parameters(g, mixture);
  auto n = ops::gm_loss(g, z, m, labels, lambda_lkd, mixture.dim());
  auto v = evaluate(g, {{z, z_s}});
  return {v.scalar(n.l_cls), v.scalar(n.l_lkd), v.scalar(n.l_gm)};
}

AdvLoss adv_classifier_losses(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw std::invalid_argument("adv_classifier_losses: logits must be batch x C");
  check_labels(labels, logits.rows(), logits.cols());
  Graph g;
  NodeId l = g.input("logits");
  auto n = ops::adv_classifier_losses(g, l, labels, logits.cols());
  auto v = evaluate(g, {{l, logits}});
  return {v.scalar(n.l_c_adv), v.scalar(n.l_e_adv)};
}

GanLoss gan_losses(const Tensor& d_real, const Tensor& d_fake_rec, const Tensor& d_fake_prior) {
  for (const Tensor* t : {&d_real, &d_fake_rec, &d_fake_prior}) {
    for (double p : t->data()) {
      if (!(p > 0.0 && p < 1.0)) throw std::domain_error("gan_losses: probability outside (0, 1)");
    }
  }
  Graph g;
  NodeId a = g.input("d_real"), b = g.input("d_fake_rec"), c = g.input("d_fake_prior");
  auto n = ops::gan_losses(g, a, b, c);
  auto v = evaluate(g, {{a, d_real}, {b, d_fake_rec}, {c, d_fake_prior}});
  return {v.scalar(n.l_d_adv), v.scalar(n.l_gd_adv)};
}

double kl_loss(const GaussianBatch& q) {
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) total += kl_diag_gaussian_std(q.at(i));
  return total / static_cast<double>(q.size());
}

LossBreakdown elbo_report(const Tensor& x, const NetworkParams& params, std::span<const int> labels, Rng& rng,
                          std::size_t n_mc, double lambda_lkd) {
  if (n_mc < 1) throw std::invalid_argument("elbo_report: n_mc must be >= 1");
  const std::size_t n = x.rows();
  check_labels(labels, n, params.mixture.size());

  LossBreakdown out;
  const Tensor z_s = encoder_s_forward(params, x);
  const GaussianBatch q = encoder_u_forward(params, x);
  out.l_kl = kl_loss(q);
  const GmLoss gm = gm_loss(z_s, labels, params.mixture, lambda_lkd);
  out.l_cls = gm.l_cls;
  out.l_lkd = gm.l_lkd;
  out.l_gm = gm.l_gm;

  const std::size_t dz = q.mu.cols();
  double sum = 0.0, sum_sq = 0.0;
  Tensor first_z_u, first_rec;
  for (std::size_t k = 0; k < n_mc; ++k) {
    Tensor z_u({n, dz});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dz; ++j)
        z_u.at(i, j) = q.mu.at(i, j) + std::exp(0.5 * q.log_var.at(i, j)) * rng.normal();
    Tensor rec = decoder_forward(params, z_s, z_u);
    const double l = rec_loss(x, rec);
    sum += l;
    sum_sq += l * l;
    if (k == 0) {
      first_z_u = std::move(z_u);
      first_rec = std::move(rec);
    }
  }
  const double mc = static_cast<double>(n_mc);
  out.l_rec = sum / mc;
  out.l_rec_stderr = n_mc > 1 ? std::sqrt(std::max(0.0, (sum_sq / mc - out.l_rec * out.l_rec) / (mc - 1.0))) : 0.0;

  const AdvLoss adv = adv_classifier_losses(classifier_forward(params, first_z_u), labels);
  out.l_c_adv = adv.l_c_adv;
  out.l_e_adv = adv.l_e_adv;

  Tensor z_s_prior({n, params.mixture.dim()});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& comp = params.mixture.components[static_cast<std::size_t>(labels[i])];
    Tensor eps = rng.normal_tensor(1, comp.dim());
    Tensor z = reparameterize(comp, eps);
    for (std::size_t j = 0; j < comp.dim(); ++j) z_s_prior.at(i, j) = z[j];
  }
  const Tensor x_prior = decoder_forward(params, z_s_prior, rng.normal_tensor(n, dz));
  const GanLoss gan = gan_losses(discriminator_forward(params, x, labels),
                                 discriminator_forward(params, first_rec, labels),
                                 discriminator_forward(params, x_prior, labels));
  out.l_d_adv = gan.l_d_adv;
  out.l_gd_adv = gan.l_gd_adv;
  out.elbo_estimate = -(out.l_rec + out.l_kl + out.l_lkd);
  return out;
}

}  // namespace disvae
