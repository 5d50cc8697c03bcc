#include "disvae/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace disvae {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)

void require_dim(const Tensor& z, const DiagGaussian& g, const char* what) {
  if (z.numel() != g.dim()) {
    throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(z.numel()) +
                                " does not match distribution dimension " + std::to_string(g.dim()));
  }
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> log_joint(const Tensor& z, const GaussianMixture& m) {
  m.validate();
  std::vector<double> out(m.size());
  for (std::size_t c = 0; c < m.size(); ++c) {
    out[c] = std::log(m.priors[c]) + gaussian_log_pdf(z, m.components[c]);
  }
  return out;
}

}  // namespace

DiagGaussian DiagGaussian::standard(std::size_t dim) {
  return {Tensor({1, dim}, 0.0), Tensor({1, dim}, 0.0)};
}

Tensor DiagGaussian::variance() const {
  Tensor v = log_var;
  for (double& x : v.data()) x = std::exp(x);
  return v;
}

void DiagGaussian::validate() const {
  if (mu.numel() != log_var.numel() || mu.numel() == 0) {
    throw std::invalid_argument("DiagGaussian: mean has " + std::to_string(mu.numel()) + " entries, log-variance " +
                                std::to_string(log_var.numel()));
  }
}

GaussianMixture GaussianMixture::uniform(std::vector<DiagGaussian> components) {
  const std::size_t c = components.size();
  return {std::move(components), std::vector<double>(c, 1.0 / static_cast<double>(c))};
}

void GaussianMixture::validate() const {
  if (components.empty()) throw std::invalid_argument("GaussianMixture: no components");
  if (priors.size() != components.size()) throw std::invalid_argument("GaussianMixture: prior count mismatch");
  double total = 0.0;
  for (double p : priors) {
    if (!(p >= 0.0)) throw std::invalid_argument("GaussianMixture: negative prior");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("GaussianMixture: priors do not sum to 1");
  for (const auto& g : components) {
    g.validate();
    if (g.dim() != dim()) throw std::invalid_argument("GaussianMixture: components differ in dimension");
  }
}

double gaussian_log_pdf(const Tensor& z, const DiagGaussian& g) {
  g.validate();
  require_dim(z, g, "gaussian_log_pdf");
  double acc = 0.0;
  for (std::size_t i = 0; i < g.dim(); ++i) {
    const double lv = g.log_var[i];
    const double d = z[i] - g.mu[i];
    acc += lv + d * d * std::exp(-lv);
  }
  return -0.5 * static_cast<double>(g.dim()) * kLog2Pi - 0.5 * acc;
}

double kl_diag_gaussian_std(const DiagGaussian& g) {
  g.validate();
  double acc = 0.0;
  for (std::size_t i = 0; i < g.dim(); ++i) {
    const double lv = g.log_var[i];
    acc += std::exp(lv) + g.mu[i] * g.mu[i] - 1.0 - lv;
  }
  return 0.5 * acc;
}

Tensor reparameterize(const DiagGaussian& g, const Tensor& eps) {
  g.validate();
  require_dim(eps, g, "reparameterize");
  Tensor z({1, g.dim()});
  for (std::size_t i = 0; i < g.dim(); ++i) z[i] = g.mu[i] + std::exp(0.5 * g.log_var[i]) * eps[i];
  return z;
}

double mixture_log_pdf(const Tensor& z, const GaussianMixture& m) { return log_sum_exp(log_joint(z, m)); }

std::vector<double> posterior_from_log_joint(std::span<const double> lj) {
  if (lj.empty()) throw std::invalid_argument("posterior_from_log_joint: empty input");
  const double norm = log_sum_exp(lj);
  std::vector<double> p(lj.size());
  double total = 0.0;
  for (std::size_t c = 0; c < lj.size(); ++c) {
    p[c] = std::exp(lj[c] - norm);
    total += p[c];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> mixture_posterior(const Tensor& z, const GaussianMixture& m) {
  return posterior_from_log_joint(log_joint(z, m));
}

DiagGaussian mixture_total_moments(const GaussianMixture& m) {
  m.validate();
  const std::size_t d = m.dim();
  DiagGaussian out{Tensor({1, d}), Tensor({1, d})};
  for (std::size_t i = 0; i < d; ++i) {
    double mean = 0.0, second = 0.0, within = 0.0;
    for (std::size_t c = 0; c < m.size(); ++c) {
      const double p = m.priors[c];
      const double mu = m.components[c].mu[i];
      mean += p * mu;
      second += p * mu * mu;
      within += p * std::exp(m.components[c].log_var[i]);
    }
    out.mu[i] = mean;
    out.log_var[i] = std::log(within + second - mean * mean);
  }
  return out;
}

MixtureSample sample_mixture(const GaussianMixture& m, Rng& rng) {
  m.validate();
  std::discrete_distribution<int> pick(m.priors.begin(), m.priors.end());
  const int c = pick(rng.engine());
  const auto& comp = m.components[static_cast<std::size_t>(c)];
  Tensor eps({1, comp.dim()});
  for (double& e : eps.data()) e = rng.normal();
  return {reparameterize(comp, eps), c};
}

namespace ops {

NodeId gaussian_log_pdf(Graph& g, NodeId z, NodeId mu, NodeId log_var, std::size_t batch, std::size_t dim) {
  NodeId diff = g.sub(z, g.broadcast_rows(mu, batch));
  NodeId inv_var = g.broadcast_rows(g.exp(g.neg(log_var)), batch);
  NodeId quad = g.sum_cols(g.mul(g.square(diff), inv_var));
  NodeId log_det = g.broadcast_rows(g.sum(log_var), batch);
  NodeId half = g.scale(g.add(quad, log_det), -0.5);
  return g.add_bias(half, g.constant(Tensor::scalar(-0.5 * static_cast<double>(dim) * kLog2Pi)));
}

NodeId kl_to_standard(Graph& g, NodeId mu, NodeId log_var, std::size_t dim) {
  NodeId inner = g.sum_cols(g.add(g.sub(g.exp(log_var), log_var), g.square(mu)));
  return g.add_bias(g.scale(inner, 0.5), g.constant(Tensor::scalar(-0.5 * static_cast<double>(dim))));
}

NodeId reparameterize(Graph& g, NodeId mu, NodeId log_var, NodeId eps) {
  return g.add(mu, g.mul(g.exp(g.scale(log_var, 0.5)), eps));
}

MixtureNodes mixture_parameters(Graph& g, const GaussianMixture& m, const std::string& prefix) {
  m.validate();
  MixtureNodes out;
  out.priors = m.priors;
  for (std::size_t c = 0; c < m.size(); ++c) {
    out.mu.push_back(g.parameter(prefix + "/mu/" + std::to_string(c), m.components[c].mu));
    out.log_var.push_back(g.parameter(prefix + "/log_var/" + std::to_string(c), m.components[c].log_var));
  }
  return out;
}

NodeId mixture_log_joint(Graph& g, NodeId z, const MixtureNodes& m, std::size_t batch, std::size_t dim) {
  if (m.mu.empty() || m.mu.size() != m.log_var.size() || m.priors.size() != m.mu.size()) {
    throw std::invalid_argument("mixture_log_joint: inconsistent mixture nodes");
  }
  std::vector<double> log_prior;
  for (double p : m.priors) log_prior.push_back(std::log(p));
  NodeId joint = gaussian_log_pdf(g, z, m.mu[0], m.log_var[0], batch, dim);
  for (std::size_t c = 1; c < m.mu.size(); ++c) {
    joint = g.concat(joint, gaussian_log_pdf(g, z, m.mu[c], m.log_var[c], batch, dim));
  }
  return g.add_bias(joint, g.constant(Tensor::row(std::move(log_prior))));
}

}  // namespace ops

}  // namespace disvae
