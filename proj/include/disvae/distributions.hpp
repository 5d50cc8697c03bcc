#pragma once

#include <span>
#include <vector>

#include "disvae/autodiff.hpp"
#include "disvae/rng.hpp"
#include "disvae/tensor.hpp"

namespace disvae {

// Diagonal Gaussian N(mu, diag(exp(log_var))). Both tensors are 1 x d rows.
struct DiagGaussian {
  Tensor mu;
  Tensor log_var;

  static DiagGaussian standard(std::size_t dim);
  std::size_t dim() const { return mu.numel(); }
  Tensor variance() const;
  void validate() const;

  friend bool operator==(const DiagGaussian&, const DiagGaussian&) = default;
};

struct GaussianMixture {
  std::vector<DiagGaussian> components;
  std::vector<double> priors;

  // Equal class priors 1/C.
  static GaussianMixture uniform(std::vector<DiagGaussian> components);
  std::size_t size() const { return components.size(); }
  std::size_t dim() const { return components.empty() ? 0 : components.front().dim(); }
  void validate() const;

  friend bool operator==(const GaussianMixture&, const GaussianMixture&) = default;
};

struct MixtureSample {
  Tensor z;
  int component = 0;
};

double gaussian_log_pdf(const Tensor& z, const DiagGaussian& g);
double kl_diag_gaussian_std(const DiagGaussian& g);
Tensor reparameterize(const DiagGaussian& g, const Tensor& eps);
double mixture_log_pdf(const Tensor& z, const GaussianMixture& m);
std::vector<double> mixture_posterior(const Tensor& z, const GaussianMixture& m);
DiagGaussian mixture_total_moments(const GaussianMixture& m);
MixtureSample sample_mixture(const GaussianMixture& m, Rng& rng);

// Normalizes log p(c) + log N(z | c) into posterior probabilities in log space.
std::vector<double> posterior_from_log_joint(std::span<const double> log_joint);

// Differentiable batch versions. Rows of `z` are samples; mu/log_var nodes
// are 1 x d rows. All return n x 1 (or n x C) nodes.
namespace ops {

NodeId gaussian_log_pdf(Graph& g, NodeId z, NodeId mu, NodeId log_var, std::size_t batch, std::size_t dim);
NodeId kl_to_standard(Graph& g, NodeId mu, NodeId log_var, std::size_t dim);
NodeId reparameterize(Graph& g, NodeId mu, NodeId log_var, NodeId eps);

struct MixtureNodes {
  std::vector<NodeId> mu;
  std::vector<NodeId> log_var;
  std::vector<double> priors;
};

// Registers the mixture's means and log-variances as parameters named
// "<prefix>/mu/c" and "<prefix>/log_var/c".
MixtureNodes mixture_parameters(Graph& g, const GaussianMixture& m, const std::string& prefix = "mixture");

// n x C matrix of log p(c) + log N(z_i; mu_c, Sigma_c).
NodeId mixture_log_joint(Graph& g, NodeId z, const MixtureNodes& m, std::size_t batch, std::size_t dim);

}  // namespace ops

}  // namespace disvae
