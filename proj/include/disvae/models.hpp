#pragma once

#include <span>
#include <string>
#include <vector>

#include "disvae/autodiff.hpp"
#include "disvae/config.hpp"
#include "disvae/distributions.hpp"
#include "disvae/rng.hpp"

namespace disvae {

enum class OutputHead {
  kLinear,
  kGaussianPair,  // 2 * output_dim columns: mean then log-variance
  kSigmoid,       // probability clamped to [kProbFloor, 1 - kProbFloor]
};

inline constexpr double kProbFloor = 1e-7;

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 1;
  Activation hidden_activation = Activation::kRelu;
  OutputHead head = OutputHead::kLinear;

  void validate() const;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
  friend bool operator==(const Linear&, const Linear&) = default;
};

struct Mlp {
  MlpSpec spec;
  std::vector<Linear> layers;

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  friend bool operator==(const Mlp&, const Mlp&) = default;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
Mlp make_mlp(const MlpSpec& spec, Rng& rng);

// Parameter nodes of one network registered in a graph, in Mlp::tensors()
// order. A bound network can be applied to several inputs of the same graph.
struct BoundMlp {
  const Mlp* net = nullptr;
  std::vector<NodeId> params;
};

BoundMlp bind(Graph& g, const Mlp& net, const std::string& prefix);
// Output of the last linear layer after the head's nonlinearity. For the
// Gaussian pair head this is the raw (mean | log-variance) matrix.
NodeId apply(Graph& g, const BoundMlp& net, NodeId x);

struct NetworkParams {
  Mlp enc_s;           // psi
  Mlp enc_u;           // phi
  Mlp decoder;         // theta
  Mlp adv_classifier;  // omega
  Mlp discriminator;   // theta_d
  GaussianMixture mixture;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

// Encoders: x -> encoder_hidden -> z; decoder: (z_s | z_u) -> decoder_hidden
// -> x; classifier: z_u -> classifier_hidden -> C logits; discriminator:
// (x | one_hot(c)) -> discriminator_hidden -> probability. Mixture means are
// drawn from N(0, I) with unit variances.
NetworkParams build_networks(const TrainConfig& config, Rng& rng);

// Per-sample Gaussian codes, rows are samples.
struct GaussianBatch {
  Tensor mu;
  Tensor log_var;

  std::size_t size() const { return mu.rows(); }
  DiagGaussian at(std::size_t i) const { return {mu.row_copy(i), log_var.row_copy(i)}; }
};

Tensor encoder_s_forward(const NetworkParams& params, const Tensor& x);
GaussianBatch encoder_u_forward(const NetworkParams& params, const Tensor& x);
Tensor decoder_forward(const NetworkParams& params, const Tensor& z_s, const Tensor& z_u);
Tensor classifier_forward(const NetworkParams& params, const Tensor& z_u);
Tensor discriminator_forward(const NetworkParams& params, const Tensor& x, std::span<const int> labels);

// Single-network forward, used by the baseline and the oracle classifier.
Tensor mlp_forward(const Mlp& net, const Tensor& x);

}  // namespace disvae
