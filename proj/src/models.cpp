#include "disvae/models.hpp"

#include <cmath>
#include <stdexcept>

namespace disvae {

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("MlpSpec: dimensions must be >= 1");
  for (auto h : hidden_dims) {
    if (h < 1) throw std::invalid_argument("MlpSpec: hidden sizes must be >= 1");
  }
}

std::vector<Tensor*> Mlp::tensors() {
  std::vector<Tensor*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor*> Mlp::tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

Mlp make_mlp(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  Mlp net{spec, {}};
  std::vector<std::size_t> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  dims.push_back(spec.head == OutputHead::kGaussianPair ? 2 * spec.output_dim : spec.output_dim);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    Linear l{Tensor({dims[i], dims[i + 1]}), Tensor({1, dims[i + 1]})};
    for (double& w : l.weight.data()) w = rng.uniform(-bound, bound);
    for (double& b : l.bias.data()) b = rng.uniform(-bound, bound);
    net.layers.push_back(std::move(l));
  }
  return net;
}

BoundMlp bind(Graph& g, const Mlp& net, const std::string& prefix) {
  BoundMlp out{&net, {}};
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    out.params.push_back(g.parameter(prefix + "/w" + std::to_string(i), net.layers[i].weight));
    out.params.push_back(g.parameter(prefix + "/b" + std::to_string(i), net.layers[i].bias));
  }
  return out;
}

NodeId apply(Graph& g, const BoundMlp& net, NodeId x) {
  const auto& spec = net.net->spec;
  const std::size_t n_layers = net.net->layers.size();
  NodeId h = x;
  for (std::size_t i = 0; i < n_layers; ++i) {
    h = g.add_bias(g.matmul(h, net.params[2 * i]), net.params[2 * i + 1]);
    if (i + 1 < n_layers) {
      h = spec.hidden_activation == Activation::kRelu ? g.relu(h) : g.tanh(h);
    }
  }
  if (spec.head == OutputHead::kSigmoid) h = g.clamp(g.sigmoid(h), kProbFloor, 1.0 - kProbFloor);
  return h;
}

NetworkParams build_networks(const TrainConfig& config, Rng& rng) {
  config.validate();
  const auto act = config.activation;
  const std::size_t d = config.data_dim, C = config.num_classes;
  NetworkParams p;
  p.enc_s = make_mlp({d, config.encoder_hidden, config.dim_z_s, act, OutputHead::kLinear}, rng);
  p.enc_u = make_mlp({d, config.encoder_hidden, config.dim_z_u, act, OutputHead::kGaussianPair}, rng);
  p.decoder = make_mlp({config.dim_z_s + config.dim_z_u, config.decoder_hidden, d, act, OutputHead::kLinear}, rng);
  p.adv_classifier = make_mlp({config.dim_z_u, config.classifier_hidden, C, act, OutputHead::kLinear}, rng);
  p.discriminator = make_mlp({d + C, config.discriminator_hidden, 1, act, OutputHead::kSigmoid}, rng);
  std::vector<DiagGaussian> comps;
  for (std::size_t c = 0; c < C; ++c) {
    comps.push_back({rng.normal_tensor(1, config.dim_z_s), Tensor({1, config.dim_z_s}, 0.0)});
  }
  p.mixture = GaussianMixture::uniform(std::move(comps));
  return p;
}

Tensor mlp_forward(const Mlp& net, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != net.spec.input_dim) {
    throw std::invalid_argument("network expects " + std::to_string(net.spec.input_dim) + " input columns, got " +
                                shape_str(x.shape()));
  }
  Graph g;
  NodeId in = g.input("x");
  NodeId out = apply(g, bind(g, net, "net"), in);
  return evaluate(g, {{in, x}})[out];
}

Tensor encoder_s_forward(const NetworkParams& params, const Tensor& x) { return mlp_forward(params.enc_s, x); }

GaussianBatch encoder_u_forward(const NetworkParams& params, const Tensor& x) {
  Tensor raw = mlp_forward(params.enc_u, x);
  const std::size_t k = params.enc_u.spec.output_dim;
  GaussianBatch out{Tensor({raw.rows(), k}), Tensor({raw.rows(), k})};
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      out.mu.at(r, j) = raw.at(r, j);
      out.log_var.at(r, j) = raw.at(r, k + j);
    }
  }
  return out;
}

Tensor decoder_forward(const NetworkParams& params, const Tensor& z_s, const Tensor& z_u) {
  if (z_s.rank() != 2 || z_u.rank() != 2 || z_s.rows() != z_u.rows()) {
    throw std::invalid_argument("decoder: code batches " + shape_str(z_s.shape()) + " and " +
                                shape_str(z_u.shape()) + " do not pair up");
  }
  return mlp_forward(params.decoder, hconcat(z_s, z_u));
}

Tensor classifier_forward(const NetworkParams& params, const Tensor& z_u) {
  return mlp_forward(params.adv_classifier, z_u);
}

Tensor discriminator_forward(const NetworkParams& params, const Tensor& x, std::span<const int> labels) {
  if (x.rank() != 2 || x.rows() != labels.size() || x.cols() >= params.discriminator.spec.input_dim) {
    throw std::invalid_argument("discriminator: " + std::to_string(labels.size()) + " labels for batch " +
                                shape_str(x.shape()));
  }
  const std::size_t C = params.discriminator.spec.input_dim - x.cols();
  return mlp_forward(params.discriminator, hconcat(x, one_hot(labels, C)));
}

}  // namespace disvae
