#include "disvae/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <type_traits>

namespace disvae {

namespace pt = boost::property_tree;

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kFull: return "full";
    case TrainMode::kSemisupervisedFinetune: return "semisupervised-finetune";
    case TrainMode::kBaselineCvaeGan: return "baseline-cvaegan";
  }
  return "?";
}

std::string to_string(Activation act) { return act == Activation::kRelu ? "relu" : "tanh"; }

TrainMode parse_train_mode(const std::string& s) {
  if (s == "full") return TrainMode::kFull;
  if (s == "semisupervised-finetune") return TrainMode::kSemisupervisedFinetune;
  if (s == "baseline-cvaegan") return TrainMode::kBaselineCvaeGan;
  throw std::invalid_argument("unknown training mode '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

void TrainConfig::derive_loss_weights() {
  lambda_kl = 10.0 / static_cast<double>(data_dim);
  lambda_rec = 1.0 / static_cast<double>(dim_z_u);
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("invalid config: " + m); };
  if (data_dim < 1 || dim_z_s < 1 || dim_z_u < 1) fail("dimensions must be >= 1");
  if (num_classes < 2) fail("num_classes must be >= 2");
  for (const auto* dims : {&encoder_hidden, &decoder_hidden, &classifier_hidden, &discriminator_hidden}) {
    for (auto d : *dims) {
      if (d < 1) fail("hidden layer sizes must be >= 1");
    }
  }
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
  if (!(lambda_lkd >= 0.0) || !(lambda_kl >= 0.0) || !(lambda_rec >= 0.0)) fail("loss weights must be >= 0");
  if (!(sigma_c_decay_factor >= 0.0)) fail("sigma_c_decay_factor must be >= 0");
}

namespace {

std::string format_dims(const std::vector<std::size_t>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(dims[i]);
  }
  return out;
}

std::vector<std::size_t> parse_dims(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    const auto v = std::stoull(item, &pos);
    if (pos != item.size() && item.find_first_not_of(' ', pos) != std::string::npos) {
      throw std::invalid_argument("bad layer list '" + s + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

const std::set<std::string> kKnownKeys = {
    "model.data_dim", "model.dim_z_s", "model.dim_z_u", "model.num_classes", "model.encoder_hidden",
    "model.decoder_hidden", "model.classifier_hidden", "model.discriminator_hidden", "model.activation",
    "train.n_gm", "train.batch_size", "train.epochs", "train.seed", "train.mode",
    "optimizer.learning_rate", "optimizer.beta1", "optimizer.beta2", "optimizer.eps",
    "optimizer.sigma_c_decay_factor", "optimizer.sigma_c_decay_epoch",
    "loss.lambda_lkd", "loss.lambda_kl", "loss.lambda_rec"};

// Missing keys keep the current value; present but malformed values throw.
template <class T>
void read(const pt::ptree& tree, const std::string& key, T& value) {
  auto node = tree.get_child_optional(key);
  if (!node) return;
  if constexpr (std::is_unsigned_v<T>) {
    if (node->data().find('-') != std::string::npos) {
      throw std::invalid_argument("config value error: '" + key + "' must be a non-negative integer");
    }
  }
  value = node->get_value<T>();
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw std::invalid_argument("config key '" + section + "' outside any section");
    for (const auto& [key, _] : body) {
      if (!kKnownKeys.contains(section + "." + key)) {
        throw std::invalid_argument("unknown config key '" + section + "." + key + "'");
      }
    }
  }

  TrainConfig c;
  try {
    read(tree, "model.data_dim", c.data_dim);
    read(tree, "model.dim_z_s", c.dim_z_s);
    read(tree, "model.dim_z_u", c.dim_z_u);
    read(tree, "model.num_classes", c.num_classes);
    if (auto v = tree.get_optional<std::string>("model.encoder_hidden")) c.encoder_hidden = parse_dims(*v);
    if (auto v = tree.get_optional<std::string>("model.decoder_hidden")) c.decoder_hidden = parse_dims(*v);
    if (auto v = tree.get_optional<std::string>("model.classifier_hidden")) c.classifier_hidden = parse_dims(*v);
    if (auto v = tree.get_optional<std::string>("model.discriminator_hidden")) {
      c.discriminator_hidden = parse_dims(*v);
    }
    if (auto v = tree.get_optional<std::string>("model.activation")) c.activation = parse_activation(*v);

    read(tree, "train.n_gm", c.n_gm);
    read(tree, "train.batch_size", c.batch_size);
    read(tree, "train.epochs", c.epochs);
    read(tree, "train.seed", c.rng_seed);
    if (auto v = tree.get_optional<std::string>("train.mode")) c.mode = parse_train_mode(*v);

    read(tree, "optimizer.learning_rate", c.learning_rate);
    read(tree, "optimizer.beta1", c.beta1);
    read(tree, "optimizer.beta2", c.beta2);
    read(tree, "optimizer.eps", c.adam_eps);
    read(tree, "optimizer.sigma_c_decay_factor", c.sigma_c_decay_factor);
    read(tree, "optimizer.sigma_c_decay_epoch", c.sigma_c_decay_epoch);

    c.derive_loss_weights();
    read(tree, "loss.lambda_lkd", c.lambda_lkd);
    read(tree, "loss.lambda_kl", c.lambda_kl);
    read(tree, "loss.lambda_rec", c.lambda_rec);
  } catch (const pt::ptree_bad_data& e) {
    throw std::invalid_argument(std::string("config value error: ") + e.what());
  }
  c.validate();
  return c;
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "[model]\n"
     << "data_dim = " << c.data_dim << "\n"
     << "dim_z_s = " << c.dim_z_s << "\n"
     << "dim_z_u = " << c.dim_z_u << "\n"
     << "num_classes = " << c.num_classes << "\n"
     << "encoder_hidden = " << format_dims(c.encoder_hidden) << "\n"
     << "decoder_hidden = " << format_dims(c.decoder_hidden) << "\n"
     << "classifier_hidden = " << format_dims(c.classifier_hidden) << "\n"
     << "discriminator_hidden = " << format_dims(c.discriminator_hidden) << "\n"
     << "activation = " << to_string(c.activation) << "\n\n"
     << "[train]\n"
     << "n_gm = " << c.n_gm << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "epochs = " << c.epochs << "\n"
     << "seed = " << c.rng_seed << "\n"
     << "mode = " << to_string(c.mode) << "\n\n"
     << "[optimizer]\n"
     << "learning_rate = " << c.learning_rate << "\n"
     << "beta1 = " << c.beta1 << "\n"
     << "beta2 = " << c.beta2 << "\n"
     << "eps = " << c.adam_eps << "\n"
     << "sigma_c_decay_factor = " << c.sigma_c_decay_factor << "\n"
     << "sigma_c_decay_epoch = " << c.sigma_c_decay_epoch << "\n\n"
     << "[loss]\n"
     << "lambda_lkd = " << c.lambda_lkd << "\n"
     << "lambda_kl = " << c.lambda_kl << "\n"
     << "lambda_rec = " << c.lambda_rec << "\n";
  return os.str();
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace disvae
