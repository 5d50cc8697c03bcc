#include "disvae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace disvae {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

namespace {

template <class State, class Visit>
void visit_tensors(State& s, Visit&& visit) {
  auto visit_mlp = [&](const std::string& prefix, auto& net) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      visit(prefix + "/w" + std::to_string(i), net.layers[i].weight);
      visit(prefix + "/b" + std::to_string(i), net.layers[i].bias);
    }
  };
  if (s.config.mode == TrainMode::kBaselineCvaeGan) {
    visit_mlp("baseline/encoder", s.baseline.encoder);
    visit_mlp("baseline/decoder", s.baseline.decoder);
    visit_mlp("baseline/discriminator", s.baseline.discriminator);
  } else {
    visit_mlp("enc_s", s.params.enc_s);
    visit_mlp("enc_u", s.params.enc_u);
    visit_mlp("decoder", s.params.decoder);
    visit_mlp("classifier", s.params.adv_classifier);
    visit_mlp("discriminator", s.params.discriminator);
    auto& comps = s.params.mixture.components;
    for (std::size_t c = 0; c < comps.size(); ++c) {
      visit("mixture/mu/" + std::to_string(c), comps[c].mu);
      visit("mixture/log_var/" + std::to_string(c), comps[c].log_var);
    }
  }
  for (auto& [name, opt] : s.optimizers) {
    for (std::size_t i = 0; i < opt.m.size(); ++i) {
      visit("adam/" + name + "/m/" + std::to_string(i), opt.m[i]);
      visit("adam/" + name + "/v/" + std::to_string(i), opt.v[i]);
    }
  }
}

std::string hex(double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  return os.str();
}

// Line-oriented reader over the header with field-named errors.
class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  [[noreturn]] void fail(const std::string& field, const std::string& why) const {
    throw std::runtime_error("checkpoint field '" + field + "': " + why);
  }

  std::string line(const std::string& field) {
    const auto end = bytes_.find('\n', pos_);
    if (end == std::string::npos) fail(field, "truncated header");
    std::string out = bytes_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }

  std::string raw(std::size_t n, const std::string& field) {
    if (bytes_.size() - pos_ < n + 1) fail(field, "truncated header");
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    if (bytes_[pos_] != '\n') fail(field, "declared length does not match contents");
    ++pos_;
    return out;
  }

  // Splits "<key> a b c" and checks the key.
  std::vector<std::string> record(const std::string& key, std::size_t min_fields) {
    std::istringstream is(line(key));
    std::vector<std::string> tokens;
    std::string t;
    while (is >> t) tokens.push_back(t);
    if (tokens.empty() || tokens[0] != key) fail(key, "expected '" + key + "' record");
    if (tokens.size() < min_fields + 1) fail(key, "expected " + std::to_string(min_fields) + " values");
    tokens.erase(tokens.begin());
    return tokens;
  }

  std::uint64_t integer(const std::string& token, const std::string& field) const {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(token, &used);
    } catch (const std::exception&) {
      fail(field, "malformed integer '" + token + "'");
    }
    if (used != token.size()) fail(field, "malformed integer '" + token + "'");
    return v;
  }

  double real(const std::string& token, const std::string& field) const {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (token.empty() || end != token.c_str() + token.size()) fail(field, "malformed number '" + token + "'");
    return v;
  }

  std::size_t position() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

constexpr const char* kLossFields[] = {"l_rec", "l_kl",    "l_lkd",    "l_cls",    "l_gm",         "l_e_adv",
                                       "l_c_adv", "l_d_adv", "l_gd_adv", "elbo_estimate", "gm_stage_loss"};

std::vector<double*> loss_slots(EpochRecord& e) {
  auto& l = e.losses;
  return {&l.l_rec,   &l.l_kl,    &l.l_lkd,    &l.l_cls,          &l.l_gm,         &l.l_e_adv,
          &l.l_c_adv, &l.l_d_adv, &l.l_gd_adv, &l.elbo_estimate, &e.gm_stage_loss};
}

}  // namespace

std::string serialize_checkpoint(const TrainState& s) {
  std::ostringstream os;
  const std::string cfg = format_config(s.config);
  const std::string rng = s.rng.state();
  os << kCheckpointVersion << '\n';
  os << "config " << cfg.size() << '\n' << cfg << '\n';
  os << "epoch " << s.epoch << '\n';
  os << "rng " << rng.size() << '\n' << rng << '\n';
  os << "history " << s.history.seed << ' ' << s.history.epochs.size() << '\n';
  for (const auto& e : s.history.epochs) {
    EpochRecord copy = e;
    os << "record " << e.epoch;
    for (double* v : loss_slots(copy)) os << ' ' << hex(*v);
    os << '\n';
  }
  os << "optimizers " << s.optimizers.size() << '\n';
  for (const auto& [name, opt] : s.optimizers) {
    os << "optimizer " << name << ' ' << opt.step << ' ' << hex(opt.lr_multiplier) << ' ' << opt.m.size() << '\n';
  }

  std::vector<std::pair<std::string, const Tensor*>> tensors;
  visit_tensors(s, [&](const std::string& name, const Tensor& t) { tensors.emplace_back(name, &t); });
  std::size_t total = 0;
  os << "tensors " << tensors.size() << '\n';
  for (const auto& [name, t] : tensors) {
    os << "tensor " << name << ' ' << t->rank();
    for (auto d : t->shape()) os << ' ' << d;
    os << '\n';
    total += t->numel();
  }
  os << "payload " << total << '\n' << "end\n";

  std::string out = os.str();
  const std::size_t header = out.size();
  out.resize(header + total * sizeof(double));
  char* dst = out.data() + header;
  for (const auto& [name, t] : tensors) {
    std::memcpy(dst, t->values().data(), t->numel() * sizeof(double));
    dst += t->numel() * sizeof(double);
  }
  return out;
}

TrainState deserialize_checkpoint(const std::string& bytes) {
  HeaderReader in(bytes);
  const auto eol = bytes.find('\n');
  const std::string version = bytes.substr(0, std::min(eol, std::size_t{64}));
  if (version != kCheckpointVersion) {
    if (version.rfind("DISVAE", 0) == 0) {
      in.fail("version", "unsupported checkpoint version '" + version + "', expected '" +
                             std::string(kCheckpointVersion) + "'");
    }
    in.fail("version", "not a checkpoint file");
  }
  (void)in.line("version");

  const auto cfg_len = in.integer(in.record("config", 1)[0], "config");
  TrainConfig config;
  try {
    config = parse_config(in.raw(cfg_len, "config"));
  } catch (const std::invalid_argument& e) {
    in.fail("config", e.what());
  }
  TrainState s = init_training(config);

  s.epoch = in.integer(in.record("epoch", 1)[0], "epoch");
  const auto rng_len = in.integer(in.record("rng", 1)[0], "rng");
  try {
    s.rng.restore(in.raw(rng_len, "rng"));
  } catch (const std::invalid_argument& e) {
    in.fail("rng", e.what());
  }

  const auto hist = in.record("history", 2);
  s.history.seed = in.integer(hist[0], "history");
  const auto n_records = in.integer(hist[1], "history");
  for (std::uint64_t r = 0; r < n_records; ++r) {
    const std::string field = "history record " + std::to_string(r + 1);
    const auto f = in.record("record", 1 + std::size(kLossFields));
    EpochRecord e;
    e.epoch = in.integer(f[0], field);
    auto slots = loss_slots(e);
    for (std::size_t k = 0; k < slots.size(); ++k) *slots[k] = in.real(f[k + 1], field + " " + kLossFields[k]);
    s.history.epochs.push_back(e);
  }

  const auto n_opt = in.integer(in.record("optimizers", 1)[0], "optimizers");
  if (n_opt != s.optimizers.size()) {
    in.fail("optimizers", std::to_string(n_opt) + " optimizer states, mode " + to_string(config.mode) + " uses " +
                              std::to_string(s.optimizers.size()));
  }
  for (std::uint64_t k = 0; k < n_opt; ++k) {
    const auto f = in.record("optimizer", 4);
    auto it = s.optimizers.find(f[0]);
    if (it == s.optimizers.end()) in.fail("optimizer", "unknown parameter group '" + f[0] + "'");
    const std::string field = "optimizer " + f[0];
    it->second.step = in.integer(f[1], field);
    it->second.lr_multiplier = in.real(f[2], field);
    if (in.integer(f[3], field) != it->second.m.size()) in.fail(field, "tensor count does not match the model");
  }

  std::map<std::string, Tensor*> slots;
  visit_tensors(s, [&](const std::string& name, Tensor& t) { slots.emplace(name, &t); });
  const auto n_tensors = in.integer(in.record("tensors", 1)[0], "tensors");
  if (n_tensors != slots.size()) {
    in.fail("tensors", "header lists " + std::to_string(n_tensors) + " tensors, the config implies " +
                           std::to_string(slots.size()));
  }
  std::vector<Tensor*> order;
  std::size_t total = 0;
  for (std::uint64_t k = 0; k < n_tensors; ++k) {
    const auto f = in.record("tensor", 2);
    const std::string field = "tensor " + f[0];
    auto it = slots.find(f[0]);
    if (it == slots.end()) in.fail(field, "not part of the model");
    const auto rank = in.integer(f[1], field);
    if (f.size() != 2 + rank) in.fail(field, "rank and dimension count disagree");
    Shape shape;
    for (std::size_t d = 0; d < rank; ++d) shape.push_back(in.integer(f[2 + d], field));
    if (shape != it->second->shape()) {
      in.fail(field, "shape " + shape_str(shape) + " does not match the config shape " +
                         shape_str(it->second->shape()));
    }
    order.push_back(it->second);
    slots.erase(it);
    total += shape_numel(shape);
  }
  const auto declared = in.integer(in.record("payload", 1)[0], "payload");
  if (declared != total) in.fail("payload", "declares " + std::to_string(declared) + " values, tensors need " +
                                                std::to_string(total));
  if (in.line("end") != "end") in.fail("end", "missing header terminator");
  const std::size_t available = bytes.size() - in.position();
  if (available != total * sizeof(double)) {
    in.fail("payload", "expected " + std::to_string(total * sizeof(double)) + " bytes, found " +
                           std::to_string(available));
  }
  const char* src = bytes.data() + in.position();
  for (Tensor* t : order) {
    std::memcpy(t->data().data(), src, t->numel() * sizeof(double));
    src += t->numel() * sizeof(double);
  }
  return s;
}

void save_checkpoint(const std::string& path, const TrainState& state) {
  write_file_atomic(path, serialize_checkpoint(state));
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace disvae
