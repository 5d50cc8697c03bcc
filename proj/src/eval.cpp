#include "disvae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "disvae/autodiff.hpp"

namespace disvae {

namespace {

Tensor softmax_rows(const Tensor& logits) {
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row_span(i);
    const double m = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) z += std::exp(r[j] - m);
    for (std::size_t j = 0; j < r.size(); ++j) out.at(i, j) = std::exp(r[j] - m) / z;
  }
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

void check_class(const NetworkParams& params, int c) {
  if (c < 0 || static_cast<std::size_t>(c) >= params.mixture.size()) {
    throw std::out_of_range("class " + std::to_string(c) + " outside [0, " + std::to_string(params.mixture.size()) +
                            ")");
  }
}

Tensor sample_class_code(const NetworkParams& params, int c, Rng& rng) {
  const auto& comp = params.mixture.components[static_cast<std::size_t>(c)];
  return reparameterize(comp, rng.normal_tensor(1, comp.dim()));
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  Tensor out({rows.size(), rows.front().numel()});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].numel(); ++j) out.at(i, j) = rows[i][j];
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Oracle classifier

OracleClassifier::OracleClassifier(Mlp net, double heldout_accuracy, double threshold)
    : net_(std::move(net)), heldout_accuracy_(heldout_accuracy), threshold_(threshold) {}

OracleClassifier OracleClassifier::train(const Dataset& real, const OracleOptions& o) {
  real.validate();
  if (real.num_classes < 2) throw std::invalid_argument("oracle needs at least two classes");
  for (int y : real.labels) {
    if (y == kUnlabeled) throw std::invalid_argument("oracle training data must be fully labeled");
  }
  if (!(o.holdout_fraction > 0.0 && o.holdout_fraction < 1.0)) {
    throw std::invalid_argument("holdout_fraction must be in (0, 1)");
  }
  Rng rng(o.seed);
  std::vector<std::size_t> order(real.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto n_hold = static_cast<std::size_t>(std::ceil(o.holdout_fraction * static_cast<double>(real.size())));
  if (n_hold == 0 || n_hold >= real.size()) throw std::invalid_argument("dataset too small for a held-out split");
  const std::vector<std::size_t> hold(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  const std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  const Dataset train_set = real.subset(fit);
  const Dataset held_set = real.subset(hold);

  Mlp net = make_mlp({real.dim(), o.hidden, real.num_classes, Activation::kRelu, OutputHead::kLinear}, rng);
  AdamState state = make_adam_state("oracle", std::as_const(net).tensors());
  const AdamSettings settings{o.learning_rate, 0.9, 0.999, 1e-8};
  for (std::size_t epoch = 1; epoch <= o.epochs; ++epoch) {
    for (const auto& rows : batch_iter(train_set.size(), o.batch_size, o.seed, epoch)) {
      const Dataset b = train_set.subset(rows);
      Graph g;
      BoundMlp bound = bind(g, net, "oracle");
      NodeId logits = apply(g, bound, g.constant(b.x));
      NodeId picked = g.sum_cols(g.mul(logits, g.constant(one_hot(b.labels, real.num_classes))));
      NodeId loss = g.mean(g.sub(g.logsumexp_rows(logits), picked));
      Evaluation ev = evaluate(g);
      Gradients grads = backward(g, ev, loss);
      std::vector<Tensor> gs;
      for (NodeId id : bound.params) gs.push_back(grads.at(id));
      adam_update(net.tensors(), gs, state, settings);
    }
  }
  OracleClassifier oracle(std::move(net), 0.0, o.accuracy_threshold);
  oracle.heldout_accuracy_ = oracle.accuracy(held_set);
  return oracle;
}

Tensor OracleClassifier::probabilities(const Tensor& x) const { return softmax_rows(mlp_forward(net_, x)); }

std::vector<int> OracleClassifier::predict(const Tensor& x) const {
  const Tensor logits = mlp_forward(net_, x);
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row_span(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

double OracleClassifier::accuracy(const Dataset& ds) const {
  const auto pred = predict(ds.x);
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (ds.labels[i] == kUnlabeled) continue;
    ++total;
    hits += pred[i] == ds.labels[i];
  }
  if (total == 0) throw std::invalid_argument("accuracy needs labeled rows");
  return static_cast<double>(hits) / static_cast<double>(total);
}

double classifier_score_from_probabilities(const Tensor& probs) {
  if (probs.rank() != 2 || probs.rows() == 0) throw std::invalid_argument("classifier_score: empty batch");
  const std::size_t n = probs.rows(), C = probs.cols();
  std::vector<double> marginal(C, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < C; ++j) marginal[j] += probs.at(i, j);
  for (double& p : marginal) p /= static_cast<double>(n);
  double kl_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      const double p = probs.at(i, j);
      if (p > 0.0) kl_sum += p * (std::log(p) - std::log(marginal[j]));
    }
  }
  const double score = std::exp(kl_sum / static_cast<double>(n));
  return std::clamp(score, 1.0, static_cast<double>(C));
}

double classifier_score(const Tensor& generated, const OracleClassifier& oracle) {
  if (!oracle.meets_threshold()) {
    throw std::runtime_error("oracle held-out accuracy " + std::to_string(oracle.heldout_accuracy()) +
                             " is below the threshold " + std::to_string(oracle.threshold()));
  }
  if (generated.rank() != 2 || generated.rows() == 0) throw std::invalid_argument("classifier_score: empty batch");
  return classifier_score_from_probabilities(oracle.probabilities(generated));
}

// ---------------------------------------------------------------------------
// Diversity and coverage

Kernel rbf_kernel(double bandwidth) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("kernel bandwidth must be positive");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  return [inv](std::span<const double> a, std::span<const double> b) { return std::exp(-squared_distance(a, b) * inv); };
}

double median_pairwise_distance(const Tensor& x) {
  if (x.rank() != 2 || x.rows() < 2) throw std::invalid_argument("median distance needs at least two points");
  std::vector<double> d;
  d.reserve(x.rows() * (x.rows() - 1) / 2);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i + 1; j < x.rows(); ++j) d.push_back(std::sqrt(squared_distance(x.row_span(i), x.row_span(j))));
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  const double hi = d[mid];
  if (d.size() % 2 == 1) return hi;
  const double lo = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

double intra_class_diversity(const Tensor& x, const Kernel& kernel) {
  if (x.rank() != 2 || x.rows() < 2) throw std::invalid_argument("diversity needs at least two samples");
  const std::size_t n = x.rows();
  double total = static_cast<double>(n);  // k(x, x) = 1
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) total += 2.0 * kernel(x.row_span(i), x.row_span(j));
  return 1.0 - total / static_cast<double>(n * n);
}

double mean_class_diversity(const Dataset& generated, const Dataset& real) {
  double sum = 0.0;
  for (std::size_t c = 0; c < real.num_classes; ++c) {
    const int label = static_cast<int>(c);
    const double h = median_pairwise_distance(real.only_class(label).x);
    sum += intra_class_diversity(generated.only_class(label).x, rbf_kernel(h));
  }
  return sum / static_cast<double>(real.num_classes);
}

NearestNeighborReport nearest_neighbor_report(const Dataset& generated, const Dataset& real) {
  NearestNeighborReport r;
  for (std::size_t c = 0; c < real.num_classes; ++c) {
    const Tensor ref = real.only_class(static_cast<int>(c)).x;
    const Tensor gen = generated.only_class(static_cast<int>(c)).x;
    if (ref.rows() < 2) throw std::invalid_argument("nearest-neighbor report needs two real points per class");
    auto nearest = [&](std::span<const double> p, std::size_t skip) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < ref.rows(); ++k) {
        if (k != skip) best = std::min(best, squared_distance(p, ref.row_span(k)));
      }
      return std::sqrt(best);
    };
    double g = 0.0, in = 0.0;
    for (std::size_t i = 0; i < gen.rows(); ++i) g += nearest(gen.row_span(i), ref.rows());
    for (std::size_t i = 0; i < ref.rows(); ++i) in += nearest(ref.row_span(i), i);
    r.generated_to_real.push_back(g / static_cast<double>(gen.rows()));
    r.real_internal.push_back(in / static_cast<double>(ref.rows()));
    r.ratio.push_back(r.generated_to_real.back() / r.real_internal.back());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Generation

Dataset generate(const NetworkParams& params, std::size_t per_class, Rng& rng) {
  if (per_class < 1) throw std::invalid_argument("per_class must be >= 1");
  const std::size_t C = params.mixture.size();
  const std::size_t dzu = params.enc_u.spec.output_dim;
  std::vector<Tensor> zs;
  std::vector<int> labels;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      zs.push_back(sample_class_code(params, static_cast<int>(c), rng));
      labels.push_back(static_cast<int>(c));
    }
  }
  const Tensor z_u = rng.normal_tensor(zs.size(), dzu);
  return {decoder_forward(params, stack_rows(zs), z_u), std::move(labels), C};
}

Dataset generate_baseline(const BaselineParams& params, std::size_t per_class, Rng& rng) {
  if (per_class < 1) throw std::invalid_argument("per_class must be >= 1");
  std::vector<int> labels;
  for (std::size_t c = 0; c < params.num_classes; ++c) labels.insert(labels.end(), per_class, static_cast<int>(c));
  const Tensor z = rng.normal_tensor(labels.size(), params.latent_dim());
  Tensor x = baseline_decode(params, z, labels);
  return {std::move(x), std::move(labels), params.num_classes};
}

// ---------------------------------------------------------------------------
// Latent procedures

std::string to_string(TraversalMode mode) {
  switch (mode) {
    case TraversalMode::kVaryZs: return "vary-z_s";
    case TraversalMode::kVaryZu: return "vary-z_u";
    case TraversalMode::kVaryZuDim: return "vary-z_u-dim";
  }
  throw std::invalid_argument("unknown traversal mode");
}

TraversalMode parse_traversal_mode(const std::string& s) {
  for (auto m : {TraversalMode::kVaryZs, TraversalMode::kVaryZu, TraversalMode::kVaryZuDim}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown traversal mode '" + s + "' (vary-z_s, vary-z_u, vary-z_u-dim)");
}

TraversalCodes draw_traversal_codes(const NetworkParams& params, int c, TraversalMode mode, Rng& rng) {
  check_class(params, c);
  const std::size_t dzs = params.mixture.dim();
  const std::size_t dzu = params.enc_u.spec.output_dim;
  TraversalCodes codes;
  switch (mode) {
    case TraversalMode::kVaryZs:
      codes.z1 = rng.normal_tensor(1, dzs);
      codes.z2 = rng.normal_tensor(1, dzs);
      codes.fixed = rng.normal_tensor(1, dzu);
      break;
    case TraversalMode::kVaryZu:
      codes.z1 = rng.normal_tensor(1, dzu);
      codes.z2 = rng.normal_tensor(1, dzu);
      codes.fixed = sample_class_code(params, c, rng);
      break;
    case TraversalMode::kVaryZuDim:
      codes.z1 = rng.normal_tensor(1, dzu);
      codes.z2 = codes.z1;
      codes.fixed = sample_class_code(params, c, rng);
      break;
  }
  return codes;
}

Traversal latent_traversal(const NetworkParams& params, int c, std::span<const double> grid, TraversalMode mode,
                           const TraversalCodes& codes, std::size_t dim) {
  check_class(params, c);
  if (grid.empty()) throw std::invalid_argument("traversal grid is empty");
  const std::size_t dzs = params.mixture.dim();
  const std::size_t dzu = params.enc_u.spec.output_dim;
  const bool vary_s = mode == TraversalMode::kVaryZs;
  const std::size_t d_var = vary_s ? dzs : dzu;
  if (codes.z1.numel() != d_var || (mode != TraversalMode::kVaryZuDim && codes.z2.numel() != d_var) ||
      codes.fixed.numel() != (vary_s ? dzu : dzs)) {
    throw std::invalid_argument("traversal codes do not match the latent dimensions");
  }
  if (mode == TraversalMode::kVaryZuDim && dim >= dzu) {
    throw std::out_of_range("traversal dimension " + std::to_string(dim) + " outside z_u");
  }
  const auto& comp = params.mixture.components[static_cast<std::size_t>(c)];
  const std::size_t n = grid.size();
  Traversal t{Tensor({n, dzs}), Tensor({n, dzu}), Tensor()};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = grid[i];
    if (mode == TraversalMode::kVaryZuDim) {
      for (std::size_t j = 0; j < dzu; ++j) t.z_u.at(i, j) = j == dim ? a : codes.z1[j];
    } else {
      Tensor z({1, d_var});
      // Equal coordinates are copied so coinciding endpoints give a constant path.
      for (std::size_t j = 0; j < d_var; ++j) {
        z[j] = codes.z1[j] == codes.z2[j] ? codes.z1[j] : a * codes.z1[j] + (1.0 - a) * codes.z2[j];
      }
      if (vary_s) {
        const Tensor code = reparameterize(comp, z);
        for (std::size_t j = 0; j < dzs; ++j) t.z_s.at(i, j) = code[j];
      } else {
        for (std::size_t j = 0; j < dzu; ++j) t.z_u.at(i, j) = z[j];
      }
    }
    if (vary_s) {
      for (std::size_t j = 0; j < dzu; ++j) t.z_u.at(i, j) = codes.fixed[j];
    } else {
      for (std::size_t j = 0; j < dzs; ++j) t.z_s.at(i, j) = codes.fixed[j];
    }
  }
  t.x = decoder_forward(params, t.z_s, t.z_u);
  return t;
}

Traversal latent_traversal(const NetworkParams& params, int c, std::span<const double> grid, TraversalMode mode,
                           Rng& rng, std::size_t dim) {
  return latent_traversal(params, c, grid, mode, draw_traversal_codes(params, c, mode, rng), dim);
}

Tensor reconstruct(const NetworkParams& params, const Tensor& x) {
  return decoder_forward(params, encoder_s_forward(params, x), encoder_u_forward(params, x).mu);
}

Tensor synthesize_swap(const NetworkParams& params, const Tensor& x_a, const Tensor& x_b) {
  if (x_a.shape() != x_b.shape()) {
    throw std::invalid_argument("swap: inputs " + shape_str(x_a.shape()) + " and " + shape_str(x_b.shape()));
  }
  return decoder_forward(params, encoder_s_forward(params, x_a), encoder_u_forward(params, x_b).mu);
}

Tensor inpaint(const NetworkParams& params, const Tensor& x, const Tensor& mask) {
  if (mask.shape() != x.shape()) {
    throw std::invalid_argument("inpaint: mask " + shape_str(mask.shape()) + " vs input " + shape_str(x.shape()));
  }
  for (double m : mask.data()) {
    if (m != 0.0 && m != 1.0) throw std::invalid_argument("inpaint: mask must be binary");
  }
  Tensor corrupted = x;
  for (std::size_t k = 0; k < x.numel(); ++k) {
    if (mask[k] == 1.0) corrupted[k] = 0.0;
  }
  const Tensor filled = reconstruct(params, corrupted);
  // M * x' + (1 - M) * x, written as a selection so kept entries (including
  // signed zeros) are copied bit for bit.
  Tensor out = x;
  for (std::size_t k = 0; k < x.numel(); ++k) {
    if (mask[k] == 1.0) out[k] = filled[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

std::string metrics_csv(std::span<const MetricRow> rows) {
  std::ostringstream os;
  os << std::setprecision(10) << "metric,subset,value\n";
  for (const auto& r : rows) os << r.metric << ',' << r.subset << ',' << r.value << '\n';
  return os.str();
}

std::string scatter_svg(const Dataset& points, const std::string& title) {
  if (points.x.rank() != 2 || points.x.cols() < 2 || points.size() == 0) {
    throw std::invalid_argument("scatter_svg needs two-column points");
  }
  static constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                             "#8c564b", "#e377c2", "#17becf"};
  constexpr double W = 480, H = 400, pad = 30;
  double x0 = points.x.at(0, 0), x1 = x0, y0 = points.x.at(0, 1), y1 = y0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    x0 = std::min(x0, points.x.at(i, 0));
    x1 = std::max(x1, points.x.at(i, 0));
    y0 = std::min(y0, points.x.at(i, 1));
    y1 = std::max(y1, points.x.at(i, 1));
  }
  const double sx = (W - 2 * pad) / std::max(x1 - x0, 1e-9);
  const double sy = (H - 2 * pad) / std::max(y1 - y0, 1e-9);
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << pad << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int y = points.labels[i];
    const char* color = y == kUnlabeled ? "#999999" : kPalette[static_cast<std::size_t>(y) % std::size(kPalette)];
    os << "<circle cx=\"" << pad + (points.x.at(i, 0) - x0) * sx << "\" cy=\""
       << H - pad - (points.x.at(i, 1) - y0) * sy << "\" r=\"1.5\" fill=\"" << color << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace disvae
