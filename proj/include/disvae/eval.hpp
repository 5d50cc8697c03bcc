#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "disvae/data.hpp"
#include "disvae/models.hpp"
#include "disvae/rng.hpp"
#include "disvae/training.hpp"

namespace disvae {

// ---------------------------------------------------------------------------
// Oracle classifier

struct OracleOptions {
  std::vector<std::size_t> hidden{64};
  std::size_t epochs = 40;
  std::size_t batch_size = 64;
  double learning_rate = 0.005;
  double holdout_fraction = 0.2;
  double accuracy_threshold = 0.98;
  std::uint64_t seed = 0;
};

// Softmax MLP trained on real labeled data; scoring is refused unless its
// held-out accuracy reaches the threshold.
class OracleClassifier {
 public:
  static OracleClassifier train(const Dataset& real, const OracleOptions& options = {});
  OracleClassifier(Mlp net, double heldout_accuracy, double threshold);

  Tensor probabilities(const Tensor& x) const;  // n x C, rows sum to 1
  std::vector<int> predict(const Tensor& x) const;
  double accuracy(const Dataset& ds) const;

  double heldout_accuracy() const { return heldout_accuracy_; }
  double threshold() const { return threshold_; }
  bool meets_threshold() const { return heldout_accuracy_ >= threshold_; }
  std::size_t num_classes() const { return net_.spec.output_dim; }

 private:
  Mlp net_;
  double heldout_accuracy_;
  double threshold_;
};

// exp(mean_i KL(p(y | x_i) || p(y))) with p(y) the average of the rows.
double classifier_score_from_probabilities(const Tensor& probs);
double classifier_score(const Tensor& generated, const OracleClassifier& oracle);

// ---------------------------------------------------------------------------
// Diversity and coverage

using Kernel = std::function<double(std::span<const double>, std::span<const double>)>;

Kernel rbf_kernel(double bandwidth);
double median_pairwise_distance(const Tensor& x);

// 1 - mean of k(x, x') over all ordered pairs, self-pairs included.
double intra_class_diversity(const Tensor& x, const Kernel& kernel);

// Mean over classes of the diversity of each generated class, using an RBF
// kernel whose bandwidth is the median pairwise distance of the real points
// of that class.
double mean_class_diversity(const Dataset& generated, const Dataset& real);

struct NearestNeighborReport {
  std::vector<double> generated_to_real;  // per class: mean distance to the nearest real point
  std::vector<double> real_internal;      // per class: mean leave-one-out nearest-neighbor distance
  std::vector<double> ratio;              // generated_to_real / real_internal
};

NearestNeighborReport nearest_neighbor_report(const Dataset& generated, const Dataset& real);

// ---------------------------------------------------------------------------
// Generation

// per_class points of each class: z_s from the class component, z_u ~ N(0, I).
Dataset generate(const NetworkParams& params, std::size_t per_class, Rng& rng);
Dataset generate_baseline(const BaselineParams& params, std::size_t per_class, Rng& rng);

// ---------------------------------------------------------------------------
// Latent procedures

enum class TraversalMode { kVaryZs, kVaryZu, kVaryZuDim };

std::string to_string(TraversalMode mode);
TraversalMode parse_traversal_mode(const std::string& s);

// Codes consumed by a traversal. For kVaryZs the endpoints live in the
// standardized z_s space and are mapped through mu_c + sigma_c; for kVaryZu
// they are z_u codes. `fixed` is the code held constant (a z_u code for
// kVaryZs, a class z_s code for the others). kVaryZuDim only uses `fixed`
// and `z1`, sweeping z1[dim] over the grid.
struct TraversalCodes {
  Tensor z1;
  Tensor z2;
  Tensor fixed;
};

TraversalCodes draw_traversal_codes(const NetworkParams& params, int c, TraversalMode mode, Rng& rng);

struct Traversal {
  Tensor z_s;  // one row per grid value
  Tensor z_u;
  Tensor x;
};

// Endpoint interpolation alpha * z1 + (1 - alpha) * z2, or for kVaryZuDim the
// grid values themselves placed in coordinate `dim` of z_u.
Traversal latent_traversal(const NetworkParams& params, int c, std::span<const double> grid, TraversalMode mode,
                           const TraversalCodes& codes, std::size_t dim = 0);
Traversal latent_traversal(const NetworkParams& params, int c, std::span<const double> grid, TraversalMode mode,
                           Rng& rng, std::size_t dim = 0);

// Deterministic reconstruction: z_s from Encoder^s, z_u at its posterior mean.
Tensor reconstruct(const NetworkParams& params, const Tensor& x);

// Decodes z_s of x_a with the posterior-mean z_u of x_b, row by row.
Tensor synthesize_swap(const NetworkParams& params, const Tensor& x_a, const Tensor& x_b);

// Zeroes the masked entries, reconstructs, and composites
// mask * x' + (1 - mask) * x. The mask must be 0/1 and shaped like x.
Tensor inpaint(const NetworkParams& params, const Tensor& x, const Tensor& mask);

// ---------------------------------------------------------------------------
// Reports

struct MetricRow {
  std::string metric;
  std::string subset;  // "all" or a class index
  double value;
};

std::string metrics_csv(std::span<const MetricRow> rows);

// Scatter plot colored by class; unlabeled points are grey.
std::string scatter_svg(const Dataset& points, const std::string& title);

}  // namespace disvae
