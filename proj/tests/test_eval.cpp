#include <doctest.h>

#include <cmath>
#include <vector>

#include "disvae/eval.hpp"
#include "test_support.hpp"

using namespace disvae;
using disvae::testing::random_tensor;

namespace {

NetworkParams untrained(std::uint64_t seed) {
  Rng rng(seed);
  return build_networks(TrainConfig{}, rng);
}

// One full-size toy model shared by the post-training checks.
const TrainResult& trained_model() {
  static const TrainResult result = [] {
    TrainConfig c;
    c.rng_seed = 0;
    return train(c, generate_toy_dataset(1000, 100));
  }();
  return result;
}

const OracleClassifier& toy_oracle() {
  static const OracleClassifier oracle = OracleClassifier::train(generate_toy_dataset(1000, 200));
  return oracle;
}

Tensor rows_of(std::vector<std::vector<double>> rows) {
  Tensor t({rows.size(), rows.front().size()});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.at(i, j) = rows[i][j];
  return t;
}

}  // namespace

TEST_CASE("classifier score extremes") {
  Tensor same({10, 3}, 0.0);
  for (std::size_t i = 0; i < 10; ++i) same.at(i, 1) = 1.0;
  CHECK(classifier_score_from_probabilities(same) == doctest::Approx(1.0).epsilon(1e-12));

  Tensor split({9, 3}, 0.0);
  for (std::size_t i = 0; i < 9; ++i) split.at(i, i % 3) = 1.0;
  CHECK(classifier_score_from_probabilities(split) == doctest::Approx(3.0).epsilon(1e-12));

  CHECK_THROWS_AS(classifier_score_from_probabilities(Tensor({0, 3})), std::invalid_argument);
}

TEST_CASE("classifier score stays within [1, C]") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor p = random_tensor(rng, 20, 4, 3.0);
    for (std::size_t i = 0; i < 20; ++i) {
      double z = 0.0;
      for (std::size_t k = 0; k < 4; ++k) z += (p.at(i, k) = std::exp(p.at(i, k)));
      for (std::size_t k = 0; k < 4; ++k) p.at(i, k) /= z;
    }
    const double s = classifier_score_from_probabilities(p);
    CHECK(s >= 1.0);
    CHECK(s <= 4.0);
  }
}

TEST_CASE("oracle reaches the accuracy threshold on toy data and scores real data near C") {
  const OracleClassifier& oracle = toy_oracle();
  CHECK(oracle.heldout_accuracy() >= 0.98);
  CHECK(oracle.meets_threshold());
  CHECK(oracle.num_classes() == 3);
  const Dataset fresh = generate_toy_dataset(300, 201);
  CHECK(oracle.accuracy(fresh) >= 0.98);
  CHECK(classifier_score(fresh.x, oracle) > 2.8);
  const Tensor p = oracle.probabilities(fresh.x);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) s += p.at(i, k);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(classifier_score(Tensor({0, 2}), oracle), std::invalid_argument);
}

TEST_CASE("a weak oracle refuses to score") {
  Rng rng(2);
  Mlp net = make_mlp({2, {4}, 3, Activation::kRelu, OutputHead::kLinear}, rng);
  const OracleClassifier weak(net, 0.5, 0.98);
  CHECK_FALSE(weak.meets_threshold());
  CHECK_THROWS_AS(classifier_score(random_tensor(rng, 5, 2), weak), std::runtime_error);
}

TEST_CASE("diversity closed forms") {
  const Kernel k = rbf_kernel(1.0);
  CHECK(intra_class_diversity(Tensor({5, 2}, 0.7), k) == 0.0);
  CHECK(intra_class_diversity(rows_of({{0, 0}, {1000, 0}}), k) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(intra_class_diversity(Tensor({1, 2}), k), std::invalid_argument);
  CHECK_THROWS_AS(rbf_kernel(0.0), std::invalid_argument);
}

TEST_CASE("diversity matches a brute-force double loop") {
  Rng rng(3);
  const Tensor x = random_tensor(rng, 40, 2);
  const double h = 0.8;
  double sum = 0.0;
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = 0; j < 40; ++j) {
      const double dx = x.at(i, 0) - x.at(j, 0), dy = x.at(i, 1) - x.at(j, 1);
      sum += std::exp(-(dx * dx + dy * dy) / (2 * h * h));
    }
  }
  const double d = intra_class_diversity(x, rbf_kernel(h));
  CHECK(d == doctest::Approx(1.0 - sum / 1600.0).epsilon(1e-12));
  CHECK(d >= 0.0);
  CHECK(d < 1.0);
}

TEST_CASE("median pairwise distance") {
  // Pairwise distances 1, 2, 3.
  CHECK(median_pairwise_distance(rows_of({{0, 0}, {1, 0}, {3, 0}})) == doctest::Approx(2.0));
  CHECK_THROWS(median_pairwise_distance(rows_of({{0, 0}})));
}

TEST_CASE("nearest-neighbor report") {
  const Dataset real = generate_toy_dataset(50, 4);
  const NearestNeighborReport self = nearest_neighbor_report(real, real);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(self.generated_to_real[c] == 0.0);
    CHECK(self.real_internal[c] > 0.0);
    CHECK(self.ratio[c] == 0.0);
  }

  const Dataset cls = real.only_class(1);
  double oracle = 0.0;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    double best = INFINITY;
    for (std::size_t j = 0; j < cls.size(); ++j) {
      if (i != j) best = std::min(best, std::hypot(cls.x.at(i, 0) - cls.x.at(j, 0), cls.x.at(i, 1) - cls.x.at(j, 1)));
    }
    oracle += best;
  }
  CHECK(self.real_internal[1] == doctest::Approx(oracle / static_cast<double>(cls.size())).epsilon(1e-12));

  Dataset shifted = real;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted.x.at(i, 1) += 10.0;
  const NearestNeighborReport far = nearest_neighbor_report(shifted, real);
  for (double r : far.ratio) CHECK(r > 3.0);
}

TEST_CASE("generation covers every class deterministically") {
  const NetworkParams p = untrained(5);
  Rng a(6), b(6);
  const Dataset g = generate(p, 7, a);
  CHECK(g.size() == 21);
  CHECK(std::count(g.labels.begin(), g.labels.end(), 2) == 7);
  CHECK(g.x == generate(p, 7, b).x);
}

TEST_CASE("traversal endpoints, midpoint and grid size") {
  const NetworkParams p = untrained(7);
  Rng rng(8);
  const std::vector<double> grid{0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0};
  const TraversalCodes codes = draw_traversal_codes(p, 1, TraversalMode::kVaryZs, rng);
  const Traversal t = latent_traversal(p, 1, grid, TraversalMode::kVaryZs, codes);
  CHECK(t.x.shape() == Shape{9, 2});

  const auto& comp = p.mixture.components[1];
  const Tensor code1 = reparameterize(comp, codes.z1), code2 = reparameterize(comp, codes.z2);
  CHECK(t.z_s.row_copy(8) == code1);
  CHECK(t.z_s.row_copy(0) == code2);
  CHECK(t.x.row_copy(8) == decoder_forward(p, code1, codes.fixed));
  CHECK(t.x.row_copy(0) == decoder_forward(p, code2, codes.fixed));
  Tensor mid({1, 2});
  for (std::size_t j = 0; j < 2; ++j) mid[j] = 0.5 * codes.z1[j] + 0.5 * codes.z2[j];
  const Tensor mid_code = reparameterize(comp, mid);
  for (std::size_t j = 0; j < 2; ++j) CHECK(t.z_s.at(4, j) == doctest::Approx(mid_code[j]).epsilon(1e-15));

  Rng again(8);
  CHECK(latent_traversal(p, 1, grid, TraversalMode::kVaryZs, again).x == t.x);
  CHECK_THROWS_AS(latent_traversal(p, 3, grid, TraversalMode::kVaryZs, rng), std::out_of_range);
}

TEST_CASE("traversal with equal endpoints is constant") {
  const NetworkParams p = untrained(9);
  Rng rng(10);
  const std::vector<double> grid{0.0, 0.3, 0.6, 1.0};
  for (auto mode : {TraversalMode::kVaryZs, TraversalMode::kVaryZu}) {
    TraversalCodes codes = draw_traversal_codes(p, 0, mode, rng);
    codes.z2 = codes.z1;
    const Traversal t = latent_traversal(p, 0, grid, mode, codes);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(t.x.row_copy(i) == t.x.row_copy(0));
  }
}

TEST_CASE("single z_u dimension sweep") {
  const NetworkParams p = untrained(11);
  Rng rng(12);
  const std::vector<double> grid{-3.0, 0.0, 3.0};
  const TraversalCodes codes = draw_traversal_codes(p, 2, TraversalMode::kVaryZuDim, rng);
  const Traversal t = latent_traversal(p, 2, grid, TraversalMode::kVaryZuDim, codes, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(t.z_u.at(i, 1) == grid[i]);
    CHECK(t.z_u.at(i, 0) == codes.z1[0]);
    CHECK(t.z_s.row_copy(i) == codes.fixed);
  }
  CHECK_THROWS_AS(latent_traversal(p, 2, grid, TraversalMode::kVaryZuDim, codes, 2), std::out_of_range);
  CHECK(parse_traversal_mode(to_string(TraversalMode::kVaryZuDim)) == TraversalMode::kVaryZuDim);
}

TEST_CASE("swap synthesis") {
  const NetworkParams p = untrained(13);
  Rng rng(14);
  const Tensor a = random_tensor(rng, 5, 2), b = random_tensor(rng, 5, 2, 2.0);
  CHECK(synthesize_swap(p, a, a) == reconstruct(p, a));
  CHECK_FALSE(synthesize_swap(p, a, b) == synthesize_swap(p, b, a));
  CHECK_THROWS_AS(synthesize_swap(p, a, random_tensor(rng, 4, 2)), std::invalid_argument);
}

TEST_CASE("inpainting composites exactly") {
  const NetworkParams p = untrained(15);
  Rng rng(16);
  const Tensor x = random_tensor(rng, 6, 2);
  CHECK(inpaint(p, x, Tensor({6, 2}, 0.0)) == x);
  CHECK(inpaint(p, x, Tensor({6, 2}, 1.0)) == reconstruct(p, Tensor({6, 2}, 0.0)));

  Tensor mask({6, 2}, 0.0);
  for (std::size_t i = 0; i < 6; ++i) mask.at(i, i % 2) = 1.0;
  const Tensor out = inpaint(p, x, mask);
  Tensor zeroed = x;
  for (std::size_t k = 0; k < x.numel(); ++k) {
    if (mask[k] == 1.0) zeroed[k] = 0.0;
  }
  const Tensor filled = reconstruct(p, zeroed);
  for (std::size_t k = 0; k < x.numel(); ++k) CHECK(out[k] == (mask[k] == 1.0 ? filled[k] : x[k]));

  Tensor bad = mask;
  bad[0] = 0.5;
  CHECK_THROWS_AS(inpaint(p, x, bad), std::invalid_argument);
  CHECK_THROWS_AS(inpaint(p, x, Tensor({6, 3})), std::invalid_argument);
}

TEST_CASE("reports") {
  const std::vector<MetricRow> rows{{"classifier_score", "all", 2.5}, {"diversity", "0", 0.25}};
  CHECK(metrics_csv(rows) == "metric,subset,value\nclassifier_score,all,2.5\ndiversity,0,0.25\n");
  const std::string svg = scatter_svg(generate_toy_dataset(10, 1), "toy");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("toy") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("trained model: identity follows z_s and swaps change the output") {
  const NetworkParams& p = trained_model().params;
  const OracleClassifier& oracle = toy_oracle();
  const Dataset real = generate_toy_dataset(200, 300);
  std::vector<std::size_t> a_rows, b_rows;
  for (std::size_t i = 0; i < real.size(); ++i) {
    a_rows.push_back(i);
    b_rows.push_back((i + 200) % real.size());  // always a different class
  }
  const Dataset a = real.subset(a_rows), b = real.subset(b_rows);
  const auto predicted = oracle.predict(synthesize_swap(p, a.x, b.x));
  std::size_t follows = 0;
  for (std::size_t i = 0; i < a.size(); ++i) follows += predicted[i] == a.labels[i];
  CHECK(static_cast<double>(follows) / static_cast<double>(a.size()) >= 0.9);

  // Exchanging z_s between two samples with z_u fixed changes the decoder output.
  const Tensor zs = encoder_s_forward(p, a.x);
  const Tensor zu = encoder_u_forward(p, a.x).mu;
  const Tensor zs_b = encoder_s_forward(p, b.x);
  CHECK_FALSE(decoder_forward(p, zs, zu) == decoder_forward(p, zs_b, zu));

  Rng rng(17);
  const double score = classifier_score(generate(p, 1000, rng).x, oracle);
  CHECK(score >= 2.5);
  CHECK(score <= 3.0);
}
