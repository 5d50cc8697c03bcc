#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "disvae/data.hpp"
#include "test_support.hpp"

using namespace disvae;
namespace fs = std::filesystem;

namespace {

std::string file(const disvae::testing::TempDir& d, const std::string& name, const std::string& body) {
  const auto p = (d.path / name).string();
  std::ofstream(p) << body;
  return p;
}

double class_x_mean(const Dataset& ds, int c) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] == c) {
      s += ds.x.at(i, 0);
      ++n;
    }
  }
  return s / static_cast<double>(n);
}

}  // namespace

TEST_CASE("noiseless class-0 points lie on the unit circle") {
  for (auto geom : {ToyGeometry::kRightArcs, ToyGeometry::kAlternatingMoons}) {
    ToyOptions o;
    o.noise_std = 0.0;
    o.n_per_class = 500;
    o.geometry = geom;
    const Dataset ds = generate_toy_dataset(o, 3);
    CHECK(ds.size() == 1500);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] != 0) continue;
      const double r = std::hypot(ds.x.at(i, 0), ds.x.at(i, 1));
      CHECK(std::abs(r - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("noise residual standard deviation") {
  ToyOptions noisy;
  noisy.n_per_class = 100000 / 3 + 1;
  ToyOptions clean = noisy;
  clean.noise_std = 0.0;
  const Dataset a = generate_toy_dataset(noisy, 9), b = generate_toy_dataset(clean, 9);
  double s = 0.0, ss = 0.0;
  const std::size_t n = a.x.numel();
  for (std::size_t k = 0; k < n; ++k) {
    const double r = a.x[k] - b.x[k];
    s += r;
    ss += r * r;
  }
  const double mean = s / static_cast<double>(n);
  const double sd = std::sqrt(ss / static_cast<double>(n) - mean * mean);
  CHECK(sd >= 0.148);
  CHECK(sd <= 0.152);
}

TEST_CASE("class x-means are ordered and 2.2 apart") {
  for (auto geom : {ToyGeometry::kRightArcs, ToyGeometry::kAlternatingMoons}) {
    ToyOptions o;
    o.n_per_class = 100000 / 3 + 1;
    o.geometry = geom;
    const Dataset ds = generate_toy_dataset(o, 10);
    const double m0 = class_x_mean(ds, 0), m1 = class_x_mean(ds, 1), m2 = class_x_mean(ds, 2);
    CHECK(m1 - m0 == doctest::Approx(2.2).epsilon(0.05 / 2.2));
    CHECK(m2 - m1 == doctest::Approx(2.2).epsilon(0.05 / 2.2));
  }
}

TEST_CASE("toy generation is deterministic and the angle range narrows arcs") {
  const Dataset a = generate_toy_dataset(50, 4), b = generate_toy_dataset(50, 4);
  CHECK(a.x == b.x);
  CHECK(a.labels == b.labels);
  ToyOptions o;
  o.noise_std = 0.0;
  o.angle_lo = 0.0;
  o.angle_hi = 1.0;
  const Dataset ds = generate_toy_dataset(o, 5);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(ds.x.at(i, 1) <= -std::cos(1.0) + 1e-12);
  CHECK(parse_toy_geometry(to_string(ToyGeometry::kAlternatingMoons)) == ToyGeometry::kAlternatingMoons);
  CHECK_THROWS_AS(parse_toy_geometry("spiral"), std::invalid_argument);
}

TEST_CASE("CSV round trip is exact") {
  disvae::testing::TempDir dir;
  Rng rng(6);
  Dataset ds{disvae::testing::random_tensor(rng, 100, 2, 3.0), std::vector<int>(100), 3};
  for (std::size_t i = 0; i < 100; ++i) ds.labels[i] = static_cast<int>(i % 4) - 1;
  const auto path = (dir.path / "ds.csv").string();
  save_dataset(ds, path);
  const Dataset back = load_dataset(path, 3);
  CHECK(back.x == ds.x);
  CHECK(back.labels == ds.labels);
  CHECK(back.num_classes == 3);
  CHECK(std::count(back.labels.begin(), back.labels.end(), kUnlabeled) == 25);
  CHECK(load_dataset(path).num_classes == 3);
}

TEST_CASE("malformed rows are rejected with their line number") {
  disvae::testing::TempDir dir;
  const auto bad_label = file(dir, "a.csv", "x0,x1,label\n0.5,0.5,1\n0.1,0.2,7\n");
  try {
    load_dataset(bad_label, 3);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  CHECK_THROWS(load_dataset(file(dir, "b.csv", "1,2,0\n1,0\n"), 3));
  CHECK_THROWS(load_dataset(file(dir, "c.csv", "1,abc,0\n"), 3));
  CHECK_THROWS(load_dataset(file(dir, "d.csv", "1,2,0.5\n"), 3));
  CHECK_THROWS(load_dataset(file(dir, "e.csv", "x0,x1,label\n"), 3));
  CHECK_THROWS(load_dataset((dir.path / "missing.csv").string()));
}

TEST_CASE("batch_iter partitions each epoch") {
  const auto batches = batch_iter(10, 4, 1, 0);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 4);
  CHECK(batches[1].size() == 4);
  CHECK(batches[2].size() == 2);
  std::vector<std::size_t> all;
  for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(all[i] == i);

  CHECK(batch_iter(10, 4, 1, 0) == batches);
  CHECK_FALSE(batch_iter(100, 100, 1, 0) == batch_iter(100, 100, 1, 1));
  CHECK_THROWS_AS(batch_iter(10, 0, 1, 0), std::invalid_argument);
}

TEST_CASE("dataset helpers") {
  const Dataset ds = generate_toy_dataset(5, 7);
  const Dataset one = ds.only_class(1);
  CHECK(one.size() == 5);
  for (int y : one.labels) CHECK(y == 1);
  const std::vector<std::size_t> rows{0, 14};
  const Dataset sub = ds.subset(rows);
  CHECK(sub.labels == std::vector<int>{0, 2});
  CHECK(sub.x.row_copy(1) == ds.x.row_copy(14));
  Dataset bad = ds;
  bad.labels[0] = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("atomic writes leave no temporary files") {
  disvae::testing::TempDir dir;
  const auto path = (dir.path / "sub" / "out.txt").string();
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  std::ifstream in(path);
  std::string s;
  in >> s;
  CHECK(s == "second");
  CHECK(std::distance(fs::directory_iterator(dir.path / "sub"), fs::directory_iterator{}) == 1);
}
