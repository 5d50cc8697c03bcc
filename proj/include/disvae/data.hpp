#pragma once

#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "disvae/tensor.hpp"

namespace disvae {

inline constexpr int kUnlabeled = -1;

struct Dataset {
  Tensor x;                 // n x d
  std::vector<int> labels;  // kUnlabeled or [0, num_classes)
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return x.cols(); }
  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
  Dataset only_class(int c) const;
};

enum class ToyGeometry {
  // Right halves of unit circles: (sin t + spacing * c, -cos t). Classes
  // differ along x only; y carries the within-class variation.
  kRightArcs,
  // Two-moons pattern: even classes are upper arcs (cos t + spacing * c,
  // sin t), odd classes lower arcs (cos t + spacing * c, 0.5 - sin t). Arc
  // ends of neighbouring classes overlap under the default noise.
  kAlternatingMoons,
};

std::string to_string(ToyGeometry g);
ToyGeometry parse_toy_geometry(const std::string& s);

struct ToyOptions {
  std::size_t n_per_class = 1000;
  std::size_t num_classes = 3;
  double noise_std = 0.15;
  double spacing = 2.2;
  // Angle range on each half circle; narrowing it holds out arc regions.
  double angle_lo = 0.0;
  double angle_hi = std::numbers::pi;
  ToyGeometry geometry = ToyGeometry::kRightArcs;
};

// Three (by default) unit half circles spaced `spacing` apart along x, t
// uniform in the angle range, isotropic Gaussian noise on both coordinates.
Dataset generate_toy_dataset(const ToyOptions& options, std::uint64_t seed);
Dataset generate_toy_dataset(std::size_t n_per_class, std::uint64_t seed);

// CSV with a header row; feature columns followed by an integer label column
// (-1 for unlabeled). Values are written with 17 significant digits. With
// num_classes == 0 the class count is inferred from the largest label.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path, std::size_t num_classes = 0);

// Shuffled partition of [0, n) into batches, deterministic in (seed, epoch).
// The last batch may be short.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                 std::uint64_t epoch);

// Writes via a temporary file and rename, so readers never see partial
// contents.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace disvae
