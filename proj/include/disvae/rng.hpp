#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "disvae/tensor.hpp"

namespace disvae {

// Seeded random source passed explicitly to everything that samples. The
// full state (engine plus the normal distribution's cached draw) can be
// saved and restored, so a resumed run continues the same stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  Tensor normal_tensor(std::size_t rows, std::size_t cols);

  std::mt19937_64& engine() { return engine_; }

  std::string state() const;
  void restore(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.state() == b.state(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// Derives an independent seed for a named sub-stream, e.g. the batch order of
// one epoch.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace disvae
