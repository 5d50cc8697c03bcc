#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "disvae/autodiff.hpp"
#include "disvae/rng.hpp"
#include "disvae/tensor.hpp"
#include "disvae/training.hpp"

namespace disvae::testing {

inline Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor t = rng.normal_tensor(rows, cols);
  for (double& v : t.data()) v *= scale;
  return t;
}

// Worst finite-difference disagreement over every parameter node of `g`.
inline double graph_gradient_error(const Graph& g, NodeId loss, const Bindings& inputs = {}) {
  const Evaluation ev = evaluate(g, inputs);
  const Gradients grads = backward(g, ev, loss);
  double worst = 0.0;
  for (NodeId p : g.parameters()) {
    auto f = [&](const Tensor& v) {
      Bindings b = inputs;
      b[p] = v;
      return evaluate(g, b).scalar(loss);
    };
    worst = std::max(worst, finite_diff_check(f, g.node(p).value, grads.at(p)));
  }
  return worst;
}

// Fresh directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("disvae_test_" + std::to_string(::getpid()) + "_" + std::to_string(++counter));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path / name).string(); }
};

// FNV-1a over the raw bytes of a group's tensors.
inline std::uint64_t group_hash(const NetworkParams& p, ParamGroup g) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Tensor* t : group_tensors(p, g)) {
    for (double v : t->data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) h = (h ^ b) * 1099511628211ULL;
    }
  }
  return h;
}

inline std::map<ParamGroup, std::uint64_t> all_group_hashes(const NetworkParams& p) {
  std::map<ParamGroup, std::uint64_t> out;
  for (ParamGroup g : kAllGroups) out[g] = group_hash(p, g);
  return out;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) { return a == b; }

}  // namespace disvae::testing
