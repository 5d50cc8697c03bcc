#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "disvae/tensor.hpp"

namespace disvae {

struct NodeId {
  std::uint32_t index = 0;
  auto operator<=>(const NodeId&) const = default;
};

enum class OpKind {
  kInput,
  kParameter,
  kConstant,
  kMatMul,
  kAdd,
  kAddBias,  // (n x m) + (1 x m), the only implicit broadcast
  kMul,
  kScale,
  kNeg,
  kRelu,
  kTanh,
  kSigmoid,
  kExp,
  kLog,
  kSquare,
  kClamp,
  kSum,
  kMean,
  kSumCols,        // (n x m) -> (n x 1)
  kLogSumExpRows,  // (n x m) -> (n x 1)
  kConcat,         // column-wise
  kSlice,          // columns [begin, end)
};

const char* op_name(OpKind kind);

// Append-only record of a computation. Inputs always precede the nodes that
// consume them, so node order is a valid topological order. Shapes are only
// checked when the graph is evaluated.
class Graph {
 public:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    std::string name;
    Tensor value;  // default value for parameters, fixed value for constants
    double a = 0.0;
    double b = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  NodeId input(std::string name);
  NodeId parameter(std::string name, Tensor value);
  NodeId constant(Tensor value, std::string name = {});

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b) { return add(a, neg(b)); }
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, double k);
  NodeId neg(NodeId x);
  NodeId relu(NodeId x);
  NodeId tanh(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId exp(NodeId x);
  NodeId log(NodeId x);
  NodeId square(NodeId x);
  NodeId clamp(NodeId x, double lo, double hi);
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  NodeId sum_cols(NodeId x);
  NodeId logsumexp_rows(NodeId x);
  NodeId concat(NodeId a, NodeId b);
  NodeId slice_cols(NodeId x, std::size_t begin, std::size_t end);

  // x (1 x m) repeated over n rows, expressed as ones(n x 1) * x.
  NodeId broadcast_rows(NodeId x, std::size_t n);

  const Node& node(NodeId id) const { return nodes_.at(id.index); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodeId>& parameters() const { return parameters_; }
  std::string describe(NodeId id) const;

 private:
  NodeId push(Node node);
  void check(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> parameters_;
};

using Bindings = std::map<NodeId, Tensor>;
using Gradients = std::map<NodeId, Tensor>;

// Forward values of every node of a graph.
class Evaluation {
 public:
  explicit Evaluation(std::vector<Tensor> values) : values_(std::move(values)) {}
  const Tensor& operator[](NodeId id) const { return values_.at(id.index); }
  double scalar(NodeId id) const { return values_.at(id.index).item(); }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<Tensor> values_;
};

// Every input node must be bound; parameter nodes use their stored value
// unless a binding overrides it. Throws on shape mismatch or a non-finite
// result, naming the offending node.
Evaluation evaluate(const Graph& graph, const Bindings& bindings = {});

// Reverse-mode gradients of a scalar node with respect to every parameter
// node. Parameters without a path to the loss get zero gradients.
Gradients backward(const Graph& graph, const Evaluation& values, NodeId loss);

// max_i |analytic_i - central_difference_i| / max(1, |analytic_i|)
double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                         const Tensor& analytic, double h = 1e-5);

}  // namespace disvae
