#include "disvae/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace disvae {

namespace {

void matmul_into(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  auto o = out.data();
  std::fill(o.begin(), o.end(), 0.0);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = o.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      const double* brow = bd.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

// a^T (k x n)^T * g (k x m) -> (n x m)
Tensor matmul_tn(const Tensor& a, const Tensor& g) {
  const std::size_t k = a.rows(), n = a.cols(), m = g.cols();
  Tensor out({n, m});
  auto o = out.data();
  auto ad = a.data();
  auto gd = g.data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* grow = gd.data() + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = ad[p * n + i];
      if (av == 0.0) continue;
      double* orow = o.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * grow[j];
    }
  }
  return out;
}

// g (n x m) * b^T (k x m)^T -> (n x k)
Tensor matmul_nt(const Tensor& g, const Tensor& b) {
  const std::size_t n = g.rows(), m = g.cols(), k = b.rows();
  Tensor out({n, k});
  auto o = out.data();
  auto gd = g.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* grow = gd.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = bd.data() + p * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
      o[i * k + p] = acc;
    }
  }
  return out;
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  auto xd = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < xd.size(); ++i) o[i] = f(xd[i]);
  return out;
}

void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kNeg: return "neg";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSquare: return "square";
    case OpKind::kClamp: return "clamp";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSumCols: return "sum_cols";
    case OpKind::kLogSumExpRows: return "logsumexp_rows";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
  }
  return "?";
}

NodeId Graph::push(Node node) {
  for (NodeId in : node.inputs) check(in);
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Graph::check(NodeId id) const {
  if (id.index >= nodes_.size()) throw std::out_of_range("graph node " + std::to_string(id.index) + " does not exist");
}

std::string Graph::describe(NodeId id) const {
  const Node& n = node(id);
  std::ostringstream os;
  os << "node " << id.index << " (" << op_name(n.kind);
  if (!n.name.empty()) os << " '" << n.name << "'";
  os << ")";
  return os.str();
}

NodeId Graph::input(std::string name) { return push({OpKind::kInput, {}, std::move(name), {}}); }

NodeId Graph::parameter(std::string name, Tensor value) {
  NodeId id = push({OpKind::kParameter, {}, std::move(name), std::move(value)});
  parameters_.push_back(id);
  return id;
}

NodeId Graph::constant(Tensor value, std::string name) {
  return push({OpKind::kConstant, {}, std::move(name), std::move(value)});
}

NodeId Graph::matmul(NodeId a, NodeId b) { return push({OpKind::kMatMul, {a, b}}); }
NodeId Graph::add(NodeId a, NodeId b) { return push({OpKind::kAdd, {a, b}}); }
NodeId Graph::add_bias(NodeId x, NodeId bias) { return push({OpKind::kAddBias, {x, bias}}); }
NodeId Graph::mul(NodeId a, NodeId b) { return push({OpKind::kMul, {a, b}}); }
NodeId Graph::neg(NodeId x) { return push({OpKind::kNeg, {x}}); }
NodeId Graph::relu(NodeId x) { return push({OpKind::kRelu, {x}}); }
NodeId Graph::tanh(NodeId x) { return push({OpKind::kTanh, {x}}); }
NodeId Graph::sigmoid(NodeId x) { return push({OpKind::kSigmoid, {x}}); }
NodeId Graph::exp(NodeId x) { return push({OpKind::kExp, {x}}); }
NodeId Graph::log(NodeId x) { return push({OpKind::kLog, {x}}); }
NodeId Graph::square(NodeId x) { return push({OpKind::kSquare, {x}}); }
NodeId Graph::sum(NodeId x) { return push({OpKind::kSum, {x}}); }
NodeId Graph::mean(NodeId x) { return push({OpKind::kMean, {x}}); }
NodeId Graph::sum_cols(NodeId x) { return push({OpKind::kSumCols, {x}}); }
NodeId Graph::logsumexp_rows(NodeId x) { return push({OpKind::kLogSumExpRows, {x}}); }
NodeId Graph::concat(NodeId a, NodeId b) { return push({OpKind::kConcat, {a, b}}); }

NodeId Graph::scale(NodeId x, double k) {
  Node n{OpKind::kScale, {x}};
  n.a = k;
  return push(std::move(n));
}

NodeId Graph::clamp(NodeId x, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be below hi");
  Node n{OpKind::kClamp, {x}};
  n.a = lo;
  n.b = hi;
  return push(std::move(n));
}

NodeId Graph::slice_cols(NodeId x, std::size_t begin, std::size_t end) {
  if (begin >= end) throw std::invalid_argument("slice_cols: empty column range");
  Node n{OpKind::kSlice, {x}};
  n.begin = begin;
  n.end = end;
  return push(std::move(n));
}

NodeId Graph::broadcast_rows(NodeId x, std::size_t n) {
  return matmul(constant(Tensor::full(n, 1, 1.0), "ones"), x);
}

Evaluation evaluate(const Graph& graph, const Bindings& bindings) {
  std::vector<Tensor> v(graph.size());
  for (const auto& [id, t] : bindings) {
    if (id.index >= graph.size()) throw std::out_of_range("binding for unknown node " + std::to_string(id.index));
    auto kind = graph.node(id).kind;
    if (kind != OpKind::kInput && kind != OpKind::kParameter) {
      throw std::invalid_argument("cannot bind " + graph.describe(id));
    }
  }

  for (std::uint32_t i = 0; i < graph.size(); ++i) {
    const NodeId id{i};
    const auto& n = graph.node(id);
    auto fail = [&](const std::string& what) -> void {
      throw std::invalid_argument(graph.describe(id) + ": " + what);
    };
    auto in = [&](std::size_t k) -> const Tensor& { return v[n.inputs[k].index]; };
    auto need_matrix = [&](const Tensor& t) {
      if (t.rank() != 2) fail("expected a matrix, got " + shape_str(t.shape()));
    };
    auto same_shape = [&](const Tensor& a, const Tensor& b) {
      if (a.shape() != b.shape()) fail("shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    };

    Tensor out;
    switch (n.kind) {
      case OpKind::kInput: {
        auto it = bindings.find(id);
        if (it == bindings.end()) fail("input is not bound");
        out = it->second;
        break;
      }
      case OpKind::kParameter: {
        auto it = bindings.find(id);
        out = it == bindings.end() ? n.value : it->second;
        break;
      }
      case OpKind::kConstant: out = n.value; break;
      case OpKind::kMatMul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        need_matrix(a);
        need_matrix(b);
        if (a.cols() != b.rows()) fail("matmul of " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
        out = Tensor({a.rows(), b.cols()});
        matmul_into(a, b, out);
        break;
      }
      case OpKind::kAdd: {
        same_shape(in(0), in(1));
        out = in(0);
        accumulate(out, in(1));
        break;
      }
      case OpKind::kAddBias: {
        const Tensor& x = in(0);
        const Tensor& b = in(1);
        need_matrix(x);
        need_matrix(b);
        if (b.rows() != 1 || b.cols() != x.cols()) {
          fail("bias " + shape_str(b.shape()) + " does not fit " + shape_str(x.shape()));
        }
        out = x;
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) += b[c];
        break;
      }
      case OpKind::kMul: {
        same_shape(in(0), in(1));
        out = in(0);
        auto o = out.data();
        auto bd = in(1).data();
        for (std::size_t k = 0; k < o.size(); ++k) o[k] *= bd[k];
        break;
      }
      case OpKind::kScale: out = map(in(0), [k = n.a](double x) { return k * x; }); break;
      case OpKind::kNeg: out = map(in(0), [](double x) { return -x; }); break;
      case OpKind::kRelu: out = map(in(0), [](double x) { return x > 0.0 ? x : 0.0; }); break;
      case OpKind::kTanh: out = map(in(0), [](double x) { return std::tanh(x); }); break;
      case OpKind::kSigmoid:
        out = map(in(0), [](double x) {
          if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
          const double e = std::exp(x);
          return e / (1.0 + e);
        });
        break;
      case OpKind::kExp: out = map(in(0), [](double x) { return std::exp(x); }); break;
      case OpKind::kLog: {
        for (double x : in(0).data()) {
          if (!(x > 0.0)) fail("log of non-positive value " + std::to_string(x));
        }
        out = map(in(0), [](double x) { return std::log(x); });
        break;
      }
      case OpKind::kSquare: out = map(in(0), [](double x) { return x * x; }); break;
      case OpKind::kClamp:
        out = map(in(0), [lo = n.a, hi = n.b](double x) { return std::clamp(x, lo, hi); });
        break;
      case OpKind::kSum: {
        double s = 0.0;
        for (double x : in(0).data()) s += x;
        out = Tensor::scalar(s);
        break;
      }
      case OpKind::kMean: {
        double s = 0.0;
        for (double x : in(0).data()) s += x;
        out = Tensor::scalar(s / static_cast<double>(in(0).numel()));
        break;
      }
      case OpKind::kSumCols: {
        const Tensor& x = in(0);
        need_matrix(x);
        out = Tensor({x.rows(), 1});
        for (std::size_t r = 0; r < x.rows(); ++r) {
          double s = 0.0;
          for (double e : x.row_span(r)) s += e;
          out[r] = s;
        }
        break;
      }
      case OpKind::kLogSumExpRows: {
        const Tensor& x = in(0);
        need_matrix(x);
        out = Tensor({x.rows(), 1});
        for (std::size_t r = 0; r < x.rows(); ++r) {
          auto row = x.row_span(r);
          const double m = *std::max_element(row.begin(), row.end());
          double s = 0.0;
          for (double e : row) s += std::exp(e - m);
          out[r] = m + std::log(s);
        }
        break;
      }
      case OpKind::kConcat: {
        need_matrix(in(0));
        need_matrix(in(1));
        if (in(0).rows() != in(1).rows()) {
          fail("concat row mismatch " + shape_str(in(0).shape()) + " vs " + shape_str(in(1).shape()));
        }
        out = hconcat(in(0), in(1));
        break;
      }
      case OpKind::kSlice: {
        const Tensor& x = in(0);
        need_matrix(x);
        if (n.end > x.cols()) fail("slice [" + std::to_string(n.begin) + "," + std::to_string(n.end) + ") of " +
                                   shape_str(x.shape()));
        const std::size_t w = n.end - n.begin;
        out = Tensor({x.rows(), w});
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t c = 0; c < w; ++c) out.at(r, c) = x.at(r, n.begin + c);
        break;
      }
    }
    if (!out.all_finite()) fail("non-finite output");
    v[i] = std::move(out);
  }
  return Evaluation(std::move(v));
}

Gradients backward(const Graph& graph, const Evaluation& values, NodeId loss) {
  if (values.size() != graph.size()) throw std::invalid_argument("evaluation does not belong to this graph");
  if (values[loss].numel() != 1) {
    throw std::invalid_argument("backward: loss " + graph.describe(loss) + " is not scalar, shape " +
                                shape_str(values[loss].shape()));
  }

  const std::size_t count = loss.index + 1;
  std::vector<bool> needs(count, false);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto& n = graph.node(NodeId{i});
    if (n.kind == OpKind::kParameter) {
      needs[i] = true;
      continue;
    }
    for (NodeId in : n.inputs) needs[i] = needs[i] || needs[in.index];
  }

  std::vector<Tensor> grad(count);
  std::vector<bool> has(count, false);
  auto push_grad = [&](NodeId target, Tensor g) {
    if (!needs[target.index]) return;
    if (has[target.index]) {
      accumulate(grad[target.index], g);
    } else {
      grad[target.index] = std::move(g);
      has[target.index] = true;
    }
  };
  grad[loss.index] = Tensor(values[loss].shape(), 1.0);
  has[loss.index] = true;

  for (std::uint32_t idx = count; idx-- > 0;) {
    if (!has[idx] || !needs[idx]) continue;
    const NodeId id{idx};
    const auto& n = graph.node(id);
    const Tensor& g = grad[idx];
    const Tensor& y = values[id];
    auto x = [&](std::size_t k) -> const Tensor& { return values[n.inputs[k]]; };
    auto elementwise = [&](auto dfn) {
      Tensor d(g.shape());
      auto dd = d.data();
      auto gd = g.data();
      auto xd = x(0).data();
      auto yd = y.data();
      for (std::size_t k = 0; k < dd.size(); ++k) dd[k] = gd[k] * dfn(xd[k], yd[k]);
      push_grad(n.inputs[0], std::move(d));
    };

    switch (n.kind) {
      case OpKind::kInput:
      case OpKind::kParameter:
      case OpKind::kConstant: break;
      case OpKind::kMatMul:
        if (needs[n.inputs[0].index]) push_grad(n.inputs[0], matmul_nt(g, x(1)));
        if (needs[n.inputs[1].index]) push_grad(n.inputs[1], matmul_tn(x(0), g));
        break;
      case OpKind::kAdd:
        push_grad(n.inputs[0], g);
        push_grad(n.inputs[1], g);
        break;
      case OpKind::kAddBias: {
        push_grad(n.inputs[0], g);
        Tensor db({1, g.cols()});
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) db[c] += g.at(r, c);
        push_grad(n.inputs[1], std::move(db));
        break;
      }
      case OpKind::kMul: {
        Tensor da = g, dbt = g;
        auto a = x(0).data();
        auto b = x(1).data();
        auto dad = da.data();
        auto dbd = dbt.data();
        for (std::size_t k = 0; k < dad.size(); ++k) {
          dad[k] *= b[k];
          dbd[k] *= a[k];
        }
        push_grad(n.inputs[0], std::move(da));
        push_grad(n.inputs[1], std::move(dbt));
        break;
      }
      case OpKind::kScale: elementwise([k = n.a](double, double) { return k; }); break;
      case OpKind::kNeg: elementwise([](double, double) { return -1.0; }); break;
      case OpKind::kRelu: elementwise([](double in, double) { return in > 0.0 ? 1.0 : 0.0; }); break;
      case OpKind::kTanh: elementwise([](double, double out) { return 1.0 - out * out; }); break;
      case OpKind::kSigmoid: elementwise([](double, double out) { return out * (1.0 - out); }); break;
      case OpKind::kExp: elementwise([](double, double out) { return out; }); break;
      case OpKind::kLog: elementwise([](double in, double) { return 1.0 / in; }); break;
      case OpKind::kSquare: elementwise([](double in, double) { return 2.0 * in; }); break;
      case OpKind::kClamp:
        elementwise([lo = n.a, hi = n.b](double in, double) { return (in >= lo && in <= hi) ? 1.0 : 0.0; });
        break;
      case OpKind::kSum: push_grad(n.inputs[0], Tensor(x(0).shape(), g.item())); break;
      case OpKind::kMean:
        push_grad(n.inputs[0], Tensor(x(0).shape(), g.item() / static_cast<double>(x(0).numel())));
        break;
      case OpKind::kSumCols: {
        Tensor d(x(0).shape());
        for (std::size_t r = 0; r < d.rows(); ++r)
          for (std::size_t c = 0; c < d.cols(); ++c) d.at(r, c) = g[r];
        push_grad(n.inputs[0], std::move(d));
        break;
      }
      case OpKind::kLogSumExpRows: {
        const Tensor& in = x(0);
        Tensor d(in.shape());
        for (std::size_t r = 0; r < in.rows(); ++r)
          for (std::size_t c = 0; c < in.cols(); ++c) d.at(r, c) = g[r] * std::exp(in.at(r, c) - y[r]);
        push_grad(n.inputs[0], std::move(d));
        break;
      }
      case OpKind::kConcat: {
        const std::size_t ca = x(0).cols(), cb = x(1).cols();
        Tensor da(x(0).shape()), dbt(x(1).shape());
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < ca; ++c) da.at(r, c) = g.at(r, c);
          for (std::size_t c = 0; c < cb; ++c) dbt.at(r, c) = g.at(r, ca + c);
        }
        push_grad(n.inputs[0], std::move(da));
        push_grad(n.inputs[1], std::move(dbt));
        break;
      }
      case OpKind::kSlice: {
        Tensor d(x(0).shape());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) d.at(r, n.begin + c) = g.at(r, c);
        push_grad(n.inputs[0], std::move(d));
        break;
      }
    }
  }

  Gradients out;
  for (NodeId p : graph.parameters()) {
    if (p.index < count && has[p.index]) {
      out.emplace(p, std::move(grad[p.index]));
    } else {
      out.emplace(p, Tensor(values[p].shape(), 0.0));
    }
  }
  return out;
}

double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& x, const Tensor& analytic,
                         double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  if (analytic.shape() != x.shape()) {
    throw std::invalid_argument("finite_diff_check: gradient shape " + shape_str(analytic.shape()) +
                                " does not match point " + shape_str(x.shape()));
  }
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("finite_diff_check: non-finite value near coordinate " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace disvae
