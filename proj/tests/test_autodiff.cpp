#include <doctest.h>

#include <cmath>
#include <string>

#include "disvae/autodiff.hpp"
#include "test_support.hpp"

using namespace disvae;
using disvae::testing::graph_gradient_error;
using disvae::testing::random_tensor;

TEST_CASE("relu forward") {
  Graph g;
  NodeId x = g.input("x");
  NodeId y = g.relu(x);
  CHECK(evaluate(g, {{x, Tensor::row({-1, 0, 2})}})[y] == Tensor::row({0, 0, 2}));
}

TEST_CASE("matmul shape rule") {
  Graph g;
  NodeId a = g.input("a"), b = g.input("b");
  NodeId c = g.matmul(a, b);
  const auto ev = evaluate(g, {{a, Tensor({2, 3}, 1.0)}, {b, Tensor({3, 1}, 2.0)}});
  CHECK(ev[c].shape() == Shape{2, 1});
  CHECK(ev[c].at(1, 0) == 6.0);
}

TEST_CASE("shape mismatch names the node") {
  Graph g;
  NodeId a = g.input("a"), b = g.input("b");
  NodeId c = g.matmul(a, b);
  try {
    evaluate(g, {{a, Tensor({2, 3})}, {b, Tensor({2, 1})}});
    FAIL("expected a shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("node " + std::to_string(c.index)) != std::string::npos);
    CHECK(msg.find("matmul") != std::string::npos);
  }
}

TEST_CASE("unbound input is an error") {
  Graph g;
  NodeId x = g.input("x");
  g.relu(x);
  CHECK_THROWS(evaluate(g));
}

TEST_CASE("non-finite output is an error") {
  Graph g;
  NodeId x = g.input("x");
  g.exp(x);
  CHECK_THROWS(evaluate(g, {{x, Tensor::row({1000.0})}}));
  Graph h;
  NodeId y = h.input("y");
  h.log(y);
  CHECK_THROWS(evaluate(h, {{y, Tensor::row({0.0})}}));
}

TEST_CASE("log-sum-exp does not overflow") {
  Graph g;
  NodeId x = g.input("x");
  NodeId l = g.logsumexp_rows(x);
  const double got = evaluate(g, {{x, Tensor::row({1000, 1000})}}).scalar(l);
  // Shifted-sum oracle with an arbitrary offset.
  const double offset = 997.0;
  const double oracle = offset + std::log(std::exp(1000 - offset) + std::exp(1000 - offset));
  CHECK(got == doctest::Approx(oracle).epsilon(1e-15));
  CHECK(got == doctest::Approx(1000 + std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("gradient of sum(w * w)") {
  Graph g;
  NodeId w = g.parameter("w", Tensor::row({1, 2}));
  NodeId loss = g.sum(g.mul(w, w));
  const auto grads = backward(g, evaluate(g), loss);
  CHECK(grads.at(w) == Tensor::row({2, 4}));
}

TEST_CASE("gradient of tanh at zero") {
  Graph g;
  NodeId w = g.parameter("w", Tensor::scalar(0.0));
  NodeId loss = g.tanh(w);
  CHECK(backward(g, evaluate(g), loss).at(w).item() == 1.0);
}

TEST_CASE("fan-out accumulates") {
  Graph g;
  NodeId x = g.parameter("x", Tensor::scalar(3.0));
  NodeId y = g.add(x, x);
  CHECK(backward(g, evaluate(g), y).at(x).item() == 2.0);
}

TEST_CASE("detached parameter gets a zero gradient") {
  Graph g;
  NodeId a = g.parameter("a", Tensor::row({1, 2}));
  NodeId b = g.parameter("b", Tensor::row({5, 6}));
  NodeId loss = g.sum(a);
  const auto grads = backward(g, evaluate(g), loss);
  CHECK(grads.at(b) == Tensor({1, 2}, 0.0));
}

TEST_CASE("non-scalar loss is refused") {
  Graph g;
  NodeId a = g.parameter("a", Tensor::row({1, 2}));
  CHECK_THROWS(backward(g, evaluate(g), a));
}

TEST_CASE("evaluate is pure") {
  Rng rng(3);
  Graph g;
  NodeId x = g.input("x");
  NodeId w = g.parameter("w", random_tensor(rng, 3, 4));
  NodeId y = g.logsumexp_rows(g.tanh(g.matmul(x, w)));
  const Tensor in = random_tensor(rng, 5, 3);
  CHECK(evaluate(g, {{x, in}})[y] == evaluate(g, {{x, in}})[y]);
}

TEST_CASE("finite_diff_check on a quadratic") {
  auto f = [](const Tensor& x) { return x[0] * x[0]; };
  CHECK(finite_diff_check(f, Tensor::scalar(3.0), Tensor::scalar(6.0), 1e-5) < 1e-8);
  auto bad = [](const Tensor& x) { return std::log(x[0]); };
  CHECK_THROWS(finite_diff_check(bad, Tensor::scalar(-1.0), Tensor::scalar(0.0)));
}

TEST_CASE("every differentiable op matches central differences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    NodeId a = g.parameter("a", random_tensor(rng, 3, 4));
    NodeId b = g.parameter("b", random_tensor(rng, 4, 2));
    NodeId bias = g.parameter("bias", random_tensor(rng, 1, 2));
    NodeId pos = g.parameter("pos", Tensor({3, 2}, 0.5 + 0.1 * trial));
    NodeId h = g.add_bias(g.matmul(a, b), bias);
    NodeId t1 = g.mul(g.tanh(h), g.sigmoid(h));
    NodeId t2 = g.add(g.exp(g.scale(h, 0.3)), g.log(g.add(pos, g.square(h))));
    NodeId t3 = g.concat(g.relu(g.neg(t1)), g.slice_cols(t2, 1, 2));
    NodeId t4 = g.clamp(t2, -1.5, 1.5);
    NodeId rows = g.logsumexp_rows(t3);
    NodeId loss = g.add(g.add(g.mean(rows), g.sum(g.sum_cols(t4))), g.sum(g.broadcast_rows(bias, 3)));
    CHECK(graph_gradient_error(g, loss) < 1e-5);
  }
}

TEST_CASE("random three-layer MLP gradients") {
  Rng rng(5);
  Graph g;
  NodeId x = g.input("x");
  NodeId h = x;
  std::size_t in = 3;
  for (std::size_t out : {5u, 4u, 1u}) {
    NodeId w = g.parameter("w", random_tensor(rng, in, out, 0.7));
    NodeId b = g.parameter("b", random_tensor(rng, 1, out, 0.1));
    h = g.add_bias(g.matmul(h, w), b);
    if (out != 1) h = g.tanh(h);
    in = out;
  }
  NodeId loss = g.mean(g.square(h));
  CHECK(graph_gradient_error(g, loss, {{x, random_tensor(rng, 6, 3)}}) < 1e-5);
}

TEST_CASE("clamp passes gradient only inside the interval") {
  Graph g;
  NodeId w = g.parameter("w", Tensor::row({-2.0, 0.5, 2.0}));
  NodeId loss = g.sum(g.clamp(w, -1.0, 1.0));
  CHECK(backward(g, evaluate(g), loss).at(w) == Tensor::row({0.0, 1.0, 0.0}));
}
