#include <cmath>
#include <random>

#include "doctest.h"
#include "lctc/autodiff.hpp"
#include "lctc/errors.hpp"
#include "lctc/gradcheck.hpp"
#include "lctc/optimizer.hpp"

using namespace lctc;

namespace {

RealArray random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  RealArray a = RealArray::matrix(r, c);
  for (auto& v : a.data()) v = n(rng);
  return a;
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
  const RealArray p = softmax_rows(RealArray::row({0.0, 0.0}));
  CHECK(p(0, 0) == 0.5);
  CHECK(p(0, 1) == 0.5);
}

TEST_CASE("log_softmax agrees with log of softmax") {
  const RealArray z = RealArray::row({1.0, 2.0, 3.0});
  const RealArray p = softmax_rows(z);
  const RealArray lp = log_softmax_rows(z);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(lp(0, j) - std::log(p(0, j))) <= 1e-12);
}

TEST_CASE("matmul by identity") {
  Tape tape;
  const RealArray a = RealArray::matrix(2, 2, {1.5, -2.0, 0.25, 7.0});
  const Var y = ad::matmul(tape.constant(RealArray::matrix(2, 2, {1, 0, 0, 1})), tape.constant(a));
  CHECK(y.value() == a);
}

TEST_CASE("shape errors name the op and both shapes") {
  Tape tape;
  const Var a = tape.constant(RealArray::matrix(2, 3));
  const Var b = tape.constant(RealArray::matrix(2, 3));
  try {
    ad::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("(2, 3)") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::add(a, tape.constant(RealArray::matrix(3, 2))), ShapeError);
}

TEST_CASE("backward of simple expressions") {
  SUBCASE("x^2 at 3") {
    Tape tape;
    const Var x = tape.variable(RealArray::scalar(3.0));
    tape.backward(ad::mul(x, x));
    CHECK(tape.gradient(x).item() == 6.0);
  }
  SUBCASE("x*y at (2,5)") {
    Tape tape;
    const Var x = tape.variable(RealArray::scalar(2.0));
    const Var y = tape.variable(RealArray::scalar(5.0));
    tape.backward(ad::mul(x, y));
    CHECK(tape.gradient(x).item() == 5.0);
    CHECK(tape.gradient(y).item() == 2.0);
  }
  SUBCASE("non-scalar output is rejected") {
    Tape tape;
    const Var x = tape.variable(RealArray::matrix(1, 2));
    CHECK_THROWS_AS(tape.backward(x), ShapeError);
  }
  SUBCASE("unreached leaves get zero gradient") {
    Tape tape;
    const Var x = tape.variable(RealArray::scalar(2.0));
    const Var unused = tape.variable(RealArray::matrix(2, 2, 1.0));
    tape.backward(ad::exp(x));
    CHECK(tape.gradient(unused) == RealArray::matrix(2, 2, 0.0));
  }
}

TEST_CASE("cross-entropy through softmax gives softmax minus one-hot") {
  const RealArray z0 = RealArray::row({1.0, 0.0, -1.0});
  auto ce = [](const RealArray& z) {
    return -log_softmax_rows(z)(0, 0);
  };
  Tape tape;
  const Var z = tape.variable(z0);
  const Var lp = ad::log_softmax_rows(z);
  tape.backward(ad::scale(ad::slice(lp, 1, 0, 1), -1.0));
  const RealArray g = tape.gradient(z);
  const RealArray p = softmax_rows(z0);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(g(0, j) - (p(0, j) - (j == 0 ? 1.0 : 0.0))) < 1e-12);
    RealArray zp = z0, zm = z0;
    zp(0, j) += 1e-5;
    zm(0, j) -= 1e-5;
    CHECK(std::abs(g(0, j) - (ce(zp) - ce(zm)) / 2e-5) < 1e-8);
  }
}

TEST_CASE("every op passes a finite-difference check") {
  std::mt19937_64 rng(11);
  ParameterVector theta;
  theta.add("a", random_matrix(3, 4, rng));
  theta.add("b", random_matrix(4, 2, rng));
  theta.add("r", random_matrix(1, 4, rng));
  // positive inputs for log
  RealArray pos = random_matrix(3, 4, rng);
  for (auto& v : pos.data()) v = 0.5 + std::abs(v);
  theta.add("p", pos);

  const Objective f = [](const ParameterVector& th) {
    Tape tape;
    const auto v = tape.bind(th);
    const Var a = v[0], b = v[1], r = v[2], p = v[3];
    Var h = ad::tanh(ad::add_row(a, r));                 // 3x4
    h = ad::add(h, ad::mul(ad::sigmoid(a), ad::log(p)));  // 3x4
    h = ad::sub(h, ad::scale(ad::exp(ad::scale(a, 0.1)), 0.5));
    const Var m = ad::matmul(h, b);                        // 3x2
    const Var parts[] = {ad::softmax_rows(m), ad::log_softmax_rows(ad::slice(h, 1, 1, 3))};
    const Var cat = ad::concat(parts, 1);                  // 3x4
    const Var rows[] = {cat, ad::slice(h, 0, 0, 1)};
    const Var out = ad::sum(ad::mul(ad::concat(rows, 0), ad::concat(rows, 0)));
    tape.backward(out);
    return Evaluation{out.value().item(), tape.parameter_gradient()};
  };
  CHECK(finite_diff_check(f, theta) < 1e-6);
}

TEST_CASE("finite_diff_check sanity") {
  ParameterVector theta;
  theta.add("x", RealArray::matrix(1, 3, {0.3, -1.2, 2.0}));
  SUBCASE("quadratic is exact up to roundoff") {
    const Objective q = [](const ParameterVector& th) {
      Evaluation e;
      for (double v : th.flat()) {
        e.value += 1.5 * v * v - v;
        e.gradient.push_back(3.0 * v - 1.0);
      }
      return e;
    };
    CHECK(finite_diff_check(q, theta, {1e-5, {}}) < 1e-7);
  }
  SUBCASE("constant function") {
    const Objective c = [](const ParameterVector& th) {
      return Evaluation{4.0, GradientVector(th.total_size(), 0.0)};
    };
    CHECK(finite_diff_check(c, theta) == 0.0);
  }
  SUBCASE("non-finite objective is an error") {
    const Objective bad = [](const ParameterVector& th) {
      return Evaluation{std::log(-1.0), GradientVector(th.total_size(), 0.0)};
    };
    CHECK_THROWS(finite_diff_check(bad, theta));
  }
}

TEST_CASE("parameter vector flatten/unflatten round trip") {
  std::mt19937_64 rng(3);
  ParameterVector p;
  p.add("w", random_matrix(2, 3, rng));
  p.add("b", random_matrix(1, 3, rng));
  CHECK(p.total_size() == 9);
  CHECK_THROWS_AS(p.add("w", RealArray::matrix(1, 1)), InvalidArgument);
  const auto flat = p.flatten();
  ParameterVector q = p.zeros_like();
  q.unflatten(flat);
  CHECK(q == p);
  CHECK(q.array(0) == p.array(0));
  CHECK_THROWS(q.unflatten(std::vector<double>(8, 0.0)));
}

TEST_CASE("optimizer steps") {
  ParameterVector theta;
  theta.add("x", RealArray::scalar(1.0));
  SUBCASE("sgd arithmetic") {
    OptimizerConfig c;
    c.method = OptimizerMethod::sgd;
    c.lr = 0.1;
    Optimizer opt(c, 1);
    const double g[] = {0.5};
    opt.step(theta, g);
    CHECK(theta.flat()[0] == doctest::Approx(0.95).epsilon(1e-15));
  }
  SUBCASE("zero gradient leaves theta unchanged") {
    for (auto m : {OptimizerMethod::sgd, OptimizerMethod::sgd_momentum, OptimizerMethod::adam}) {
      OptimizerConfig c;
      c.method = m;
      Optimizer opt(c, 1);
      const double g[] = {0.0};
      for (int i = 0; i < 3; ++i) opt.step(theta, g);
      CHECK(theta.flat()[0] == 1.0);
    }
  }
  SUBCASE("clipping halves a norm-2 gradient at clip_norm 1") {
    ParameterVector two;
    two.add("x", RealArray::matrix(1, 2, {0.0, 0.0}));
    OptimizerConfig c;
    c.method = OptimizerMethod::sgd;
    c.lr = 1.0;
    c.clip_norm = 1.0;
    Optimizer opt(c, 2);
    const double g[] = {1.2, 1.6};  // norm 2
    opt.step(two, g);
    CHECK(two.flat()[0] == doctest::Approx(-0.6));
    CHECK(two.flat()[1] == doctest::Approx(-0.8));
  }
  SUBCASE("invalid learning rate") {
    OptimizerConfig c;
    c.lr = 0.0;
    CHECK_THROWS_AS(Optimizer(c, 1), InvalidArgument);
  }
}
