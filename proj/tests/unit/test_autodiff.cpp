#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "pidon/autodiff/array_tape.hpp"
#include "pidon/autodiff/jet.hpp"
#include "pidon/autodiff/nested.hpp"
#include "pidon/autodiff/pointwise.hpp"
#include "pidon/autodiff/tape.hpp"
#include "fd.hpp"

using namespace pidon;

TEST(Jet, SeedThroughSine) {
  auto j = sin(jet_seed(0.0, 3));
  EXPECT_DOUBLE_EQ(j[0], 0.0);
  EXPECT_DOUBLE_EQ(j[1], 1.0);
  EXPECT_DOUBLE_EQ(j[2], 0.0);
  EXPECT_DOUBLE_EQ(j[3], -1.0);
}

TEST(Jet, SquareOfSeed) {
  auto j = square(jet_seed(1.0, 2));
  EXPECT_DOUBLE_EQ(j[0], 1.0);
  EXPECT_DOUBLE_EQ(j[1], 2.0);
  EXPECT_DOUBLE_EQ(j[2], 2.0);
}

TEST(Jet, TanhFirstOrderMatchesFiniteDifference) {
  auto j = tanh(jet_seed(0.5, 1));
  EXPECT_DOUBLE_EQ(j[0], std::tanh(0.5));
  EXPECT_NEAR(j[1], 1.0 - std::tanh(0.5) * std::tanh(0.5), 1e-15);
  const double h = 1e-6;
  EXPECT_NEAR(j[1], (std::tanh(0.5 + h) - std::tanh(0.5 - h)) / (2 * h), 1e-8);
}

TEST(Jet, OrderOutOfRange) {
  EXPECT_THROW(jet_seed(0.0, 4), RangeError);
  EXPECT_THROW(jet_seed(0.0, -1), RangeError);
  EXPECT_THROW(Jet<double>::constant(0.0, 7), RangeError);
}

TEST(Jet, ConstantHasZeroDerivatives) {
  auto c = Jet<double>::constant(2.5, 3);
  EXPECT_EQ(c.order(), 3);
  EXPECT_EQ(c[0], 2.5);
  for (int k = 1; k <= 3; ++k) EXPECT_EQ(c[k], 0.0);
}

TEST(Jet, ProductOfFirstOrder) {
  Jet<double> a(1);
  a[0] = 1, a[1] = 1;
  auto r = a * a;
  EXPECT_EQ(r[0], 1.0);
  EXPECT_EQ(r[1], 2.0);
}

TEST(Jet, GeometricSeriesDivision) {
  auto one = Jet<double>::constant(1.0, 2);
  auto r = one / jet_seed(1.0, 2);
  EXPECT_DOUBLE_EQ(r[0], 1.0);
  EXPECT_DOUBLE_EQ(r[1], -1.0);
  EXPECT_DOUBLE_EQ(r[2], 2.0);
}

TEST(Jet, DivisionByZeroLeading) {
  auto z = Jet<double>::constant(0.0, 2);
  EXPECT_THROW(jet_seed(1.0, 2) / z, SingularityError);
}

TEST(Jet, OrderMismatch) {
  EXPECT_THROW(jet_seed(1.0, 2) + jet_seed(1.0, 3), ShapeError);
}

TEST(Jet, TanhThirdMatchesStencil) {
  auto j = tanh(jet_seed(0.3, 3));
  const double fd = testing_fd::nth_derivative([](double x) { return std::tanh(x); }, 0.3, 3);
  EXPECT_NEAR(j[3], fd, 1e-5 * std::abs(fd));
}

// Every unary and binary op: coefficients 1..3 against central differences
// of the order-0 evaluation at random points in [-2, 2].
TEST(Jet, AllOpsMatchFiniteDifferences) {
  using F = std::function<Jet<double>(const Jet<double>&)>;
  const std::vector<std::pair<const char*, F>> ops = {
      {"tanh", [](const Jet<double>& x) { return tanh(x); }},
      {"sin", [](const Jet<double>& x) { return sin(x); }},
      {"cos", [](const Jet<double>& x) { return cos(x); }},
      {"exp", [](const Jet<double>& x) { return exp(x); }},
      {"square", [](const Jet<double>& x) { return square(x); }},
      {"add", [](const Jet<double>& x) { return x + sin(x); }},
      {"sub", [](const Jet<double>& x) { return cos(x) - x; }},
      {"mul", [](const Jet<double>& x) { return tanh(x) * exp(x); }},
      {"div", [](const Jet<double>& x) { return sin(x) / (square(x) + 1.5); }},
  };
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const auto& [name, f] : ops) {
    for (int trial = 0; trial < 20; ++trial) {
      const double x = u(rng);
      const auto j = f(jet_seed(x, 3));
      auto plain = [&](double y) { return f(Jet<double>::constant(y, 0))[0]; };
      EXPECT_DOUBLE_EQ(j[0], plain(x)) << name;
      for (int k = 1; k <= 3; ++k) {
        const double fd = testing_fd::nth_derivative(plain, x, k);
        EXPECT_NEAR(j[k], fd, 1e-4 * std::max(1.0, std::abs(fd))) << name << " order " << k << " at " << x;
      }
    }
  }
}

TEST(Tape, ProductAdjoints) {
  Tape t;
  auto w1 = t.variable(2.0), w2 = t.variable(3.0);
  auto g = tape_backward(t, w1 * w2, {w1, w2});
  EXPECT_EQ(g[0], 3.0);
  EXPECT_EQ(g[1], 2.0);
}

TEST(Tape, TanhAtZero) {
  Tape t;
  auto w = t.variable(0.0);
  EXPECT_EQ(tape_backward(t, tanh(w), {w})[0], 1.0);
}

TEST(Tape, NonAncestorHasZeroAdjoint) {
  Tape t;
  auto a = t.variable(1.0), b = t.variable(2.0);
  auto r = a * 3.0;
  EXPECT_EQ(tape_backward(t, r, {a, b})[1], 0.0);
}

TEST(Tape, RootOnOtherTape) {
  Tape t1, t2;
  auto a = t1.variable(1.0);
  EXPECT_THROW(t2.backward(a * 2.0), TapeMismatchError);
  auto b = t2.variable(1.0);
  EXPECT_THROW(a + b, TapeMismatchError);
}

TEST(Tape, BackwardTwiceIsIdempotent) {
  Tape t;
  auto a = t.variable(0.7), b = t.variable(-1.3);
  auto r = sin(a * b) + exp(a) / (b * b);
  t.backward(r);
  auto first = t.adjoints();
  t.backward(r);
  EXPECT_EQ(first, t.adjoints());
}

TEST(Tape, ResetKeepsDeterministicNodeCount) {
  Tape t;
  auto run = [&] {
    t.reset();
    auto a = t.variable(0.1);
    auto r = tanh(a * a + 1.0);
    (void)r;
    return t.size();
  };
  EXPECT_EQ(run(), run());
}

// Random two-layer network with 20 parameters: adjoints against central
// differences.
TEST(Tape, RandomNetworkMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  std::vector<double> theta(20);
  for (auto& v : theta) v = n01(rng);
  const double x0 = 0.3, x1 = -0.8;
  // 2 -> 4 tanh -> 1, then a scaled nonlinearity of the spare parameters.
  auto net = [&](const std::vector<TapeVar>& p) {
    std::vector<TapeVar> h;
    for (int j = 0; j < 4; ++j) h.push_back(tanh(x0 * p[j] + x1 * p[4 + j] + p[8 + j]));
    TapeVar out = p[16];
    for (int j = 0; j < 4; ++j) out = out + h[j] * p[12 + j];
    return out * p[17] + sin(p[18]) * exp(p[19] * 0.1);
  };
  Tape t;
  std::vector<TapeVar> leaves;
  for (double v : theta) leaves.push_back(t.variable(v));
  const auto g = tape_backward(t, net(leaves), leaves);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    auto f = [&](double v) {
      std::vector<TapeVar> p(theta.begin(), theta.end());
      p[i] = v;
      return net(p).value();
    };
    const double fd = testing_fd::nth_derivative(f, theta[i], 1, 1e-5);
    EXPECT_NEAR(g[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << i;
  }
}

TEST(Nested, LinearNetworkTimeDerivative) {
  const std::vector<double> theta = {1.7};
  auto g = grad_of_input_derivative(std::span<const double>(theta), [](std::span<const TapeVar> p) {
    auto t = Jet<TapeVar>::seed(TapeVar(0.4), 1);
    auto G = t * p[0];
    return TapeVar(square(G[1]));
  });
  EXPECT_DOUBLE_EQ(g[0], 2 * 1.7);
}

TEST(Nested, QuadraticSecondDerivative) {
  const std::vector<double> theta = {-0.6};
  auto g = grad_of_input_derivative(std::span<const double>(theta), [](std::span<const TapeVar> p) {
    auto x = Jet<TapeVar>::seed(TapeVar(1.3), 2);
    auto G = square(x) * p[0];
    return TapeVar(square(G[2]));
  });
  EXPECT_NEAR(g[0], 8 * -0.6, 1e-14);
}

TEST(Nested, MixedDerivativesUnsupported) {
  const std::vector<double> pt = {0.1, 0.2};
  const std::vector<int> mixed = {1, 1};
  EXPECT_THROW(seed_query<double>(pt, mixed), UnsupportedFeatureError);
  const std::vector<int> pure = {0, 2};
  auto q = seed_query<double>(pt, pure);
  EXPECT_EQ(q[0][1], 0.0);
  EXPECT_EQ(q[1][1], 1.0);
}

// d/dtheta of each jet coefficient equals the finite difference of that
// coefficient in theta.
TEST(Nested, JetOfTapeVarCoefficientGradients) {
  const double theta0 = 0.45, x0 = -0.7;
  auto coeff = [&](double th, int k) {
    auto x = jet_seed(x0, 3);
    return (tanh(x * th) * sin(x + th))[k];
  };
  for (int k = 0; k <= 3; ++k) {
    const std::vector<double> theta = {theta0};
    auto g = grad_of_input_derivative(std::span<const double>(theta), [&](std::span<const TapeVar> p) {
      auto x = Jet<TapeVar>::seed(TapeVar(x0), 3);
      return (tanh(x * p[0]) * sin(x + p[0]))[k];
    });
    const double fd = testing_fd::nth_derivative([&](double th) { return coeff(th, k); }, theta0, 1, 1e-4);
    EXPECT_NEAR(g[0], fd, 1e-7 * std::max(1.0, std::abs(fd))) << k;
  }
}

TEST(ArrayTape, MatchesScalarTape) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  Array x(5, 3), w(3, 4), b(1, 4);
  for (auto* a : {&x, &w, &b})
    for (Eigen::Index i = 0; i < a->size(); ++i) a->data()[i] = n01(rng);

  ArrayTape at;
  auto W = at.leaf(w), B = at.leaf(b);
  auto X = at.constant(x);
  auto H = tanh(add_row(matmul(X, W), B));
  auto Y = mean(square(col_block_sum(H, 1, 3) - gather_rows(col_block_sum(H, 0, 1), {4, 3, 2, 1, 0})));
  at.backward(Y);
  const Array gw = at.grad(W);

  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      auto f = [&](double v) {
        Array w2 = w;
        w2(i, j) = v;
        Array h = tanh(add_row(matmul(x, w2), b));
        Array c = col_block_sum(h, 1, 3);
        Array g = gather_rows(col_block_sum(h, 0, 1), {4, 3, 2, 1, 0});
        return (c - g).square().mean();
      };
      EXPECT_NEAR(gw(i, j), testing_fd::nth_derivative(f, w(i, j), 1, 1e-5), 1e-8);
    }
}

TEST(Pointwise, ElementwiseAndMean) {
  Pointwise<double> a(std::vector<double>{1, 2, 3});
  auto b = square(a) * 2.0 - 1.0;
  EXPECT_EQ(b[2], 17.0);
  EXPECT_DOUBLE_EQ(mean(b), (1.0 + 7.0 + 17.0) / 3);
  EXPECT_THROW(a + Pointwise<double>(2, 0.0), ShapeError);
}
