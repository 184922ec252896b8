#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pidon/rollout.hpp"

using namespace pidon;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

FourierForcing single_cosine() { return FourierForcing{{1.0}, {0.0}}; }  // sqrt(2) cos t

OperatorNet small_net(const ProblemSpec& p, std::uint64_t seed) {
  return init_operator_net(default_operator_spec(p, 2, 8, 6), seed);
}

}  // namespace

TEST(RolloutPlan, WindowTimesIncludeBothEnds) {
  const auto t = RolloutPlan{3, 0.5, 6}.window_times();
  ASSERT_EQ(t.size(), 6u);
  EXPECT_EQ(t.front(), 0.0);
  EXPECT_EQ(t.back(), 0.5);
  EXPECT_THROW((RolloutPlan{3, 0.5, 1}.window_times()), ConfigError);
}

TEST(Rollout, ExactDecayMatchesExponential) {
  const RolloutPlan plan{10, 1.0, 11};
  const auto r = rollout(decay_propagator(), vec({1.0, -2.0}), plan);
  ASSERT_EQ(r.t.size(), 101u);
  ASSERT_EQ(r.values.rows(), 101);
  double worst = 0.0;
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    EXPECT_NEAR(r.t[k], 0.1 * static_cast<double>(k), 1e-12);
    worst = std::max(worst, std::abs(r.values(static_cast<Eigen::Index>(k), 0) - std::exp(-r.t[k])));
    worst = std::max(worst, std::abs(r.values(static_cast<Eigen::Index>(k), 1) + 2.0 * std::exp(-r.t[k])));
  }
  EXPECT_LT(worst, 1e-12);
  ASSERT_EQ(r.restarts.size(), 11u);
  EXPECT_NEAR(r.restarts.back()(0), std::exp(-10.0), 1e-12);
}

TEST(Rollout, RestartIsTheLastRowOfThePreviousWindow) {
  std::vector<Vec> seen;
  const Propagator prop = [&seen](const Vec& u, const std::vector<double>& t) {
    seen.push_back(u);
    Mat out(static_cast<Eigen::Index>(t.size()), 1);
    for (std::size_t j = 0; j < t.size(); ++j) out(static_cast<Eigen::Index>(j), 0) = std::cos(u(0) + 0.3 * t[j]) + 0.1 / 3;
    return out;
  };
  const auto r = rollout(prop, vec({0.7}), {5, 1.0, 4});
  ASSERT_EQ(seen.size(), 5u);
  for (std::size_t k = 1; k < seen.size(); ++k) {
    EXPECT_EQ(seen[k](0), r.restarts[k](0));
    EXPECT_EQ(seen[k](0), r.values(static_cast<Eigen::Index>(3 * k), 0));
  }
  for (std::size_t k = 1; k < r.t.size(); ++k) EXPECT_GT(r.t[k], r.t[k - 1]);
  EXPECT_EQ(r.t.size(), 16u);
}

TEST(Rollout, DivergenceReportsTheWindow) {
  const Propagator grow = [](const Vec& u, const std::vector<double>& t) {
    Mat out(static_cast<Eigen::Index>(t.size()), 1);
    for (std::size_t j = 0; j < t.size(); ++j) out(static_cast<Eigen::Index>(j), 0) = u(0) * std::exp(10.0 * t[j]);
    return out;
  };
  try {
    rollout(grow, vec({1.0}), {5, 1.0, 3});
    FAIL() << "expected divergence";
  } catch (const RolloutDivergedError& e) {
    EXPECT_EQ(e.window(), 2);
  }
  const Propagator nan = [](const Vec&, const std::vector<double>& t) {
    return Mat(Mat::Constant(static_cast<Eigen::Index>(t.size()), 1, std::nan("")));
  };
  EXPECT_THROW(rollout(nan, vec({1.0}), {1, 1.0, 3}), RolloutDivergedError);
}

TEST(Rollout, RejectsBadPlansAndShapes) {
  EXPECT_THROW(rollout(decay_propagator(), vec({1.0}), {0, 1.0, 3}), ConfigError);
  EXPECT_THROW(rollout(decay_propagator(), vec({1.0}), {1, -1.0, 3}), ConfigError);
  const Propagator bad = [](const Vec&, const std::vector<double>&) { return Mat(Mat::Zero(2, 1)); };
  EXPECT_THROW(rollout(bad, vec({1.0}), {1, 1.0, 3}), ShapeError);
}

TEST(RolloutForced, QuadratureOfCosineGivesSine) {
  const auto f = single_cosine();
  const auto sensors = SensorGrid::uniform(0.0, 1.0, 100);
  const auto r = rollout_forced(quadrature_propagator(), 0.0, [f](double t) { return f(t); }, sensors, {50, 1.0, 11});
  double worst = 0.0;
  for (std::size_t k = 0; k < r.t.size(); ++k)
    worst = std::max(worst, std::abs(r.values(static_cast<Eigen::Index>(k), 0) - std::sqrt(2.0) * std::sin(r.t[k])));
  EXPECT_LT(worst, 1e-10);
  EXPECT_NEAR(r.t.back(), 50.0, 1e-12);
}

TEST(RolloutForced, WindowsSeeShiftedForcingOnSensors) {
  const auto sensors = SensorGrid::uniform(0.0, 1.0, 3);
  std::vector<Vec> seen;
  const ForcedPropagator prop = [&seen](const Vec& fs, const std::function<double(double)>&, double u0,
                                        const std::vector<double>& t) {
    seen.push_back(fs);
    return Vec(Vec::Constant(static_cast<Eigen::Index>(t.size()), u0));
  };
  rollout_forced(prop, 0.0, [](double t) { return t; }, sensors, {3, 1.0, 2});
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(seen[2](0), 2.0);
  EXPECT_EQ(seen[2](1), 2.5);
  EXPECT_EQ(seen[2](2), 3.0);
}

TEST(CumulativeIntegral, PolynomialIsExact) {
  const auto s = cumulative_integral([](double t) { return 3.0 * t * t; }, 1.0, {0.0, 0.5, 2.0});
  EXPECT_NEAR(s[0], 1.0, 1e-14);
  EXPECT_NEAR(s[1], 1.125, 1e-13);
  EXPECT_NEAR(s[2], 9.0, 1e-12);
}

TEST(OnetPropagator, OdeBlockMatchesPointwiseEvaluation) {
  const auto p = make_problem(ProblemId::kPendulum);
  const auto net = small_net(p, 3);
  const auto prop = onet_propagator(p, net);
  const Vec u = vec({0.4, -1.2});
  const std::vector<double> t{0.0, 0.25, 1.0};
  const Mat block = prop(u, t);
  ASSERT_EQ(block.rows(), 3);
  ASSERT_EQ(block.cols(), 2);
  for (std::size_t j = 0; j < t.size(); ++j) {
    const auto v = onet_eval(net, std::vector<double>{0.4, -1.2}, std::nullopt, std::vector<double>{t[j]});
    EXPECT_NEAR(block(static_cast<Eigen::Index>(j), 0), v[0], 1e-13);
    EXPECT_NEAR(block(static_cast<Eigen::Index>(j), 1), v[1], 1e-13);
  }
}

TEST(OnetPropagator, FieldBlockIsTimeMajorOverSensors) {
  auto p = make_problem(ProblemId::kDiffusionReaction);
  p.m = 7;
  const auto net = small_net(p, 5);
  const auto prop = onet_propagator(p, net);
  Vec u(7);
  for (int i = 0; i < 7; ++i) u(i) = std::sin(0.5 * i);
  const std::vector<double> t{0.0, 0.5, 1.0};
  const Mat block = prop(u, t);
  ASSERT_EQ(block.rows(), 3);
  ASSERT_EQ(block.cols(), 7);
  const auto sensors = p.sensor_grid().points;
  const std::vector<double> uv(u.data(), u.data() + 7);
  const auto v = onet_eval(net, uv, std::nullopt, std::vector<double>{sensors[4], 0.5});
  EXPECT_NEAR(block(1, 4), v[0], 1e-13);
}

TEST(OnetPropagator, ForcedNetNeedsTwoBranches) {
  const auto p = make_problem(ProblemId::kInhomOde);
  const auto pend = make_problem(ProblemId::kPendulum);
  EXPECT_THROW(onet_propagator(p, small_net(p, 1)), ArityError);
  EXPECT_THROW(onet_forced_propagator(pend, small_net(pend, 1)), ArityError);
  auto q = p;
  q.m = 5;
  const auto net = small_net(q, 2);
  const auto prop = onet_forced_propagator(q, net);
  const Vec fs = Vec::LinSpaced(5, -1.0, 1.0);
  const Vec col = prop(fs, nullptr, 0.3, {0.0, 0.7});
  const std::vector<double> fv(fs.data(), fs.data() + 5);
  EXPECT_NEAR(col(1), onet_eval(net, fv, 0.3, std::vector<double>{0.7})[0], 1e-13);
}

TEST(TestSet, DeterministicAndInsideTheBox) {
  const auto p = make_problem(ProblemId::kPendulum);
  const auto a = make_test_set(p, 20, 9), b = make_test_set(p, 20, 9), c = make_test_set(p, 20, 10);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].u, b[i].u);
    differs |= a[i].u != c[i].u;
    for (int k = 0; k < 2; ++k) {
      EXPECT_GE(a[i].u(k), -3.0);
      EXPECT_LE(a[i].u(k), 3.0);
    }
  }
  EXPECT_TRUE(differs);
  const auto narrow = make_test_set(p, 5, 9, {{{-0.1, 0.1}, {-0.1, 0.1}}});
  for (const auto& tc : narrow) EXPECT_LE(tc.u.cwiseAbs().maxCoeff(), 0.1);
}

TEST(Reference, WaveMatchesStandingWave) {
  const auto p = make_problem(ProblemId::kWave);
  const auto cases = make_test_set(p, 1, 1);
  const std::vector<double> t{0.0, 0.3, 1.7};
  const Mat ref = reference_solution(p, cases[0], t);
  const auto x = p.sensor_grid().points;
  for (std::size_t k = 0; k < t.size(); ++k)
    for (std::size_t j = 0; j < x.size(); ++j)
      EXPECT_NEAR(ref(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)),
                  std::sin(std::numbers::pi * x[j]) * std::cos(std::numbers::pi * t[k]), 1e-12);
}

TEST(Reference, InhomOdeIsTheIntegralOfTheForcing) {
  const auto p = make_problem(ProblemId::kInhomOde);
  TestCase c;
  c.u0 = 0.5;
  c.forcing = single_cosine();
  const Mat ref = reference_solution(p, c, {2.0, 0.0, 1.0});
  EXPECT_NEAR(ref(0, 0), 0.5 + std::sqrt(2.0) * std::sin(2.0), 1e-12);
  EXPECT_NEAR(ref(1, 0), 0.5, 1e-14);
  EXPECT_NEAR(ref(2, 0), 0.5 + std::sqrt(2.0) * std::sin(1.0), 1e-12);
}

TEST(Reference, DiffusionReactionDecaysLikeHeatForSmallData) {
  const auto p = make_problem(ProblemId::kDiffusionReaction);
  TestCase c;
  const auto x = p.sensor_grid().points;
  c.u.resize(static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) c.u(static_cast<Eigen::Index>(j)) = 1e-3 * std::sin(std::numbers::pi * x[j]);
  const Mat ref = reference_solution(p, c, {0.0, 2.5, 5.0});
  const double decay = std::exp(-0.001 * std::numbers::pi * std::numbers::pi * 5.0);
  EXPECT_NEAR(ref(2, 50) / c.u(50), decay, 1e-4);
  EXPECT_LT(ref(1, 50), c.u(50));
}

TEST(Reference, KdVSolitonTravels) {
  const auto p = make_problem(ProblemId::kKdV);
  TestCase c;
  c.descriptor = {2.0, 1.5};
  const Mat ref = reference_solution(p, c, {0.0, 10.0});
  const auto x = p.sensor_grid().points;
  EXPECT_NEAR(ref(1, 100), kdv_soliton(2.0, 1.5, x[100], 10.0), 1e-15);
  EXPECT_THROW(reference_solution(p, TestCase{}, {0.0}), ShapeError);
}

TEST(ErrorVsHorizon, ExactPropagatorHasNoError) {
  auto p = make_problem(ProblemId::kPendulum);
  p.constants["b"] = 0.0;
  p.constants["g"] = 0.0;
  // Zero gravity and damping: s1 grows linearly, s2 stays constant.
  const Propagator drift = [](const Vec& u, const std::vector<double>& t) {
    Mat out(static_cast<Eigen::Index>(t.size()), 2);
    for (std::size_t j = 0; j < t.size(); ++j) out.row(static_cast<Eigen::Index>(j)) << u(0) + u(1) * t[j], u(1);
    return out;
  };
  const CaseRollout roll = [&](const TestCase& c, int steps, int points) {
    return rollout(drift, c.u, {steps, p.dt, points});
  };
  const auto cases = make_test_set(p, 4, 2);
  const auto rows = error_vs_horizon(p, roll, problem_reference(p), cases, {2.0, 5.0}, 11, 2);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_LT(r.mean_error, 1e-9);
    EXPECT_EQ(r.diverged, 0);
    ASSERT_EQ(r.component_error.size(), 2u);
  }
  EXPECT_THROW(error_vs_horizon(p, roll, problem_reference(p), cases, {2.5}), ConfigError);
  EXPECT_THROW(error_vs_horizon(p, roll, problem_reference(p), {}, {2.0}), ConfigError);
}

TEST(ErrorVsHorizon, DivergedCasesCountAsUnitError) {
  const auto p = make_problem(ProblemId::kPendulum);
  const CaseRollout roll = [](const TestCase&, int, int) -> RolloutResult { throw RolloutDivergedError("boom", 1); };
  const auto rows = error_vs_horizon(p, roll, problem_reference(p), make_test_set(p, 3, 1), {1.0});
  EXPECT_EQ(rows[0].mean_error, 1.0);
  EXPECT_EQ(rows[0].diverged, 3);
}
