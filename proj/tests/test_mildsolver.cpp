#include <gtest/gtest.h>

#include <boost/numeric/odeint.hpp>
#include <cmath>

#include "skelsim/catalog.hpp"
#include "skelsim/mildsolver.hpp"

using namespace skelsim;

namespace {

BranchingMechanism quadratic(double beta, double alpha) { return {Field(beta), Field(alpha), LevyKernel::none()}; }

double logistic(double theta, double t) { return theta * std::exp(t) / (1.0 + theta * std::expm1(t)); }

double dopri(const BranchingMechanism& m, double theta, double T) {
  using namespace boost::numeric::odeint;
  std::vector<double> u{theta};
  auto rhs = [&](const std::vector<double>& x, std::vector<double>& dx, double) { dx[0] = -m.psi(Point{}, x[0]); };
  integrate_adaptive(make_controlled(1e-14, 1e-14, runge_kutta_dopri5<std::vector<double>>()), rhs, u, 0.0, T, 1e-4);
  return u[0];
}

}  // namespace

TEST(CsbpOde, FixedPoints) {
  auto m = quadratic(1.0, 1.0);
  auto zero = solve_csbp_ode(m, 0.0, 3.0, 0.01);
  for (double v : zero.u) EXPECT_EQ(v, 0.0);
  auto root = solve_csbp_ode(m, 1.0, 3.0, 0.01);
  for (double v : root.u) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(CsbpOde, LogisticAgainstAdaptiveOracle) {
  auto m = quadratic(1.0, 1.0);
  auto c = solve_csbp_ode(m, 2.0, 1.0, 0.01);
  double oracle = dopri(m, 2.0, 1.0);
  EXPECT_NEAR(oracle, logistic(2.0, 1.0), 1e-11);
  EXPECT_NEAR(c.u.back(), oracle, 1e-8);
  EXPECT_NEAR(c.t.back(), 1.0, 1e-14);
}

TEST(CsbpOde, TemperedJumpsAgainstAdaptiveOracle) {
  BranchingMechanism m{Field(1.0), Field(0.5), LevyKernel::tempered(0.7, 1.0, 1.0)};
  auto c = solve_csbp_ode(m, 0.3, 2.0, 0.01);
  EXPECT_NEAR(c.u.back(), dopri(m, 0.3, 2.0), 1e-8);
}

TEST(CsbpOde, StiffStartHalves) {
  auto m = quadratic(0.0, 1.0);
  auto c = solve_csbp_ode(m, 1e4, 0.1, 0.05);
  EXPECT_GT(c.halvings, 0);
  EXPECT_NEAR(c.u.back(), 1e4 / (1.0 + 1e4 * 0.1), 1e-3);
}

TEST(Mild, ZeroInputGivesZero) {
  auto card = skelsim::card("inward-ou");
  MildGrid g;
  g.nodes = 81;
  auto s = solve_mild(card.mechanism, card.motion, TestFunction::constant_fn(0.0), 1.0, g);
  for (const auto& row : s.u)
    for (double v : row) EXPECT_EQ(v, 0.0);
  EXPECT_DOUBLE_EQ(laplace_functional(s, {{Point(0.0), 1.0}}), 1.0);
}

TEST(Mild, ConstantDataMatchesOde) {
  auto card = skelsim::card("inward-ou");
  MildGrid g;
  g.nodes = 41;
  g.dt = 0.002;
  auto s = solve_mild(card.mechanism, card.motion, TestFunction::constant_fn(2.0), 1.0, g);
  auto ode = solve_csbp_ode(card.mechanism, 2.0, 1.0, 0.002);
  ASSERT_EQ(ode.u.size(), s.t.size());
  double worst = 0.0;
  for (std::size_t j = 0; j < s.t.size(); ++j)
    for (double v : s.u[j]) worst = std::max(worst, std::abs(v - ode.u[j]));
  EXPECT_LE(worst, 1e-6);
  EXPECT_NEAR(laplace_functional(s, {{Point(0.0), 1.0}}), std::exp(-ode.u.back()), 1e-6);
  EXPECT_TRUE(s.monotone);
  EXPECT_TRUE(s.bounded);
}

TEST(Mild, LinearCaseMatchesHeatKernel) {
  auto motion = make_ou(1.0, 1);
  auto mech = quadratic(0.7, 0.0);
  auto f = TestFunction::indicator(-1.0, 1.0);
  MildGrid g;
  auto s = solve_mild(mech, motion, f, 2.0, g);
  double worst = 0.0;
  for (std::size_t j = 1; j < s.t.size(); j += 20)
    for (std::size_t i = 40; i + 40 < s.x.size(); ++i) {
      double t = s.t[j];
      double exact = std::exp(0.7 * t) * gaussian_average(f, ou_mean_factor(1.0, t) * s.x[i], ou_variance(1.0, t));
      worst = std::max(worst, std::abs(s.u[j][i] - exact));
    }
  EXPECT_LE(worst, 1e-6);
}

TEST(Mild, MonotoneInData) {
  auto card = skelsim::card("inward-ou");
  MildGrid g;
  g.nodes = 161;
  g.dt = 0.02;
  auto s1 = solve_mild(card.mechanism, card.motion, TestFunction::indicator(-1.0, 1.0), 1.0, g);
  auto s2 = solve_mild(card.mechanism, card.motion, TestFunction::bump(1.7, 0.0, 1.0), 1.0, g);
  for (std::size_t j = 0; j < s1.t.size(); ++j)
    for (std::size_t i = 0; i < s1.x.size(); ++i) EXPECT_LE(s1.u[j][i], s2.u[j][i] + 1e-9);
  EXPECT_TRUE(s1.monotone && s2.monotone && s1.bounded && s2.bounded);
}

TEST(Mild, TimeRefinementConverges) {
  auto card = skelsim::card("inward-ou");
  auto f = TestFunction::indicator(-1.0, 1.0);
  MildGrid g;
  g.nodes = 161;
  double prev = 0.0, prev_change = 0.0;
  for (double dt : {0.04, 0.02, 0.01}) {
    g.dt = dt;
    auto s = solve_mild(card.mechanism, card.motion, f, 2.0, g);
    double v = s.value(0.0, 2.0);
    if (dt < 0.04) {
      double change = std::abs(v - prev);
      if (prev_change > 0.0) {
        EXPECT_LE(change, 0.6 * prev_change);
      }
      prev_change = change;
    }
    prev = v;
  }
}

TEST(Mild, ForcingTermConstantCase) {
  auto card = skelsim::card("inward-ou");
  MildGrid g;
  g.nodes = 41;
  g.dt = 0.002;
  auto s = solve_mild(card.mechanism, card.motion, TestFunction::constant_fn(0.0), 1.0, g,
                      [](const Point&, double) { return 0.5; });
  // du/dt = u - u^2 + 1/2, u(0) = 0
  BranchingMechanism shifted{Field(1.0), Field(1.0), LevyKernel::none()};
  std::vector<double> u{0.0};
  using namespace boost::numeric::odeint;
  integrate_adaptive(make_controlled(1e-14, 1e-14, runge_kutta_dopri5<std::vector<double>>()),
                     [&](const std::vector<double>& x, std::vector<double>& dx, double) {
                       dx[0] = -shifted.psi(Point{}, x[0]) + 0.5;
                     },
                     u, 0.0, 1.0, 1e-4);
  EXPECT_NEAR(s.value(0.0, 1.0), u[0], 1e-6);
}

TEST(Mild, MonteCarloPropagatorOnInterval) {
  auto card = skelsim::card("wright-fisher");
  auto mech = quadratic(2.0, 0.0);
  MildGrid g;
  g.nodes = 41;
  g.dt = 0.05;
  g.mc_paths = 20000;
  auto s = solve_mild(mech, card.motion, card.phi_function(), 1.0, g);
  EXPECT_GT(s.mc_noise, 0.0);
  for (double x : {0.25, 0.5, 0.75}) {
    double exact = std::exp(1.0) * card.phi(Point(x));
    EXPECT_NEAR(s.value(x, 1.0), exact, 0.03 * exact) << x;
  }
}

TEST(Mild, OutOfGridThrows) {
  auto card = skelsim::card("inward-ou");
  MildGrid g;
  g.nodes = 41;
  g.dt = 0.1;
  auto s = solve_mild(card.mechanism, card.motion, TestFunction::constant_fn(1.0), 0.5, g);
  EXPECT_THROW(laplace_functional(s, {{Point(20.0), 1.0}}), OutOfRangeError);
}

TEST(Mild, BudgetExceededThrows) {
  auto card = skelsim::card("inward-ou");
  MildGrid g;
  g.nodes = 41;
  g.max_iter = 2;
  EXPECT_THROW(solve_mild(card.mechanism, card.motion, TestFunction::constant_fn(1.0), 1.0, g), NonConvergenceError);
}
