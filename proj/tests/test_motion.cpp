#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "skelsim/motion.hpp"
#include "skelsim/numerics.hpp"

using namespace skelsim;

TEST(Step, BrownianScaling) {
  auto m = make_brownian(1);
  Stream rng(1, 0, "motion");
  Accumulator a;
  double dt = 1e-4;
  for (int i = 0; i < 100000; ++i) a.add(step(m, PathState{}, dt, rng).x[0]);
  EXPECT_NEAR(a.variance() / dt, 1.0, 0.02);
}

TEST(Step, EulerInwardOuStationaryVariance) {
  auto m = make_ou(1.0, 1);
  m.exact = ExactSampler::none;
  Stream rng(2, 0, "motion");
  PathState s;
  for (int i = 0; i < 5000; ++i) s = step(m, s, 1e-3, rng);
  Accumulator a;
  for (int k = 0; k < 20000; ++k) {
    for (int i = 0; i < 200; ++i) s = step(m, s, 1e-3, rng);
    a.add(s.x[0] * s.x[0]);
  }
  EXPECT_NEAR(a.mean, 0.5, 5 * a.se());
}

TEST(Step, EulerMatchesExactHistogram) {
  auto exact = make_ou(1.0, 1);
  auto euler = exact;
  euler.exact = ExactSampler::none;
  Stream r1(3, 0, "motion"), r2(3, 1, "motion");
  const int n = 100000, bins = 50;
  std::vector<double> h1(bins, 0.0), h2(bins, 0.0);
  auto bin = [&](double x) { return std::clamp(int((x + 2.5) / 5.0 * bins), 0, bins - 1); };
  PathState s;
  for (int i = 0; i < 4000; ++i) s = step(euler, s, 1e-3, r1);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < 2000; ++i) s = step(euler, s, 1e-3, r1);
    h1[bin(s.x[0])] += 1.0 / n;
    Point y;
    advance(exact, y, 10.0, r2);
    h2[bin(y[0])] += 1.0 / n;
  }
  double tv = 0.0;
  for (int b = 0; b < bins; ++b) tv += 0.5 * std::abs(h1[b] - h2[b]);
  EXPECT_LE(tv, 0.02);
}

TEST(Step, WrightFisherAbsorbs) {
  auto m = make_wright_fisher();
  Stream rng(4, 0, "motion");
  int dead = 0;
  for (int k = 0; k < 200; ++k) {
    PathState s{Point(0.05), 0.0, true};
    for (int i = 0; i < 20000 && s.alive; ++i) s = step(m, s, 1e-3, rng);
    if (!s.alive) {
      ++dead;
      PathState again = step(m, s, 1e-3, rng);
      EXPECT_FALSE(again.alive);
      EXPECT_EQ(again.x[0], s.x[0]);
    }
  }
  EXPECT_GT(dead, 190);
}

TEST(Step, ReflectingIntervalStaysInside) {
  auto m = make_wright_fisher();
  m.boundary = Boundary::reflecting;
  m.drift = [](const Point& x) { return Point(1.0 - 2.0 * x[0]); };
  Stream rng(5, 0, "motion");
  PathState s{Point(0.5), 0.0, true};
  for (int i = 0; i < 100000; ++i) {
    s = step(m, s, 1e-3, rng);
    ASSERT_TRUE(s.alive);
    ASSERT_GT(s.x[0], 0.0);
    ASSERT_LT(s.x[0], 1.0);
  }
}

TEST(ExactOu, StationaryLimit) {
  Stream rng(6, 0, "motion");
  Accumulator m, v;
  for (int i = 0; i < 100000; ++i) {
    double y = exact_ou_sample(1.0, true, Point(0.0), 50.0, rng)[0];
    m.add(y);
    v.add(y * y);
  }
  EXPECT_NEAR(m.mean, 0.0, 3 * m.se());
  EXPECT_NEAR(v.mean, 0.5, 3 * v.se());
}

TEST(ExactOu, SmallTimeAndMean) {
  Stream rng(7, 0, "motion");
  EXPECT_NEAR(exact_ou_sample(1.0, true, Point(1.3), 1e-14, rng)[0], 1.3, 1e-6);
  Accumulator a;
  for (int i = 0; i < 100000; ++i) a.add(exact_ou_sample(1.0, true, Point(2.0), 1.0, rng)[0]);
  EXPECT_NEAR(a.mean, 2.0 * std::exp(-1.0), 3 * a.se());
  Accumulator b;
  for (int i = 0; i < 100000; ++i) b.add(exact_ou_sample(1.0, false, Point(0.0), 1.0, rng)[0]);
  EXPECT_NEAR(b.variance(), (std::exp(2.0) - 1.0) / 2.0, 0.05);
}

TEST(HTransform, IdentityForConstantH) {
  auto m = make_ou(1.0, 1);
  BranchingMechanism mech{Field(1.0), Field(1.0), LevyKernel::none()};
  auto r = h_transform(m, mech, HFunction::constant(1.0));
  for (double x : {-2.0, 0.0, 1.5}) {
    EXPECT_DOUBLE_EQ(r.motion.drift_at(Point(x))[0], m.drift_at(Point(x))[0]);
    EXPECT_DOUBLE_EQ(r.mechanism.beta(Point(x)), 1.0);
    EXPECT_DOUBLE_EQ(r.mechanism.alpha(Point(x)), 1.0);
  }
}

TEST(HTransform, InwardOuToOutwardOu) {
  double gamma = 1.0, beta = 1.0;
  int d = 1;
  auto m = make_ou(gamma, d);
  BranchingMechanism mech{Field(beta), Field(Field::Fn([&](const Point& x) { return std::exp(-gamma * x.norm2()); })),
                          LevyKernel::none()};
  auto h = HFunction::gaussian(std::pow(gamma / M_PI, -d / 2.0), gamma, d);
  auto r = h_transform(m, mech, h);
  EXPECT_EQ(r.motion.exact, ExactSampler::ou);
  EXPECT_DOUBLE_EQ(r.motion.kappa, -gamma);
  for (double x : {-3.0, -0.5, 0.0, 2.0}) {
    EXPECT_NEAR(r.motion.drift_at(Point(x))[0], gamma * x, 1e-10);
    EXPECT_NEAR(r.mechanism.beta(Point(x)), beta + gamma * d, 1e-10);
    EXPECT_NEAR(r.mechanism.alpha(Point(x)), std::sqrt(M_PI / gamma), 1e-10);
  }
  EXPECT_TRUE(r.mechanism.beta.is_constant());
}

TEST(HTransform, RoundTripThroughReciprocal) {
  auto m = make_ou(0.7, 1);
  BranchingMechanism mech{Field(Field::Fn([](const Point& x) { return 1.0 + 0.3 * std::sin(x[0]); })), Field(0.5),
                          LevyKernel::tempered(0.7, 1.0, 1.0)};
  HFunction h;
  h.value = Field(Field::Fn([](const Point& x) { return 2.0 + std::cos(x[0]); }));
  h.grad = [](const Point& x) { return Point(-std::sin(x[0])); };
  h.laplacian = Field(Field::Fn([](const Point& x) { return -std::cos(x[0]); }));
  auto once = h_transform(m, mech, h);
  auto back = h_transform(once.motion, once.mechanism, h.reciprocal());
  for (const auto& x : m.sample_grid(61)) {
    EXPECT_NEAR(back.motion.drift_at(x)[0], m.drift_at(x)[0], 1e-10);
    EXPECT_NEAR(back.mechanism.beta(x), mech.beta(x), 1e-10);
    EXPECT_NEAR(back.mechanism.alpha(x), mech.alpha(x), 1e-12);
    EXPECT_NEAR(back.mechanism.psi(x, 0.8), mech.psi(x, 0.8), 1e-10);
  }
}

TEST(HTransform, Psi0Scaling) {
  auto m = make_ou(1.0, 1);
  BranchingMechanism mech{Field(1.0), Field(0.5), LevyKernel::tempered(0.7, 1.0, 1.0)};
  auto h = HFunction::gaussian(0.8, 0.1, 1);
  auto r = h_transform(m, mech, h);
  for (double x : {-1.0, 0.0, 2.0})
    for (double z : {0.1, 1.0, 3.0}) {
      double hv = h.value(Point(x));
      EXPECT_NEAR(r.mechanism.psi0(Point(x), z), mech.psi0(Point(x), hv * z) / hv, 1e-10);
    }
}

TEST(HTransform, RejectsInvalidH) {
  auto m = make_ou(1.0, 1);
  BranchingMechanism mech{Field(1.0), Field(1.0), LevyKernel::none()};
  HFunction h;
  h.value = Field(Field::Fn([](const Point& x) { return x[0]; }));
  h.grad = [](const Point&) { return Point(1.0); };
  EXPECT_THROW(h_transform(m, mech, h), InvalidHError);
}

TEST(Cemetery, AdvanceReportsDeath) {
  auto m = make_wright_fisher();
  Stream rng(8, 0, "motion");
  int dead = 0;
  for (int i = 0; i < 500; ++i) {
    Point x(0.01);
    dead += !advance(m, x, 5.0, rng);
  }
  EXPECT_GT(dead, 450);
}
