#include <gtest/gtest.h>

#include <cmath>

#include "skelsim/diagnostics.hpp"

using namespace skelsim;

namespace {

const std::vector<Atom> kDelta0{{Point(0.0), 1.0}};

BatchConfig quick(Mode mode, int replicas, std::uint64_t seed) {
  BatchConfig b;
  b.mode = mode;
  b.dress.m = 0.05;
  b.dress.eps = 0.1;
  b.replicas = replicas;
  b.seed = seed;
  return b;
}

}  // namespace

TEST(VarianceOracle, ClosedFormAndNestedQuadratureAgree) {
  auto c = card("inward-ou");
  double closed = variance_oracle(c, TestFunction::constant_fn(1.0), kDelta0, 1.0);
  EXPECT_NEAR(closed, 2.0 * std::exp(1.0) * (std::exp(1.0) - 1.0), 1e-12);
  auto one = TestFunction::from_field(Field(Field::Fn([](const Point&) { return 1.0; })), "one");
  EXPECT_NEAR(variance_oracle(c, one, kDelta0, 1.0), closed, 1e-6 * closed);
  EXPECT_EQ(variance_oracle(c, TestFunction::bump(1, 0, 1), kDelta0, 0.0), 0.0);
  EXPECT_THROW(variance_oracle(card("inward-ou-heavy-tail"), one, kDelta0, 1.0), UnsupportedError);
}

TEST(VarianceOracle, MatchesSimulationForBump) {
  auto c = card("inward-ou");
  auto r = check_variance(c, TestFunction::bump(1.0, 0.0, 1.0), kDelta0, 1.0, quick(Mode::direct, 4000, 1));
  EXPECT_TRUE(r.pass) << r.estimate << " vs " << r.oracle << " z=" << r.z;
}

TEST(ManyToOne, OracleIdentities) {
  auto c = card("outward-ou");
  std::vector<Atom> mu{{Point(0.3), 2.0}};
  EXPECT_NEAR(many_to_one_oracle(c, c.phi_function(), mu, 1.7), phi_mass(c, mu), 1e-8);
  auto f = TestFunction::indicator(-1, 1);
  EXPECT_NEAR(many_to_one_oracle(c, f, mu, 0.0), 2.0, 1e-12);
  auto ic = card("inward-ou");
  double expected = std::erf(1.0 / std::sqrt(2.0 * ou_variance(1.0, 1.0)));
  EXPECT_NEAR(many_to_one_oracle(ic, f, kDelta0, 1.0), expected, 1e-9);
}

TEST(ManyToOne, SimulationWithinThreeSe) {
  auto c = card("inward-ou");
  auto reps = check_many_to_one(c, TestFunction::indicator(-1, 1), kDelta0, {0.5, 1.0}, quick(Mode::skeleton, 2000, 2));
  ASSERT_EQ(reps.size(), 4u);
  for (const auto& r : reps) EXPECT_TRUE(r.pass) << r.check << " z=" << r.z;
}

TEST(Laplace, ZeroFunctionIsExactlyOne) {
  auto c = card("inward-ou");
  auto r = check_laplace(c, TestFunction::constant_fn(0.0), kDelta0, 1.0, quick(Mode::direct, 50, 3));
  EXPECT_EQ(r.estimate, 1.0);
  EXPECT_EQ(r.oracle, 1.0);
  EXPECT_TRUE(r.pass);
}

TEST(Martingale, ConstantSeriesIsFlat) {
  std::vector<std::vector<double>> s(10, std::vector<double>{1.0, 1.0, 1.0});
  auto r = martingale_flatness(s, {1.0, 2.0, 3.0});
  EXPECT_EQ(r.estimate, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(Martingale, FlatUnderTrueRateAndFailsUnderWrongRate) {
  auto c = card("inward-ou");
  auto b = run_batch(c, kDelta0, {1.0, 2.0, 3.0}, {}, quick(Mode::skeleton, 1000, 4));
  for (const auto& r : check_martingales(b)) EXPECT_TRUE(r.pass) << r.check << " z=" << r.z;
  auto wrong = check_martingales(b, 1.1);
  EXPECT_LT(wrong[3].z, -3.0);
  EXPECT_LT(wrong.back().z, -3.0);
}

TEST(Slln, PhiGivesIdenticalStatistics) {
  auto c = card("inward-ou");
  auto b = run_batch(c, kDelta0, {1.0, 2.0}, {c.phi_function()}, quick(Mode::skeleton, 100, 5));
  auto sc = slln_curve(b, 0);
  for (double g : sc.mean_gap) EXPECT_NEAR(g, 0.0, 1e-9);
}

TEST(Extinction, EmptyInitialConditionAndReferenceCard) {
  auto c = card("inward-ou");
  auto none = extinction_frequency(c, {}, 2.0, quick(Mode::direct, 20, 6));
  EXPECT_EQ(none[0].estimate, 1.0);
  EXPECT_TRUE(none[1].pass);
  auto r = extinction_frequency(c, kDelta0, 10.0, quick(Mode::direct, 2000, 7));
  EXPECT_TRUE(r[0].pass) << r[0].estimate;
  EXPECT_TRUE(r[2].pass) << r[2].estimate << " vs " << r[2].oracle;
}

TEST(Ergodic, ShortWindowIsFarAndWrightFisherIsClose) {
  auto c = card("inward-ou");
  auto far = ergodic_occupation(c, kDelta0, 0.1, 30, 200, 8, 0.03);
  EXPECT_FALSE(far.pass);
  EXPECT_GT(far.estimate, 0.5);
  auto wf = ergodic_occupation(card("wright-fisher"), {{Point(0.5), 1.0}}, 20.0, 20, 300, 9, 0.05);
  EXPECT_TRUE(wf.pass) << wf.estimate;
}

TEST(ZScore, NullCalibration) {
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Stream rng(12, trial, "meta");
    std::vector<double> xs;
    for (int i = 0; i < 2000; ++i) xs.push_back(exact_ou_sample(1.0, true, Point(1.0), 0.5, rng)[0]);
    ok += mean_report("ou mean", xs, std::exp(-0.5)).pass;
  }
  EXPECT_GE(ok, 99);
}

TEST(LpReport, Verdicts) {
  LpCurve flat;
  flat.p = 1.5;
  flat.tail.slope = 0.01;
  flat.tail.slope_se = 0.02;
  flat.tail_z = 0.5;
  EXPECT_TRUE(lp_report(flat, true).pass);
  EXPECT_FALSE(lp_report(flat, false).pass);
}
