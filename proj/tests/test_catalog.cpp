#include <gtest/gtest.h>

#include <cmath>

#include "skelsim/catalog.hpp"

using namespace skelsim;

namespace {

const RunReport* find(const std::vector<RunReport>& v, const std::string& name) {
  for (const auto& r : v)
    if (r.check == name) return &r;
  return nullptr;
}

}  // namespace

TEST(Catalog, NamesResolveAndUnknownThrows) {
  for (const auto& n : catalog_names()) EXPECT_EQ(card(n).name, n);
  EXPECT_EQ(card("inward-ou").name, "inward-ou-quadratic");
  EXPECT_EQ(card("outward-ou").name, "outward-ou-quadratic");
  EXPECT_THROW(card("no-such-card"), UnknownNameError);
}

TEST(Catalog, GroundStateNormalization) {
  for (const auto& n : catalog_names()) {
    auto c = card(n);
    if (c.partial) continue;
    double v = domain_integral(c.motion, [&](const Point& x) { return c.stationary_density(x); });
    EXPECT_NEAR(v, 1.0, 1e-8) << n;
    EXPECT_GT(c.eigen.lambda_c, 0.0) << n;
  }
}

TEST(Catalog, ClosedFormEigendata) {
  auto in = eigendata("inward-ou");
  EXPECT_DOUBLE_EQ(in.lambda_c, 1.0);
  EXPECT_DOUBLE_EQ(in.phi.value(Point(1.7)), 1.0);
  EXPECT_NEAR(in.phi_tilde(Point(1.0)), std::exp(-1.0) / std::sqrt(M_PI), 1e-14);
  auto out = eigendata("outward-ou");
  EXPECT_DOUBLE_EQ(out.lambda_c, 1.0);
  EXPECT_NEAR(out.phi.value(Point(1.0)), std::exp(-1.0) / std::sqrt(M_PI), 1e-14);
  EXPECT_DOUBLE_EQ(out.phi_tilde(Point(3.0)), 1.0);
  auto wf = eigendata("wright-fisher");
  EXPECT_DOUBLE_EQ(wf.lambda_c, 1.0);
  EXPECT_NEAR(wf.phi.value(Point(0.25)), 6 * 0.25 * 0.75, 1e-14);
}

TEST(Catalog, MartingaleFunctions) {
  EXPECT_NEAR(martingale_function("inward-ou").value(Point(2.0)), 1.0, 1e-12);
  auto c = card("inward-ou");
  auto root = csbp_root(c.mechanism);
  ASSERT_TRUE(root);
  EXPECT_NEAR(*root, 1.0, 1e-10);
  auto w = martingale_function("unbounded-w");
  for (double x : {-1.0, 0.0, 0.5, 2.0}) EXPECT_NEAR(w.value(Point(x)), 2.0 * std::exp(x * x), 1e-10 * std::exp(x * x));
}

TEST(Catalog, UnboundedWTransformsToOutwardOu) {
  auto uw = card("unbounded-w");
  auto out = card("outward-ou");
  auto h = HFunction::gaussian(1.0, 1.0, 1);
  auto r = h_transform(uw.motion, uw.mechanism, h);
  for (const auto& x : out.motion.sample_grid(81, 4.0)) {
    EXPECT_NEAR(r.motion.drift_at(x)[0], out.motion.drift_at(x)[0], 1e-10);
    EXPECT_NEAR(r.motion.diffusion(x), out.motion.diffusion(x), 1e-10);
    EXPECT_NEAR(r.mechanism.beta(x), out.mechanism.beta(x), 1e-10);
    EXPECT_NEAR(r.mechanism.alpha(x), out.mechanism.alpha(x), 1e-10);
    EXPECT_NEAR(uw.w(x) / h.value(x), out.w(x), 1e-10);
  }
}

TEST(Validate, InwardOuPasses) {
  auto reps = validate_assumptions(card("inward-ou"));
  EXPECT_TRUE(all_pass(reps));
  auto r = find(reps, "phi-alpha-sup");
  ASSERT_NE(r, nullptr);
  EXPECT_NEAR(r->estimate, 1.0, 1e-12);
}

TEST(Validate, UnboundedWPasses) {
  auto reps = validate_assumptions(card("unbounded-w"));
  EXPECT_TRUE(all_pass(reps));
  EXPECT_NEAR(find(reps, "phi-alpha-sup")->estimate, 1.0, 1e-12);
}

TEST(Validate, JumpCardsPass) {
  for (auto n : {"inward-ou-tempered", "inward-ou-heavy-tail", "wright-fisher", "outward-ou"}) {
    auto reps = validate_assumptions(card(n));
    for (const auto& r : reps) EXPECT_TRUE(r.pass) << n << " " << r.check << " " << r.note;
  }
}

TEST(Validate, BrokenCardFailsItemOne) {
  auto c = card("inward-ou");
  c.mechanism.alpha = Field(Field::Fn([](const Point& x) { return std::exp(x.norm2()); }));
  auto reps = validate_assumptions(c);
  auto r = find(reps, "phi-alpha-sup");
  ASSERT_NE(r, nullptr);
  EXPECT_FALSE(r->pass);
}

TEST(SpineExpectation, Basics) {
  auto c = card("inward-ou");
  EXPECT_NEAR(spine_expectation(c, TestFunction::constant_fn(1.0), Point(0.3), 1.0), 1.0, 1e-12);
  EXPECT_NEAR(spine_expectation(c, TestFunction::indicator(0.0, 50.0), Point(0.0), 2.0), 0.5, 1e-10);
  double late = spine_expectation(c, TestFunction::indicator(-1.0, 1.0), Point(2.0), 40.0);
  EXPECT_NEAR(late, std::erf(1.0), 1e-10);
  auto wf = card("wright-fisher");
  EXPECT_NEAR(spine_expectation(wf, TestFunction::constant_fn(1.0), Point(0.3), 30.0), 1.0, 1e-8);
}

TEST(SpineExpectation, OutwardSpineIsInwardOu) {
  auto c = card("outward-ou");
  auto k = c.spine_kappa();
  ASSERT_TRUE(k);
  EXPECT_GT(*k, 0.0);
  double late = spine_expectation(c, TestFunction::indicator(-1.0, 1.0), Point(1.0), 40.0);
  double st = integrate([&](double x) { return c.stationary_density(Point(x)); }, -1.0, 1.0, 1e-12);
  EXPECT_NEAR(late, st, 1e-6);
}

TEST(GroundState, FeynmanKacInvariance) {
  auto c = card("outward-ou");
  double t = 0.5, lam = c.eigen.lambda_c;
  for (double x0 : {-1.5, -0.5, 0.0, 0.7, 1.2}) {
    Stream rng(11, 0, "motion");
    Accumulator a;
    for (int i = 0; i < 100000; ++i) {
      Point x(x0);
      advance(c.motion, x, t, rng);
      a.add(std::exp((c.mechanism.beta(x) - lam) * t) * c.phi(x));
    }
    double phi0 = c.phi(Point(x0));
    EXPECT_LE(std::abs(a.mean - phi0), 3.0 * a.se()) << x0;
  }
}

TEST(Conditions, InwardAndOutwardPass) {
  for (auto n : {"inward-ou", "outward-ou"}) {
    auto cc = check_slln_skeleton_conditions(card(n));
    ASSERT_FALSE(cc.t.empty());
    EXPECT_DOUBLE_EQ(cc.t.back(), 20.0);
    for (const auto& r : cc.reports) EXPECT_TRUE(r.pass) << n << " " << r.check << " " << r.estimate;
    for (std::size_t i = 0; i < cc.t.size(); ++i) EXPECT_LE(cc.support[i], cc.support_threshold[i]);
  }
}

TEST(Conditions, WrightFisherVacuous) {
  auto cc = check_slln_skeleton_conditions(card("wright-fisher"));
  EXPECT_TRUE(all_pass(cc.reports));
  EXPECT_TRUE(cc.t.empty());
}
