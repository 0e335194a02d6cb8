#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "skelsim/mechanism.hpp"

using namespace skelsim;

namespace {

BranchingMechanism quadratic(double beta, double alpha) { return {Field(beta), Field(alpha), LevyKernel::none()}; }

// midpoint rule in u = log y over (0, 1e3) with n nodes; y^{-1-a} makes a uniform
// grid in y useless near zero, so the nodes are log-spaced
template <class F>
double riemann_log(F&& f, double lo = 1e-12, double hi = 1e3, std::size_t n = 10'000'000) {
  double a = std::log(lo), b = std::log(hi), h = (b - a) / double(n), s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double y = std::exp(a + (double(i) + 0.5) * h);
    s += f(y) * y;
  }
  return s * h;
}

double tempered_density(double y, double a, double b, double c) { return c * std::pow(y, -1.0 - a) * std::exp(-b * y); }

}  // namespace

TEST(PsiEval, QuadraticClosedForms) {
  auto m = quadratic(1.0, 1.0);
  EXPECT_DOUBLE_EQ(psi_eval(m, Point(0.0), 0.0), 0.0);
  EXPECT_DOUBLE_EQ(psi_eval(m, Point(0.0), 2.0), 2.0);
}

TEST(PsiEval, TemperedMatchesRiemannOracle) {
  BranchingMechanism m{Field(1.0), Field(0.0), LevyKernel::tempered(0.5, 1.0, 1.0)};
  double oracle = -1.0 + riemann_log([](double y) { return (std::exp(-y) - 1.0 + y) * tempered_density(y, 0.5, 1.0, 1.0); });
  EXPECT_NEAR(psi_eval(m, Point(0.0), 1.0), oracle, 1e-6);
  EXPECT_NEAR(m.psi(Point(0.0), 1.0), oracle, 1e-6);
}

TEST(PsiEval, ClosedFormAgreesWithQuadratureAcrossRegimes) {
  for (auto k : {LevyKernel::tempered(0.3, 2.0, 0.7), LevyKernel::tempered(0.9, 0.5, 1.0), LevyKernel::tempered(1.5, 1.0, 1.0),
                 LevyKernel::tempered(1.7, 0.0, 1.0)}) {
    BranchingMechanism m{Field(1.0), Field(0.5), k};
    for (double z : {1e-6, 1e-3, 0.05, 0.7, 3.0, 40.0}) {
      double q = psi_eval(m, Point(0.0), z), c = m.psi(Point(0.0), z);
      EXPECT_NEAR(c, q, 1e-8 * std::max(1.0, std::abs(q))) << "a=" << k.a << " z=" << z;
      EXPECT_NEAR(m.dpsi0(Point(0.0), z), 2.0 * 0.5 * z + k.dlaplace_quadrature(Point(0.0), z),
                  1e-8 * std::max(1.0, m.dpsi0(Point(0.0), z)));
    }
  }
}

TEST(PsiEval, Psi0NonnegativeIncreasingConvex) {
  Stream rng(5, 0, "psi");
  BranchingMechanism m{Field(Field::Fn([](const Point& x) { return 1.0 + x[0]; })),
                       Field(Field::Fn([](const Point& x) { return 0.2 + x[0] * x[0]; })), LevyKernel::tempered(0.7, 1.0, 1.0)};
  for (int i = 0; i < 200; ++i) {
    Point x(rng.uniform() * 2 - 1);
    double z = 5.0 * rng.uniform(), h = 1e-3;
    double f0 = m.psi0(x, z), fm = m.psi0(x, std::max(0.0, z - h)), fp = m.psi0(x, z + h);
    EXPECT_GE(f0, 0.0);
    EXPECT_GE(fp, f0);
    if (z > h) {
      EXPECT_GE(fp + fm - 2.0 * f0, -1e-12);
    }
  }
}

TEST(SkeletonOffspring, QuadraticIsDyadicWithRateAlphaW) {
  auto m = quadratic(1.0, 1.0);
  auto law = skeleton_offspring(m, 1.0, Point(0.0));
  EXPECT_DOUBLE_EQ(law.q, 1.0);
  EXPECT_DOUBLE_EQ(law.p[2], 1.0);
  EXPECT_TRUE(law.is_dyadic());
  auto law2 = skeleton_offspring(quadratic(3.0, 0.5), 2.5, Point(0.0));
  EXPECT_NEAR(law2.q, 0.5 * 2.5, 1e-14);
  EXPECT_NEAR(law2.p[2], 1.0, 1e-14);
}

TEST(SkeletonOffspring, TemperedNormalizationGeneratorAndMean) {
  BranchingMechanism m{Field(1.0), Field(1.0), LevyKernel::tempered(0.7, 1.0, 1.0)};
  Point x(0.0);
  double w = *csbp_root(m);
  auto law = skeleton_offspring(m, w, x);
  EXPECT_NEAR(law.total(), 1.0, 1e-9);
  for (int k = 0; k <= law.K; ++k) EXPECT_GE(law.p[k], 0.0);
  EXPECT_EQ(law.p[0], 0.0);
  EXPECT_EQ(law.p[1], 0.0);
  Stream rng(11, 0, "g");
  for (int i = 0; i < 20; ++i) {
    double s = rng.uniform();
    double rhs = (psi0_eval(m, x, w * (1.0 - s)) - (1.0 - s) * psi0_eval(m, x, w)) / w;
    EXPECT_NEAR(law.q * law.generator(s), rhs, 1e-7) << "s=" << s;
  }
  EXPECT_NEAR(law.q * (law.mean() - 1.0), psi0_eval(m, x, w) / w, 1e-9);
}

TEST(SkeletonOffspring, DegenerateSiteThrows) {
  EXPECT_THROW(skeleton_offspring(quadratic(1.0, 0.0), 1.0, Point(0.0)), DegenerateSiteError);
  EXPECT_THROW(skeleton_offspring(quadratic(1.0, 1.0), 0.0, Point(0.0)), DegenerateSiteError);
}

TEST(SkeletonOffspring, SamplerMatchesTable) {
  BranchingMechanism m{Field(1.0), Field(0.2), LevyKernel::tempered(0.7, 0.2, 3.0)};
  double w = *csbp_root(m);
  auto law = skeleton_offspring(m, w, Point(0.0));
  Stream rng(2, 0, "k");
  std::vector<int> counts(6, 0);
  int n = 200000;
  for (int i = 0; i < n; ++i) {
    int k = law.sample(rng);
    if (k < 6) ++counts[k];
  }
  for (int k = 2; k < 6; ++k) {
    double se = std::sqrt(law.p[k] * (1 - law.p[k]) / n);
    EXPECT_NEAR(counts[k] / double(n), law.p[k], 4 * se + 1e-12);
  }
}

TEST(StarTransform, QuadraticArithmetic) {
  auto s = star_transform(quadratic(1.0, 1.0), Field(1.0));
  EXPECT_DOUBLE_EQ(s.beta_star(Point(0.0)), -1.0);
  auto s0 = star_transform(quadratic(1.0, 1.0), Field(1e-12));
  EXPECT_NEAR(s0.beta_star(Point(0.0)), 1.0, 1e-11);
}

TEST(StarTransform, TemperedMatchesRiemannOracle) {
  BranchingMechanism m{Field(1.0), Field(0.0), LevyKernel::tempered(0.5, 1.0, 1.0)};
  double oracle = 1.0 - riemann_log([](double y) { return (1.0 - std::exp(-y)) * y * tempered_density(y, 0.5, 1.0, 1.0); });
  auto s = star_transform(m, Field(1.0));
  EXPECT_NEAR(s.beta_star(Point(0.0)), oracle, 1e-6);
  EXPECT_NEAR(beta_star_quadrature(m, 1.0, Point(0.0)), oracle, 1e-6);
}

TEST(StarTransform, ShiftIdentityAndOrdering) {
  BranchingMechanism m{Field(1.3), Field(0.4), LevyKernel::tempered(0.7, 1.0, 1.0)};
  for (double w : {0.3, 1.0, 2.2}) {
    auto s = star_transform(m, Field(w));
    auto ms = s.as_mechanism();
    Point x(0.0);
    EXPECT_LE(s.beta_star(x), m.beta(x));
    for (double z : {0.01, 0.5, 4.0}) {
      double lhs = psi_eval(ms, x, z);
      double rhs = psi_eval(m, x, z + w) - psi_eval(m, x, w);
      EXPECT_NEAR(lhs, rhs, 1e-8 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST(CsbpRoot, QuadraticAndSubcritical) {
  EXPECT_NEAR(*csbp_root(quadratic(1.0, 1.0)), 1.0, 1e-12);
  EXPECT_NEAR(*csbp_root(quadratic(3.0, 0.5)), 6.0, 1e-11);
  EXPECT_FALSE(csbp_root(quadratic(-1.0, 1.0)).has_value());
}

TEST(CsbpRoot, TemperedMatchesGridScanOracle) {
  BranchingMechanism m{Field(1.0), Field(1.0), LevyKernel::tempered(0.7, 1.0, 1.0)};
  // scan psi (by quadrature) on a 1e6-point grid of [0, 2], then bisect the sign-change cell
  auto psi = [&](double z) { return -z + z * z + m.pi.laplace(Point(0.0), z); };
  const int n = 1'000'000;
  double h = 2.0 / n, lo = 0.0, hi = 0.0;
  for (int i = 1; i <= n; ++i) {
    if (psi(i * h) > 0.0) {
      lo = (i - 1) * h;
      hi = i * h;
      break;
    }
  }
  ASSERT_GT(hi, 0.0);
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    (psi_eval(m, Point(0.0), mid) <= 0.0 ? lo : hi) = mid;
  }
  EXPECT_NEAR(*csbp_root(m), 0.5 * (lo + hi), 1e-9);
}

TEST(CsbpRoot, LinearGrowthWithoutRoot) {
  BranchingMechanism m{Field(5.0), Field(0.0), LevyKernel::tempered(0.5, 1.0, 1.0)};
  EXPECT_FALSE(csbp_root(m).has_value());
}

TEST(GreyCheck, Quadratic) {
  auto g = grey_check(quadratic(1.0, 1.0));
  EXPECT_EQ(g.result, GreyResult::satisfied);
  // int_2^inf dz/(z^2 - z) = log 2
  EXPECT_NEAR(g.integral, std::log(2.0), 1e-6);
}

TEST(GreyCheck, LinearTailViolates) {
  // alpha = 0 and a jump measure with finite mean: psi grows only linearly
  BranchingMechanism m{Field(1.0), Field(0.0), LevyKernel::tempered(0.5, 1.0, 2.0)};
  auto g = grey_check(m);
  EXPECT_EQ(g.result, GreyResult::violated);
  double z0 = *csbp_root(m) + 1.0;
  auto inv = [&](double z) { return 1.0 / psi_eval(m, Point(0.0), z); };
  double i4 = 0, i8 = 0;
  for (double a = z0; a < 1e4; a *= 10) i4 += integrate(inv, a, std::min(a * 10, 1e4));
  for (double a = z0; a < 1e8; a *= 10) i8 += integrate(inv, a, std::min(a * 10, 1e8));
  EXPECT_GT(i8 - i4, 1.0);  // grows like log z
}

TEST(GreyCheck, NoBranchingIsNotApplicable) {
  EXPECT_EQ(grey_check(quadratic(1.0, 0.0)).result, GreyResult::not_applicable);
}

TEST(LevyKernel, HeavyTailSuperlinearGrey) {
  BranchingMechanism m{Field(1.0), Field(0.0), LevyKernel::tempered(1.7, 0.0, 1.0)};
  EXPECT_TRUE(csbp_root(m).has_value());
  EXPECT_EQ(grey_check(m).result, GreyResult::satisfied);
}

TEST(LevyKernel, SizeBiasedSamplerMoments) {
  auto k = LevyKernel::tempered(0.7, 1.0, 1.0);
  Stream rng(4, 0, "y");
  Point x(0.0);
  for (double power : {1.0, 2.0, 3.0}) {
    // E[Y] under density y^power e^{-wy} Pi(dy) equals the ratio of power integrals
    double w = 0.8, cut = 0.05;
    double expect = k.power_integral(x, power + 1, w, cut) / k.power_integral(x, power, w, cut);
    Accumulator a;
    for (int i = 0; i < 100000; ++i) a.add(k.sample_power(x, power, w, cut, rng));
    EXPECT_NEAR(a.mean, expect, 4 * a.se()) << power;
  }
  auto h = LevyKernel::tempered(1.7, 0.0, 1.0);
  Accumulator a;
  for (int i = 0; i < 100000; ++i) a.add(std::min(h.sample_power(x, 1.0, 1.0, 0.01, rng), 1e6));
  double expect = h.power_integral(x, 2.0, 1.0, 0.01) / h.power_integral(x, 1.0, 1.0, 0.01);
  EXPECT_NEAR(a.mean, expect, 4 * a.se());
}

TEST(LevyKernel, PowerIntegralsMatchQuadrature) {
  auto k = LevyKernel::tempered(0.7, 1.0, 1.3);
  k.scale = Field(1.7);
  k.tilt = Field(0.4);
  Point x(0.0);
  for (double power : {0.0, 1.0, 2.0, 2.5}) {
    for (auto [lo, hi] : {std::pair{0.1, 1.0}, std::pair{1.0, 1e300}, std::pair{0.05, 1e300}}) {
      double hi2 = hi > 1e200 ? std::numeric_limits<double>::infinity() : hi;
      double q = integrate([&](double u) {
        double y = std::exp(u);
        return std::pow(y, power) * std::exp(-0.2 * y) * k.density(x, y) * y;
      }, std::log(lo), std::isinf(hi2) ? std::log(200.0) : std::log(hi2), 1e-12);
      EXPECT_NEAR(k.power_integral(x, power, 0.2, lo, hi2), q, 1e-8 * std::max(1.0, q));
    }
  }
}
