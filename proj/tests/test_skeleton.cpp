#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "skelsim/numerics.hpp"
#include "skelsim/parallel.hpp"
#include "skelsim/skeleton.hpp"

using namespace skelsim;

TEST(InitSkeleton, PoissonMean) {
  Stream rng(1, 0, "init");
  Accumulator a;
  for (int i = 0; i < 100000; ++i) a.add(init_skeleton({{Point(0.0), 1.0}}, Field(1.0), rng).particles.size());
  EXPECT_NEAR(a.mean, 1.0, 3 * a.se());
  EXPECT_TRUE(init_skeleton({}, Field(1.0), rng).particles.empty());
}

TEST(InitSkeleton, SpatialIntensity) {
  auto w = martingale_function("unbounded-w").value;
  Stream rng(2, 0, "init");
  Accumulator a;
  for (int i = 0; i < 100000; ++i)
    a.add(init_skeleton({{Point(0.0), 2.0}, {Point(1.0), 1.0}}, w, rng).particles.size());
  EXPECT_NEAR(a.mean, 4.0 + 2.0 * std::exp(1.0), 3 * a.se());
}

TEST(RunSkeleton, ZeroHorizonIsInitialState) {
  auto c = card("inward-ou");
  for (int r = 0; r < 50; ++r) {
    auto run = run_skeleton(c, {{Point(0.3), 2.0}}, {0.0}, 3, r);
    ASSERT_EQ(run.snapshots.size(), 1u);
    EXPECT_EQ(run.snapshots[0].positions.size(), run.outcome.initial_skeleton);
    for (const auto& x : run.snapshots[0].positions) EXPECT_DOUBLE_EQ(x[0], 0.3);
  }
}

TEST(RunSkeleton, YuleMean) {
  auto c = card("inward-ou");
  auto counts = parallel_map(10000, 0, [&](std::size_t r) {
    return static_cast<double>(run_skeleton(c, {{Point(0.0), 1.0}}, {2.0}, 4, r).final_count);
  });
  auto s = mean_se(counts);
  EXPECT_NEAR(s.mean, std::exp(2.0), 3 * s.se);
}

TEST(RunSkeleton, PopulationAccounting) {
  auto c = card("inward-ou-tempered");
  EngineConfig cfg;
  cfg.record_events = true;
  for (int r = 0; r < 20; ++r) {
    auto run = run_skeleton(c, {{Point(0.0), 1.0}}, {2.5}, 5, r, cfg);
    long n = static_cast<long>(run.outcome.initial_skeleton);
    for (const auto& e : run.outcome.branch_log) {
      EXPECT_GE(e.offspring, 2);
      n += e.offspring - 1;
    }
    EXPECT_EQ(static_cast<long>(run.final_count), n);
  }
}

TEST(RunSkeleton, InterBranchTimesExponential) {
  auto c = card("inward-ou");
  EngineConfig cfg;
  cfg.record_events = true;
  auto gaps = parallel_map(4000, 0, [&](std::size_t r) {
    std::vector<double> g;
    auto run = run_skeleton(c, {{Point(0.0), 1.0}}, {9.0}, 6, r, cfg);
    for (const auto& e : run.outcome.branch_log)
      if (e.birth < 1.0) g.push_back(e.t - e.birth);
    return g;
  });
  std::vector<double> all;
  for (auto& g : gaps) all.insert(all.end(), g.begin(), g.end());
  ASSERT_GT(all.size(), 8000u);
  double d = ks_statistic(all, [](double x) { return -std::expm1(-x); });
  EXPECT_GT(kolmogorov_pvalue(d, all.size()), 0.01);
}

TEST(RunSkeleton, ManyToOne) {
  auto c = card("inward-ou");
  auto g = TestFunction::indicator(0.0, 1e300);
  auto vals = parallel_map(10000, 0, [&](std::size_t r) {
    auto run = run_skeleton(c, {{Point(0.0), 1.0}}, {1.0}, 7, r);
    double s = 0.0;
    for (const auto& x : run.snapshots[0].positions) s += c.phi(x) / c.w(x) * g(x);
    return std::exp(-1.0) * s;
  });
  auto s = mean_se(vals);
  double oracle = spine_expectation(c, g, Point(0.0), 1.0) * c.phi(Point(0.0));
  EXPECT_NEAR(s.mean, oracle, 3 * s.se);
}

TEST(RunSkeleton, MartingaleMeanAndGrowth) {
  auto c = card("inward-ou");
  std::vector<double> ts{5, 6, 7, 8, 9, 10};
  auto runs = parallel_map(300, 0, [&](std::size_t r) {
    std::vector<double> w;
    EngineConfig cfg;
    Engine e;
    e.skeleton = skeleton_model(c);
    auto res = e.run({{Point(0.0), 1.0}}, ts, 8, r, [&](const Snapshot& s) { return martingale_Z(s, c); });
    return res.records;
  });
  std::vector<double> logmean;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    Accumulator a;
    for (const auto& r : runs) a.add(r[k]);
    EXPECT_NEAR(a.mean, 1.0, 3.5 * a.se()) << ts[k];
    logmean.push_back(std::log(a.mean) + c.eigen.lambda_c * ts[k]);
  }
  auto fit = fit_line(ts, logmean);
  EXPECT_NEAR(fit.slope, c.eigen.lambda_c, 0.05 * c.eigen.lambda_c);
}

TEST(RunSkeleton, UnboundedWCardRuns) {
  auto c = card("unbounded-w");
  auto vals = parallel_map(4000, 0, [&](std::size_t r) {
    Engine e;
    e.skeleton = skeleton_model(c);
    auto res = e.run({{Point(0.0), 1.0}}, {1.0}, 9, r, [&](const Snapshot& s) { return martingale_Z(s, c); });
    return res.records[0];
  });
  auto s = mean_se(vals);
  EXPECT_NEAR(s.mean, c.phi(Point(0.0)), 3 * s.se);
}

TEST(RunSkeleton, Deterministic) {
  auto c = card("inward-ou-tempered");
  auto a = run_skeleton(c, {{Point(0.0), 1.0}}, {1.0, 2.0}, 10, 3);
  auto b = run_skeleton(c, {{Point(0.0), 1.0}}, {1.0, 2.0}, 10, 3);
  ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    ASSERT_EQ(a.snapshots[k].positions.size(), b.snapshots[k].positions.size());
    for (std::size_t i = 0; i < a.snapshots[k].positions.size(); ++i)
      EXPECT_EQ(a.snapshots[k].positions[i][0], b.snapshots[k].positions[i][0]);
  }
}

TEST(Thinning, ViolationRestartsReplica) {
  auto c = card("inward-ou");
  Engine e;
  e.skeleton = skeleton_model(c);
  e.skeleton->bound = 0.25;
  auto res = e.run({{Point(0.0), 1.0}}, {1.0}, 11, 0, [](const Snapshot& s) { return s.Z->size(); });
  EXPECT_GT(res.outcome.restarts, 0);
}
