#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skelsim/catalog.hpp"
#include "skelsim/immigration.hpp"
#include "skelsim/mildsolver.hpp"
#include "skelsim/numerics.hpp"
#include "skelsim/parallel.hpp"
#include "skelsim/report.hpp"
#include "skelsim/spine.hpp"

namespace skelsim {

enum class Mode { direct, skeleton };

inline const char* to_string(Mode m) { return m == Mode::direct ? "direct" : "skeleton"; }

struct BatchConfig {
  Mode mode = Mode::skeleton;
  DressConfig dress;
  int replicas = 1000;
  std::uint64_t seed = 1;
  int jobs = 0;
};

// replicas of one card observed at fixed times with a list of test functions
struct Batch {
  const ExampleCard* card = nullptr;
  std::vector<Atom> mu;
  std::vector<double> times;
  std::vector<TestFunction> fs;
  BatchConfig cfg;
  std::vector<SuperRun> runs;

  std::size_t time_index(double t) const {
    for (std::size_t k = 0; k < times.size(); ++k)
      if (std::abs(times[k] - t) < 1e-12) return k;
    throw OutOfRangeError("time not observed in this batch");
  }

  // stat(observation) at time index k for every replica, optionally the first n only
  template <class F>
  std::vector<double> column(std::size_t k, F&& stat, std::size_t n = 0) const {
    if (n == 0 || n > runs.size()) n = runs.size();
    std::vector<double> v;
    v.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
      if (runs[r].outcome.truncated) throw NumericBlowupError("replica hit the particle cap");
      if (k >= runs[r].obs.size()) throw Error("replica ended before the observation time");
      v.push_back(stat(runs[r].obs[k]));
    }
    return v;
  }

  std::map<std::string, std::string> meta() const {
    std::map<std::string, std::string> m;
    m["card"] = card ? card->name : "";
    m["mode"] = to_string(cfg.mode);
    m["replicas"] = std::to_string(runs.size());
    m["seed"] = std::to_string(cfg.seed);
    m["m"] = std::to_string(cfg.dress.m);
    if (cfg.mode == Mode::skeleton) m["eps"] = std::to_string(cfg.dress.eps);
    if (!times.empty()) m["T"] = std::to_string(times.back());
    return m;
  }
};

inline Batch run_batch(const ExampleCard& c, const std::vector<Atom>& mu, const std::vector<double>& times,
                       const std::vector<TestFunction>& fs, const BatchConfig& cfg) {
  Batch b{&c, mu, times, fs, cfg, {}};
  std::sort(b.times.begin(), b.times.end());
  b.runs = parallel_map(cfg.replicas, cfg.jobs, [&](std::size_t r) {
    return cfg.mode == Mode::direct ? run_super_direct(c, mu, b.times, cfg.dress, fs, cfg.seed, r)
                                    : dress_skeleton(c, mu, b.times, cfg.dress, fs, cfg.seed, r);
  });
  return b;
}

inline double phi_mass(const ExampleCard& c, const std::vector<Atom>& mu) {
  double s = 0.0;
  for (const auto& a : mu) s += a.mass * c.phi(a.x);
  return s;
}

inline double total_mass(const std::vector<Atom>& mu) {
  double s = 0.0;
  for (const auto& a : mu) s += a.mass;
  return s;
}

// f / phi as a test function, keeping f itself when phi is identically one
inline TestFunction ratio_to_phi(const ExampleCard& c, const TestFunction& f) {
  if (c.eigen.phi.is_constant() && c.eigen.phi.value.constant() == 1.0) return f;
  Field phi = c.eigen.phi.value;
  auto g = TestFunction::from_field(Field(Field::Fn([f, phi](const Point& x) { return f(x) / phi(x); })),
                                    f.label + "/phi");
  g.cuts = f.breakpoints();
  return g;
}

inline RunReport mean_report(std::string name, const std::vector<double>& xs, double oracle,
                             std::map<std::string, std::string> meta = {}) {
  auto s = mean_se(xs);
  auto r = RunReport::z_test(std::move(name), s.mean, s.se, oracle);
  r.meta = std::move(meta);
  return r;
}

// <P^phi[(f/phi)(xi_t)], phi mu>
inline double many_to_one_oracle(const ExampleCard& c, const TestFunction& f, const std::vector<Atom>& mu, double t) {
  TestFunction g = ratio_to_phi(c, f);
  double s = 0.0;
  for (const auto& a : mu) s += a.mass * c.phi(a.x) * spine_expectation(c, g, a.x, t);
  return s;
}

// e^{-lambda t}<f, X_t> and e^{-lambda t}<(phi/w)(f/phi), Z_t> against the spine oracle;
// fi indexes f and gi indexes f/phi in the batch's test functions
inline std::vector<RunReport> check_many_to_one(const Batch& b, std::size_t fi, std::size_t gi) {
  const auto& c = *b.card;
  if (b.cfg.mode != Mode::skeleton) throw UnsupportedError("many-to-one for Z needs a skeleton batch");
  std::vector<RunReport> out;
  for (std::size_t k = 0; k < b.times.size(); ++k) {
    double t = b.times[k], damp = std::exp(-c.eigen.lambda_c * t);
    double oracle = many_to_one_oracle(c, b.fs[fi], b.mu, t);
    auto meta = b.meta();
    meta["t"] = std::to_string(t);
    meta["f"] = b.fs[fi].label;
    out.push_back(mean_report("many-to-one-X t=" + format_double(t),
                              b.column(k, [&](const Observation& o) { return damp * o.fX[fi]; }), oracle, meta));
    out.push_back(mean_report("many-to-one-Z t=" + format_double(t),
                              b.column(k, [&](const Observation& o) { return damp * o.fZ_phiw[gi]; }), oracle, meta));
  }
  return out;
}

inline std::vector<RunReport> check_many_to_one(const ExampleCard& c, const TestFunction& f,
                                                const std::vector<Atom>& mu, const std::vector<double>& times,
                                                BatchConfig cfg) {
  cfg.mode = Mode::skeleton;
  auto b = run_batch(c, mu, times, {f, ratio_to_phi(c, f)}, cfg);
  return check_many_to_one(b, 0, 1);
}

// Var<f, X_t> = int_0^t <T_s[(2 alpha + int y^2 Pi)(T_{t-s} f)^2], mu> ds for a
// constant mechanism over an OU or Brownian motion in d = 1
inline double variance_oracle(const ExampleCard& c, const TestFunction& f, const std::vector<Atom>& mu, double t) {
  const auto& mech = c.mechanism;
  if (!mech.is_constant()) throw UnsupportedError("variance oracle needs a spatially constant mechanism");
  if (c.motion.dim != 1 || (c.motion.exact != ExactSampler::ou && c.motion.exact != ExactSampler::brownian))
    throw UnsupportedError("variance oracle needs an OU or Brownian motion in d = 1");
  Point o;
  double a2 = 2.0 * mech.alpha(o);
  if (!mech.pi.is_zero()) {
    double m2 = mech.pi.power_integral(o, 2.0, 0.0);
    if (!std::isfinite(m2)) throw UnsupportedError("Levy measure without a second moment");
    a2 += m2;
  }
  double beta = mech.beta(o), mass = total_mass(mu);
  if (t <= 0.0 || mass == 0.0) return 0.0;
  if (f.kind == TestFunction::Kind::constant) {
    double v = f.amp * f.amp * a2 * mass;
    return std::abs(beta) < 1e-12 ? v * t : v * std::exp(beta * t) * std::expm1(beta * t) / beta;
  }
  double k = c.motion.exact == ExactSampler::ou ? c.motion.kappa : 0.0, a = c.motion.diffusion.constant();
  auto semigroup = [&](double tau, double y) {
    return std::exp(beta * tau) * gaussian_average(f, ou_mean_factor(k, tau) * y, ou_variance(k, tau, a));
  };
  double total = 0.0;
  for (const auto& at : mu) {
    double x = at.x[0];
    auto inner = [&](double s) {
      double mean = ou_mean_factor(k, s) * x, var = ou_variance(k, s, a);
      double sd = std::sqrt(var);
      if (sd < 1e-9) return std::exp(beta * s) * a2 * std::pow(semigroup(t - s, mean), 2);
      auto g = [&](double y) { return std::pow(semigroup(t - s, y), 2) * normal_pdf((y - mean) / sd) / sd; };
      return std::exp(beta * s) * a2 * integrate(g, mean - 10.0 * sd, mean + 10.0 * sd, 1e-9);
    };
    total += at.mass * integrate(inner, 0.0, t, 1e-8);
  }
  return total;
}

inline RunReport check_variance(const Batch& b, std::size_t fi, double t, double oracle) {
  auto xs = b.column(b.time_index(t), [&](const Observation& o) { return o.fX[fi]; });
  auto v = variance_se(xs);
  auto r = RunReport::z_test("variance t=" + format_double(t), v.var, v.se, oracle);
  r.meta = b.meta();
  r.meta["f"] = b.fs[fi].label;
  return r;
}

inline RunReport check_variance(const ExampleCard& c, const TestFunction& f, const std::vector<Atom>& mu, double t,
                                BatchConfig cfg) {
  double oracle = variance_oracle(c, f, mu, t);
  cfg.mode = Mode::direct;
  return check_variance(run_batch(c, mu, {t}, {f}, cfg), 0, t, oracle);
}

inline double laplace_oracle(const ExampleCard& c, const TestFunction& f, const std::vector<Atom>& mu, double t,
                             const MildGrid& grid = {}) {
  if (f.kind == TestFunction::Kind::constant && f.amp == 0.0) return 1.0;
  auto sol = solve_mild(c.mechanism, c.motion, f, t, grid);
  return laplace_functional(sol, mu, t);
}

inline RunReport check_laplace(const Batch& b, std::size_t fi, double t, double oracle) {
  auto xs = b.column(b.time_index(t), [&](const Observation& o) { return std::exp(-o.fX[fi]); });
  auto r = mean_report(std::string("laplace-") + to_string(b.cfg.mode) + " f=" + b.fs[fi].label, xs, oracle, b.meta());
  r.meta["t"] = std::to_string(t);
  return r;
}

inline RunReport check_laplace(const ExampleCard& c, const TestFunction& f, const std::vector<Atom>& mu, double t,
                               const BatchConfig& cfg, const MildGrid& grid = {}) {
  double oracle = laplace_oracle(c, f, mu, t, grid);
  return check_laplace(run_batch(c, mu, {t}, {f}, cfg), 0, t, oracle);
}

// regression slope of E[W_t] on t through per-replica slopes, tested against 0
inline RunReport martingale_flatness(const std::vector<std::vector<double>>& series, const std::vector<double>& times,
                                     std::string name = "martingale-flatness") {
  std::vector<double> slopes;
  slopes.reserve(series.size());
  for (const auto& s : series) slopes.push_back(fit_line(times, s).slope);
  return mean_report(std::move(name), slopes, 0.0);
}

// E[W_t] = <phi, mu> at each time and flatness, for W^phi(X) and, in
// skeleton batches, W^{phi/w}(Z); lambda_scale perturbs lambda_c
inline std::vector<RunReport> check_martingales(const Batch& b, double lambda_scale = 1.0) {
  const auto& c = *b.card;
  double target = phi_mass(c, b.mu), shift = (lambda_scale - 1.0) * c.eigen.lambda_c;
  std::vector<RunReport> out;
  auto one = [&](const char* label, double Observation::*field) {
    std::vector<std::vector<double>> series(b.runs.size(), std::vector<double>(b.times.size()));
    for (std::size_t k = 0; k < b.times.size(); ++k) {
      double corr = std::exp(-shift * b.times[k]);
      auto col = b.column(k, [&](const Observation& o) { return corr * (o.*field); });
      for (std::size_t r = 0; r < col.size(); ++r) series[r][k] = col[r];
      auto rep = mean_report(std::string(label) + " mean t=" + format_double(b.times[k]), col, target, b.meta());
      out.push_back(rep);
    }
    auto flat = martingale_flatness(series, b.times, std::string(label) + " flatness");
    flat.meta = b.meta();
    out.push_back(flat);
  };
  one("W_X", &Observation::W_X);
  if (b.cfg.mode == Mode::skeleton) one("W_Z", &Observation::W_Z);
  return out;
}

// corr(W^phi(X), W^{phi/w}(Z)) and mean |difference| at time t over the first n replicas
inline std::vector<RunReport> check_coupling(const Batch& b, double t, std::size_t n, double min_corr = 0.95,
                                             double max_gap = 0.1) {
  if (b.cfg.mode != Mode::skeleton) throw UnsupportedError("coupling needs a skeleton batch");
  std::size_t k = b.time_index(t);
  auto wx = b.column(k, [](const Observation& o) { return o.W_X; }, n);
  auto wz = b.column(k, [](const Observation& o) { return o.W_Z; }, n);
  double gap = 0.0;
  for (std::size_t i = 0; i < wx.size(); ++i) gap += std::abs(wx[i] - wz[i]);
  gap /= double(wx.size());
  auto r1 = RunReport::at_least("coupling corr t=" + format_double(t), correlation(wx, wz), min_corr);
  auto r2 = RunReport::at_most("coupling mean-gap t=" + format_double(t), gap, max_gap);
  r1.meta = r2.meta = b.meta();
  r1.meta["replicas"] = r2.meta["replicas"] = std::to_string(wx.size());
  return {r1, r2};
}

struct SllnCurve {
  std::vector<double> t, mean_gap, corr;
  std::vector<RunReport> reports;
};

// R_t = e^{-lambda t}<f, X_t>/<f, phi~> against W_t^phi(X), plus the ratio form
// <f, X_t>/E<f, X_t> against W_t/<phi, mu>
inline SllnCurve slln_curve(const Batch& b, std::size_t fi, std::size_t n = 0, double min_corr = 0.95,
                            double max_gap_fraction = 0.1) {
  const auto& c = *b.card;
  const auto& f = b.fs[fi];
  double ft = domain_integral(c.motion, [&](const Point& y) { return f(y) * c.eigen.phi_tilde(y); });
  if (!(ft > 0.0)) throw ConfigError("slln curve needs <f, phi~> > 0");
  double pm = phi_mass(c, b.mu);
  SllnCurve sc;
  std::vector<double> R, W;
  for (std::size_t k = 0; k < b.times.size(); ++k) {
    double t = b.times[k], damp = std::exp(-c.eigen.lambda_c * t);
    R = b.column(k, [&](const Observation& o) { return damp * o.fX[fi] / ft; }, n);
    W = b.column(k, [](const Observation& o) { return o.W_X; }, n);
    double gap = 0.0;
    for (std::size_t i = 0; i < R.size(); ++i) gap += std::abs(R[i] - W[i]);
    sc.t.push_back(t);
    sc.mean_gap.push_back(gap / double(R.size()));
    sc.corr.push_back(correlation(R, W));
  }
  double T = sc.t.back();
  auto meta = b.meta();
  meta["f"] = f.label;
  meta["replicas"] = std::to_string(R.size());
  auto r1 = RunReport::at_least("slln corr(R,W) t=" + format_double(T), sc.corr.back(), min_corr);
  auto r2 = RunReport::at_most("slln mean|R-W| t=" + format_double(T), sc.mean_gap.back(), max_gap_fraction * pm);
  auto r3 = RunReport::info("slln mean|R-W| trend", fit_line(sc.t, sc.mean_gap).slope, "slope over the time grid");
  double mean_fx = many_to_one_oracle(c, f, b.mu, T) * std::exp(c.eigen.lambda_c * T), ratio_gap = 0.0;
  auto fx = b.column(b.times.size() - 1, [&](const Observation& o) { return o.fX[fi]; }, n);
  for (std::size_t i = 0; i < fx.size(); ++i) ratio_gap += std::abs(fx[i] / mean_fx - W[i] / pm);
  auto r4 = RunReport::info("slln ratio-form mean gap t=" + format_double(T), ratio_gap / double(fx.size()),
                            "<f,X_t>/E<f,X_t> against W_t/<phi,mu>");
  for (auto* r : {&r1, &r2, &r3, &r4}) r->meta = meta;
  sc.reports = {r1, r2, r3, r4};
  return sc;
}

// extinction probability of one mass particle of the approximation when the
// mechanism is constant and quadratic with positive growth
inline std::optional<double> particle_extinction_q(const MassModel& mm) {
  if (!mm.constant || !mm.mech.pi.is_zero()) return std::nullopt;
  Point o;
  double ae = std::max(mm.alpha_eff(o), 0.0), beta = mm.mech.beta(o);
  if (!(beta > 0.0) || ae <= 0.0) return std::nullopt;
  return ae / (ae + beta * mm.m);
}

// frequency of zero mass at T against exp(-z* <1, mu>), and the finite-time
// identity E[exp(-<w, X_t>)] = exp(-<w, mu>) at t_w
inline std::vector<RunReport> extinction_frequency(const ExampleCard& c, const std::vector<Atom>& mu, double T,
                                                   BatchConfig cfg, double tolerance = 0.015, double t_w = 1.0) {
  auto root = csbp_root(c.mechanism);
  if (!root) throw UnsupportedError("extinction oracle needs a spatially constant supercritical mechanism");
  double oracle = std::exp(-*root * total_mass(mu));
  cfg.mode = Mode::direct;
  MassModel mm = direct_model(c, cfg.dress);
  if (auto q = particle_extinction_q(mm)) {
    double lq = std::log(*q);
    cfg.dress.engine.stop = [lq](double, std::size_t n, std::size_t) { return double(n) * lq < std::log(1e-9); };
  }
  TestFunction w = TestFunction::from_field(c.eigen.w.value, "w");
  std::vector<double> times{std::min(t_w, T), T};
  if (t_w >= T) times = {T};
  auto b = run_batch(c, mu, times, {w}, cfg);
  std::vector<double> dead, lap;
  for (const auto& r : b.runs) {
    if (r.outcome.truncated) throw NumericBlowupError("replica hit the particle cap");
    bool alive = r.outcome.stopped || r.obs.size() < b.times.size() || r.obs.back().n_mass > 0;
    dead.push_back(alive ? 0.0 : 1.0);
    lap.push_back(r.obs.empty() ? 0.0 : std::exp(-r.obs.front().fX[0]));
  }
  auto s = mean_se(dead);
  auto r1 = RunReport::z_test("extinction frequency T=" + format_double(T), s.mean, s.se, oracle);
  auto r2 = RunReport::at_most("extinction |freq - exp(-z* <1,mu>)|", std::abs(s.mean - oracle), tolerance);
  double wmu = 0.0;
  for (const auto& a : mu) wmu += a.mass * c.w(a.x);
  auto r3 = mean_report("martingale-function identity t=" + format_double(times.front()), lap, std::exp(-wmu));
  for (auto* r : {&r1, &r2, &r3}) {
    r->meta = b.meta();
    r->meta["z*"] = std::to_string(*root);
  }
  r2.oracle = oracle;
  return {r1, r2, r3};
}

// L1 distance between the late-window spine occupation and phi phi~
inline RunReport ergodic_occupation(const ExampleCard& c, const std::vector<Atom>& mu, double T, int bins,
                                    int replicas, std::uint64_t seed, double threshold, int jobs = 0,
                                    SpineConfig sc = {}) {
  double lo, hi;
  if (c.motion.domain == DomainKind::unit_interval) {
    lo = 0.0;
    hi = 1.0;
  } else if (auto k = c.spine_kappa(); k && *k > 0.0) {
    double sd = std::sqrt(c.spine_motion().diffusion.constant() / (2.0 * *k));
    lo = -6.0 * sd;
    hi = 6.0 * sd;
  } else {
    throw UnsupportedError("ergodic occupation needs a positive recurrent spine");
  }
  auto traces = run_spines(c, mu, T, replicas, seed, sc, jobs);
  auto h = occupation_histogram(traces, lo, hi, bins, 0.5 * T);
  double d = occupation_l1(h, lo, hi, [&](double y) { return c.stationary_density(Point(y)); });
  auto r = RunReport::at_most("ergodic occupation L1 T=" + format_double(T), d, threshold);
  r.meta["card"] = c.name;
  r.meta["T"] = std::to_string(T);
  r.meta["replicas"] = std::to_string(replicas);
  r.meta["seed"] = std::to_string(seed);
  r.meta["bins"] = std::to_string(bins);
  return r;
}

// slope test on the tail of an L^p curve: bounded expects |z| <= 3, diverging expects z > 3
inline RunReport lp_report(const LpCurve& cv, bool expect_bounded) {
  std::string name = "lp p=" + format_double(cv.p) + (expect_bounded ? " tail slope" : " tail growth");
  RunReport r = expect_bounded ? RunReport::z_test(name, cv.tail.slope, cv.tail.slope_se, 0.0)
                               : RunReport::at_least(name, cv.tail_z, 3.0);
  r.oracle = 0.0;
  r.z = cv.tail_z;
  r.se = cv.tail.slope_se;
  r.meta["sup"] = std::to_string(cv.sup);
  r.meta["tail_from"] = std::to_string(cv.tail_from);
  return r;
}

}  // namespace skelsim
