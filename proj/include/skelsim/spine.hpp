#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "skelsim/catalog.hpp"
#include "skelsim/errors.hpp"
#include "skelsim/numerics.hpp"
#include "skelsim/parallel.hpp"
#include "skelsim/particles.hpp"
#include "skelsim/rng.hpp"

namespace skelsim {

struct SpineConfig {
  double dt = 0.05;       // path recording step
  double cutoff = 1e-3;   // D^m masses below this enter through their mean
  double box = 6.0;       // range of the grid supremum for thinning bounds
  double safety = 2.0;
  int max_restarts = 20;
};

// spine path on a time grid, the continuous-immigration clock D^n and the
// discontinuous clock D^m with masses I^m; comp[k] is the compensator of
// D^m masses below the cutoff up to path time t[k]
struct SpineTrace {
  std::vector<double> t;
  std::vector<Point> path;
  std::vector<double> Dn;
  std::vector<Point> Dn_x;
  std::vector<double> Dm, Im;
  std::vector<Point> Dm_x;
  std::vector<double> comp;
  double phi_mu = 0.0;
  double horizon = 0.0;
  double p = 2.0;
  int restarts = 0;
  bool killed = false;
};

namespace detail {

inline Point spine_start(const ExampleCard& c, const std::vector<Atom>& mu, Stream& rng, double& phi_mu) {
  phi_mu = 0.0;
  for (const auto& a : mu) phi_mu += a.mass * c.phi(a.x);
  if (!(phi_mu > 0.0)) throw ConfigError("spine start needs <phi, mu> > 0");
  double u = rng.uniform() * phi_mu;
  for (const auto& a : mu) {
    double w = a.mass * c.phi(a.x);
    if (u < w) return a.x;
    u -= w;
  }
  return mu.back().x;
}

inline double spine_rate_n(const ExampleCard& c, const Point& x) { return 2.0 * c.mechanism.alpha(x); }

inline double spine_rate_m(const ExampleCard& c, const Point& x, double cutoff) {
  return c.mechanism.pi.is_zero() ? 0.0 : c.mechanism.pi.power_integral(x, 1.0, 0.0, cutoff);
}

inline double spine_small(const ExampleCard& c, const Point& x, double cutoff) {
  return c.mechanism.pi.is_zero() ? 0.0 : c.mechanism.pi.power_integral(x, 2.0, 0.0, 0.0, cutoff);
}

inline SpineTrace run_spine_once(const ExampleCard& c, const Point& start, double phi_mu, double T,
                                 const SpineConfig& cfg, StreamSet& s, double& Bn, double& Bm) {
  const MotionSpec m = c.spine_motion();
  const double lam = c.eigen.lambda_c;
  SpineTrace tr;
  tr.phi_mu = phi_mu;
  tr.horizon = T;
  Point x = start;
  double t = 0.0, acc = 0.0;
  auto comp_rate = [&](const Point& y) { return std::exp(-lam * t) * c.phi(y) * spine_small(c, y, cfg.cutoff); };
  double last_rate = comp_rate(x);
  tr.t.push_back(0.0);
  tr.path.push_back(x);
  tr.comp.push_back(0.0);
  const double B = Bn + Bm;
  double cand = B > 0.0 ? s.branching.exponential(B) : std::numeric_limits<double>::infinity();
  int k = 1;
  while (t < T) {
    double grid = std::min(T, k * cfg.dt);
    double nxt = std::min(grid, cand);
    if (!advance(m, x, nxt - t, s.motion)) {
      tr.killed = true;
      break;
    }
    t = nxt;
    if (cand <= grid) {
      double u = s.branching.uniform() * B;
      if (u < Bn) {
        double r = spine_rate_n(c, x);
        if (r > Bn) throw ThinningBoundViolation(r, Bn);
        if (u < r) {
          tr.Dn.push_back(t);
          tr.Dn_x.push_back(x);
        }
      } else {
        double r = spine_rate_m(c, x, cfg.cutoff);
        if (r > Bm) throw ThinningBoundViolation(r, Bm);
        if (u - Bn < r) {
          tr.Dm.push_back(t);
          tr.Im.push_back(c.mechanism.pi.sample_power(x, 1.0, 0.0, cfg.cutoff, s.immigration_b));
          tr.Dm_x.push_back(x);
        }
      }
      cand += s.branching.exponential(B);
    }
    if (t >= grid) {
      double r = comp_rate(x);
      acc += 0.5 * (last_rate + r) * (t - tr.t.back());
      last_rate = r;
      tr.t.push_back(t);
      tr.path.push_back(x);
      tr.comp.push_back(acc);
      ++k;
    }
  }
  return tr;
}

}  // namespace detail

// spine started from phi mu / <phi, mu>, clocks by thinning against grid
// suprema of their rates; a violated bound is raised and the trace redrawn
inline SpineTrace run_spine(const ExampleCard& c, const std::vector<Atom>& mu, double T, std::uint64_t seed,
                            std::uint64_t replica, const SpineConfig& cfg = {}) {
  if (!(T >= 0.0) || !(cfg.dt > 0.0)) throw OutOfRangeError("run_spine needs T >= 0 and dt > 0");
  if (!std::isfinite(c.eigen.lambda_c)) throw UnsupportedError("card '" + c.name + "' has no closed-form lambda_c");
  const MotionSpec m = c.spine_motion();
  double Bn = cfg.safety * grid_sup(m, cfg.box, [&](const Point& x) { return detail::spine_rate_n(c, x); });
  double Bm = cfg.safety * grid_sup(m, cfg.box, [&](const Point& x) { return detail::spine_rate_m(c, x, cfg.cutoff); });
  for (int attempt = 0;; ++attempt) {
    StreamSet s(seed, replica, attempt);
    double phi_mu;
    Point start = detail::spine_start(c, mu, s.init, phi_mu);
    try {
      auto tr = detail::run_spine_once(c, start, phi_mu, T, cfg, s, Bn, Bm);
      tr.restarts = attempt;
      return tr;
    } catch (const ThinningBoundViolation& e) {
      if (attempt >= cfg.max_restarts) throw;
      double& b = e.bound == Bn ? Bn : Bm;
      b = std::max(2.0 * b, 1.5 * e.rate);
    }
  }
}

// <phi,mu> + sum_{D^n, s<=t} e^{-lambda s} phi(xi_s) + sum_{D^m, s<=t} e^{-lambda s} I_s phi(xi_s),
// plus the compensator of the masses below the cutoff
inline double spine_conditional_mass(const SpineTrace& tr, const ExampleCard& c, double t) {
  if (t > tr.horizon + 1e-12) throw OutOfRangeError("spine trace ends before the requested time");
  const double lam = c.eigen.lambda_c;
  double v = tr.phi_mu;
  for (std::size_t i = 0; i < tr.Dn.size() && tr.Dn[i] <= t; ++i) v += std::exp(-lam * tr.Dn[i]) * c.phi(tr.Dn_x[i]);
  for (std::size_t i = 0; i < tr.Dm.size() && tr.Dm[i] <= t; ++i)
    v += std::exp(-lam * tr.Dm[i]) * tr.Im[i] * c.phi(tr.Dm_x[i]);
  auto it = std::upper_bound(tr.t.begin(), tr.t.end(), t);
  std::size_t k = std::min<std::size_t>(it - tr.t.begin(), tr.t.size() - 1);
  if (k == 0) return v;
  double t0 = tr.t[k - 1], t1 = tr.t[k];
  double w = t1 > t0 ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 1.0;
  return v + (1.0 - w) * tr.comp[k - 1] + w * tr.comp[k];
}

inline double spine_conditional_mass(const SpineTrace& tr, const ExampleCard& c) {
  return spine_conditional_mass(tr, c, tr.horizon);
}

inline std::vector<SpineTrace> run_spines(const ExampleCard& c, const std::vector<Atom>& mu, double T, int replicas,
                                          std::uint64_t seed, const SpineConfig& cfg = {}, int jobs = 0,
                                          std::uint64_t first_replica = 0) {
  return parallel_map(replicas, jobs, [&](std::size_t r) { return run_spine(c, mu, T, seed, first_replica + r, cfg); });
}

// occupation probabilities of the recorded path points with t >= from
inline std::vector<double> occupation_histogram(const std::vector<SpineTrace>& traces, double lo, double hi, int bins,
                                                double from) {
  std::vector<double> h(bins, 0.0);
  double n = 0.0;
  for (const auto& tr : traces)
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
      if (tr.t[k] < from) continue;
      n += 1.0;
      double y = tr.path[k][0];
      if (y < lo || y >= hi) continue;
      h[std::min(bins - 1, int((y - lo) / (hi - lo) * bins))] += 1.0;
    }
  if (n > 0.0)
    for (double& v : h) v /= n;
  return h;
}

// L1 distance between occupation probabilities and a density, bin by bin,
// with the density's mass outside [lo, hi] counted as missed
inline double occupation_l1(const std::vector<double>& hist, double lo, double hi,
                            const std::function<double(double)>& density) {
  int bins = int(hist.size());
  double d = 0.0, inside = 0.0, width = (hi - lo) / bins;
  for (int i = 0; i < bins; ++i) {
    double a = lo + i * width, b = a + width;
    double p = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(density, a, b, 5, 1e-12);
    inside += p;
    d += std::abs(hist[i] - p);
  }
  double seen = 0.0;
  for (double v : hist) seen += v;
  return d + std::abs((1.0 - seen) - std::max(0.0, 1.0 - inside));
}

struct LpCurve {
  double p = 2.0;
  std::vector<double> t, mean, se;
  std::vector<std::size_t> n;
  double sup = 0.0;
  double tail_from = 0.0;
  LineFit tail;
  double tail_z = 0.0;
};

namespace detail {

// weighted least squares through independent curve points with known SEs
inline LineFit fit_line_weighted(const std::vector<double>& t, const std::vector<double>& y,
                                 const std::vector<double>& se) {
  LineFit r;
  double sw = 0, st = 0, sy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double w = se[i] > 0.0 ? 1.0 / (se[i] * se[i]) : 0.0;
    sw += w;
    st += w * t[i];
    sy += w * y[i];
  }
  if (sw <= 0.0) return fit_line(t, y);
  double mt = st / sw, my = sy / sw, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double w = se[i] > 0.0 ? 1.0 / (se[i] * se[i]) : 0.0;
    stt += w * (t[i] - mt) * (t[i] - mt);
    sty += w * (t[i] - mt) * (y[i] - my);
  }
  if (stt <= 0.0) return r;
  r.slope = sty / stt;
  r.intercept = my - r.slope * mt;
  r.slope_se = std::sqrt(1.0 / stt);
  return r;
}

inline void finish_curve(LpCurve& cv) {
  std::vector<double> tt, yy, ss;
  for (std::size_t i = 0; i < cv.t.size(); ++i) {
    cv.sup = std::max(cv.sup, cv.mean[i]);
    if (cv.t[i] >= cv.tail_from - 1e-12) {
      tt.push_back(cv.t[i]);
      yy.push_back(cv.mean[i]);
      ss.push_back(cv.se[i]);
    }
  }
  cv.tail = fit_line_weighted(tt, yy, ss);
  cv.tail_z = cv.tail.slope_se > 0.0 ? cv.tail.slope / cv.tail.slope_se : (cv.tail.slope == 0.0 ? 0.0 : INFINITY);
}

inline void check_p(double p) {
  if (!(p >= 1.0 && p <= 2.0)) throw OutOfRangeError("moment exponent p must lie in (1, 2]");
}

}  // namespace detail

// E[(conditional mass at t)^{p-1}] on t_grid, every point read off the same traces;
// the tail slope SE treats the points as independent
inline LpCurve lp_bound_estimate(const std::vector<SpineTrace>& traces, const ExampleCard& c, double p,
                                 const std::vector<double>& t_grid, double tail_from) {
  detail::check_p(p);
  LpCurve cv;
  cv.p = p;
  cv.tail_from = tail_from;
  for (double t : t_grid) {
    Accumulator a;
    for (const auto& tr : traces) a.add(std::pow(spine_conditional_mass(tr, c, t), p - 1.0));
    cv.t.push_back(t);
    cv.mean.push_back(a.mean);
    cv.se.push_back(a.se());
    cv.n.push_back(a.n);
  }
  detail::finish_curve(cv);
  return cv;
}

// one independent block of traces per grid point, each run to its own horizon
inline LpCurve lp_bound_estimate(const std::vector<std::vector<SpineTrace>>& blocks, const ExampleCard& c, double p,
                                 double tail_from) {
  detail::check_p(p);
  LpCurve cv;
  cv.p = p;
  cv.tail_from = tail_from;
  for (const auto& b : blocks) {
    if (b.empty()) continue;
    Accumulator a;
    for (const auto& tr : b) a.add(std::pow(spine_conditional_mass(tr, c), p - 1.0));
    cv.t.push_back(b.front().horizon);
    cv.mean.push_back(a.mean);
    cv.se.push_back(a.se());
    cv.n.push_back(a.n);
  }
  detail::finish_curve(cv);
  return cv;
}

inline LpCurve spine_lp_curve(const ExampleCard& c, const std::vector<Atom>& mu, double p,
                              const std::vector<double>& t_grid, int replicas, std::uint64_t seed,
                              double tail_from, const SpineConfig& cfg = {}, int jobs = 0) {
  detail::check_p(p);
  std::vector<std::vector<SpineTrace>> blocks;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    auto b = run_spines(c, mu, t_grid[k], replicas, seed, cfg, jobs, std::uint64_t(k) * std::uint64_t(replicas));
    for (auto& tr : b) tr.p = p;
    blocks.push_back(std::move(b));
  }
  return lp_bound_estimate(blocks, c, p, tail_from);
}

// int_0^T 2 e^{-lambda s} E^phi[(phi alpha)(xi_s)] ds for a spine started at x0
inline double campbell_continuous(const ExampleCard& c, const Point& x0, double T) {
  if (!c.mechanism.alpha.is_constant()) throw UnsupportedError("Campbell quadrature needs a constant alpha");
  TestFunction g = c.phi_function(2.0 * c.mechanism.alpha.constant());
  double lam = c.eigen.lambda_c;
  auto f = [&](double s) { return std::exp(-lam * s) * spine_expectation(c, g, x0, s); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, T, 10, 1e-12);
}

}  // namespace skelsim
