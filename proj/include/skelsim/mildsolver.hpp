#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "skelsim/errors.hpp"
#include "skelsim/mechanism.hpp"
#include "skelsim/motion.hpp"
#include "skelsim/numerics.hpp"
#include "skelsim/rng.hpp"
#include "skelsim/testfunction.hpp"

namespace skelsim {

struct CsbpCurve {
  std::vector<double> t, u;
  int halvings = 0;
};

// du/dt = -psi(u), u(0) = theta, by RK4 on the grid t = j dt
inline CsbpCurve solve_csbp_ode(const BranchingMechanism& mech, double theta, double T, double dt) {
  if (!mech.is_constant()) throw UnsupportedError("solve_csbp_ode needs a spatially constant mechanism");
  if (!(theta >= 0.0)) throw OutOfRangeError("theta must be nonnegative");
  if (!(dt > 0.0) || !(T >= 0.0)) throw OutOfRangeError("need dt > 0 and T >= 0");
  Point o;
  auto f = [&](double u) { return -mech.psi(o, u); };
  int n = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
  double h = T / n;
  CsbpCurve c;
  c.t.push_back(0.0);
  c.u.push_back(theta);
  double u = theta;
  int level = 0;
  for (int j = 0; j < n; ++j) {
    for (;;) {
      int sub = 1 << level;
      double s = h / sub, v = u;
      bool ok = true;
      for (int i = 0; i < sub && ok; ++i) {
        double k1 = f(v), k2 = f(v + 0.5 * s * k1), k3 = f(v + 0.5 * s * k2), k4 = f(v + s * k3);
        v += s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ok = std::isfinite(v) && v >= -1e-12 * (1.0 + theta);
      }
      if (ok) {
        u = std::max(v, 0.0);
        break;
      }
      if (++level > 20) throw NumericBlowupError("RK4 step rejected after 20 halvings");
    }
    c.halvings = std::max(c.halvings, level);
    c.t.push_back((j + 1) * h);
    c.u.push_back(u);
  }
  return c;
}

struct MildGrid {
  double lo = -8.0, hi = 8.0;  // ignored on the unit interval
  int nodes = 321;
  double dt = 0.01;
  double tol = 1e-10;
  int max_iter = 2000;
  int mc_paths = 10000;
  std::uint64_t seed = 1;
  bool richardson = true;  // combine dt and dt/2 solutions to cancel the O(dt^2) term
};

struct MildSolution {
  std::vector<double> x, t;
  std::vector<std::vector<double>> u;  // u[j][i] = u(x_i, t_j)
  int iterations = 0;
  double residual = 0.0;
  double k = 0.0, c = 0.0;
  double bound = 0.0;       // a-priori bound v(T)
  double mc_noise = 0.0;    // per-solve Monte Carlo error estimate (0 for quadrature propagators)
  bool monotone = true;     // Picard iterates nondecreasing
  bool bounded = true;      // 0 <= u <= v at every node

  // linear interpolation in x and t
  double value(double xq, double tq) const {
    if (xq < x.front() - 1e-12 || xq > x.back() + 1e-12) throw OutOfRangeError("point outside the solver grid");
    if (tq < -1e-12 || tq > t.back() + 1e-9) throw OutOfRangeError("time outside the solver grid");
    double h = x[1] - x[0];
    double fx = std::clamp((xq - x.front()) / h, 0.0, static_cast<double>(x.size() - 1));
    std::size_t i = std::min(static_cast<std::size_t>(fx), x.size() - 2);
    double ax = fx - i;
    double dt = t[1] - t[0];
    double ft = std::clamp(tq / dt, 0.0, static_cast<double>(t.size() - 1));
    std::size_t j = std::min(static_cast<std::size_t>(ft), t.size() - 2);
    double at = ft - j;
    auto row = [&](std::size_t jj) { return (1.0 - ax) * u[jj][i] + ax * u[jj][i + 1]; };
    return (1.0 - at) * row(j) + at * row(j + 1);
  }
};

namespace detail {

// one step of the motion semigroup on grid values
class Propagator {
 public:
  virtual ~Propagator() = default;
  virtual void apply(const std::vector<double>& in, std::vector<double>& out) const = 0;
  double noise_sd = 0.0;
};

// exact Gaussian transition integrated against the natural cubic spline of
// the node values, constant extension outside the grid
class GaussianSplinePropagator : public Propagator {
 public:
  GaussianSplinePropagator(const std::vector<double>& x, double mean_factor, double var) : x_(x) {
    n_ = x.size();
    h_ = x[1] - x[0];
    double s = std::sqrt(var);
    first_.resize(n_);
    last_.resize(n_);
    mom_.resize(n_);
    below_.resize(n_);
    above_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double mu = mean_factor * x[i];
      if (s < 1e-12 * h_) throw OutOfRangeError("time step too small for the spatial grid");
      below_[i] = normal_cdf((x.front() - mu) / s);
      above_[i] = normal_cdf(-(x.back() - mu) / s);
      double lo = mu - 12.0 * s, hi = mu + 12.0 * s;
      long k0 = std::max(0L, static_cast<long>(std::floor((lo - x.front()) / h_)));
      long k1 = std::min(static_cast<long>(n_) - 2, static_cast<long>(std::floor((hi - x.front()) / h_)));
      first_[i] = k0;
      last_[i] = k1;
      for (long k = k0; k <= k1; ++k) {
        double a = (x[k] - mu) / s, b = (x[k + 1] - mu) / s;
        double pa = normal_pdf(a), pb = normal_pdf(b);
        double J0 = normal_cdf(b) - normal_cdf(a);
        double J1 = pa - pb;
        double J2 = J0 + a * pa - b * pb;
        double J3 = 2.0 * J1 + a * a * pa - b * b * pb;
        // moments of tau = y - x_k = (mu - x_k) + s z
        double c = mu - x[k];
        std::array<double, 4> m{J0, c * J0 + s * J1, c * c * J0 + 2.0 * c * s * J1 + s * s * J2,
                                c * c * c * J0 + 3.0 * c * c * s * J1 + 3.0 * c * s * s * J2 + s * s * s * J3};
        mom_[i].push_back(m);
      }
    }
    // Thomas factors for m_{i-1} + 4 m_i + m_{i+1} = r_i on the interior
    std::size_t ni = n_ - 2;
    cp_.assign(ni, 0.0);
    den_.assign(ni, 0.0);
    for (std::size_t i = 0; i < ni; ++i) {
      den_[i] = 4.0 - (i ? cp_[i - 1] : 0.0);
      cp_[i] = 1.0 / den_[i];
    }
  }

  void apply(const std::vector<double>& u, std::vector<double>& out) const override {
    std::size_t ni = n_ - 2;
    std::vector<double> m(n_, 0.0), d(ni);
    double f = 6.0 / (h_ * h_);
    for (std::size_t i = 0; i < ni; ++i) {
      double r = f * (u[i + 2] - 2.0 * u[i + 1] + u[i]);
      d[i] = (r - (i ? d[i - 1] : 0.0)) / den_[i];
    }
    for (std::size_t i = ni; i-- > 0;) m[i + 1] = d[i] - (i + 1 < ni ? cp_[i] * m[i + 2] : 0.0);
    std::vector<std::array<double, 4>> coef(n_ - 1);
    for (std::size_t k = 0; k + 1 < n_; ++k)
      coef[k] = {u[k], (u[k + 1] - u[k]) / h_ - h_ * (2.0 * m[k] + m[k + 1]) / 6.0, 0.5 * m[k],
                 (m[k + 1] - m[k]) / (6.0 * h_)};
    out.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = below_[i] * u.front() + above_[i] * u.back();
      for (long k = first_[i]; k <= last_[i]; ++k) {
        const auto& mo = mom_[i][k - first_[i]];
        const auto& c = coef[k];
        acc += c[0] * mo[0] + c[1] * mo[1] + c[2] * mo[2] + c[3] * mo[3];
      }
      out[i] = acc;
    }
  }

 private:
  std::vector<double> x_;
  std::size_t n_ = 0;
  double h_ = 0.0;
  std::vector<long> first_, last_;
  std::vector<std::vector<std::array<double, 4>>> mom_;
  std::vector<double> below_, above_, cp_, den_;
};

// Monte Carlo transition rows with linear interpolation; killed paths carry no mass
class MonteCarloPropagator : public Propagator {
 public:
  MonteCarloPropagator(const MotionSpec& m, const std::vector<double>& x, double dt, int paths, std::uint64_t seed)
      : n_(x.size()) {
    double lo = x.front(), h = x[1] - x[0];
    rows_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      Stream rng(seed, i, "mild-propagator");
      std::vector<double> w(n_, 0.0);
      for (int p = 0; p < paths; ++p) {
        Point y(x[i]);
        if (!advance(m, y, dt, rng)) continue;
        double fy = std::clamp((y[0] - lo) / h, 0.0, static_cast<double>(n_ - 1));
        std::size_t k = std::min(static_cast<std::size_t>(fy), n_ - 2);
        double a = fy - k;
        w[k] += (1.0 - a) / paths;
        w[k + 1] += a / paths;
      }
      for (std::size_t k = 0; k < n_; ++k)
        if (w[k] != 0.0) rows_[i].push_back({k, w[k]});
    }
    noise_sd = 1.0 / std::sqrt(static_cast<double>(paths));
  }

  void apply(const std::vector<double>& u, std::vector<double>& out) const override {
    out.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (const auto& [k, w] : rows_[i]) acc += w * u[k];
      out[i] = acc;
    }
  }

 private:
  std::size_t n_;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows_;
};

inline bool gaussian_motion(const MotionSpec& m) {
  return m.dim == 1 && m.domain == DomainKind::full_space && m.exact != ExactSampler::none &&
         m.diffusion.is_constant();
}

}  // namespace detail

using Forcing = std::function<double(const Point&, double)>;

namespace detail {

inline MildSolution solve_mild_once(const BranchingMechanism& mech, const MotionSpec& motion, const TestFunction& f,
                                    double T, const MildGrid& grid, const Forcing& g) {
  if (motion.dim != 1) throw UnsupportedError("the mild solver is implemented for d = 1");
  if (!(T > 0.0)) throw OutOfRangeError("T must be positive");
  MildSolution sol;
  double lo = grid.lo, hi = grid.hi;
  if (motion.domain == DomainKind::unit_interval) lo = 0.0, hi = 1.0;
  if (grid.nodes < 5) throw OutOfRangeError("need at least 5 grid nodes");
  sol.x = linspace(lo, hi, grid.nodes);
  int nt = std::max(1, static_cast<int>(std::ceil(T / grid.dt - 1e-9)));
  double dt = T / nt;
  sol.t = linspace(0.0, T, nt + 1);
  std::size_t nx = sol.x.size();

  std::vector<Point> pts;
  for (double xi : sol.x) pts.emplace_back(xi);
  double fnorm = 0.0, gnorm = 0.0, bbar = 0.0;
  for (const auto& p : pts) {
    fnorm = std::max(fnorm, std::abs(f(p)));
    bbar = std::max(bbar, mech.beta(p));
    if (g)
      for (double tj : sol.t) gnorm = std::max(gnorm, std::abs(g(p, tj)));
  }
  for (const auto& p : pts)
    if (f(p) < 0.0) throw OutOfRangeError("f must be nonnegative");
  double growth = bbar > 0.0 ? std::expm1(bbar * T) / bbar : T;
  sol.bound = std::exp(bbar * T) * fnorm + growth * gnorm;
  sol.c = sol.bound;
  double lip = 0.0;
  for (const auto& p : pts) lip = std::max(lip, mech.dpsi0(p, sol.c) + std::max(-mech.beta(p), 0.0));
  double k = 1.1 * lip;
  sol.k = k;

  std::unique_ptr<detail::Propagator> prop;
  bool exact = detail::gaussian_motion(motion);
  double kappa = motion.exact == ExactSampler::ou ? motion.kappa : 0.0;
  double a = exact ? motion.diffusion.constant() : 1.0;
  if (exact)
    prop = std::make_unique<detail::GaussianSplinePropagator>(sol.x, ou_mean_factor(kappa, dt),
                                                              ou_variance(kappa, dt, a));
  else
    prop = std::make_unique<detail::MonteCarloPropagator>(motion, sol.x, dt, grid.mc_paths, grid.seed);

  // linear part e^{-k t_j} P_{t_j} f
  std::vector<std::vector<double>> lin(nt + 1, std::vector<double>(nx));
  for (std::size_t i = 0; i < nx; ++i) lin[0][i] = f(pts[i]);
  for (int j = 1; j <= nt; ++j) {
    double ek = std::exp(-k * sol.t[j]);
    if (exact) {
      double mf = ou_mean_factor(kappa, sol.t[j]), var = ou_variance(kappa, sol.t[j], a);
      for (std::size_t i = 0; i < nx; ++i) lin[j][i] = ek * gaussian_average(f, mf * sol.x[i], var);
    } else {
      prop->apply(lin[j - 1], lin[j]);
      for (auto& v : lin[j]) v *= std::exp(-k * dt);
    }
  }

  // weights of int_0^dt e^{-ks} (linear interpolant) ds
  double q = k * dt, E1, E2;
  if (q < 1e-4) {
    E1 = 1.0 - q / 2.0 + q * q / 6.0;
    E2 = 0.5 - q / 3.0 + q * q / 8.0;
  } else {
    E1 = -std::expm1(-q) / q;
    E2 = (1.0 - std::exp(-q) * (1.0 + q)) / (q * q);
  }
  double w0 = dt * (E1 - E2), w1 = dt * E2, decay = std::exp(-q);

  auto G = [&](std::size_t i, double z, double t) {
    double v = k * z - mech.psi(pts[i], z);
    if (g) v += g(pts[i], t);
    return v;
  };

  // P_dt G(u(0)) for u(0) in {0, f}, by quadrature across the jumps of f
  std::vector<double> pg_zero(nx, 0.0), pg_f(nx, 0.0);
  if (exact) {
    double mf = ou_mean_factor(kappa, dt), sd = std::sqrt(ou_variance(kappa, dt, a));
    for (std::size_t i = 0; i < nx; ++i) {
      double mu = mf * sol.x[i];
      std::vector<double> cuts{mu - 12.0 * sd};
      for (double b : f.breakpoints())
        if (b > mu - 12.0 * sd && b < mu + 12.0 * sd) cuts.push_back(b);
      cuts.push_back(mu + 12.0 * sd);
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        auto dens = [&](double y) { return normal_pdf((y - mu) / sd) / sd; };
        pg_f[i] += integrate([&](double y) {
          Point py(y);
          double v = k * f(py) - mech.psi(py, f(py)) + (g ? g(py, 0.0) : 0.0);
          return v * dens(y);
        }, cuts[c], cuts[c + 1], 1e-12);
        if (g) pg_zero[i] += integrate([&](double y) { return g(Point(y), 0.0) * dens(y); }, cuts[c], cuts[c + 1], 1e-12);
      }
    }
  }

  std::vector<std::vector<double>> u(nt + 1, std::vector<double>(nx, 0.0)), un = u, Gv = u;
  std::vector<double> I(nx), tmp(nx), pI(nx);
  double diff = std::numeric_limits<double>::infinity();
  int iter = 0;
  while (iter < grid.max_iter) {
    ++iter;
    for (int j = 0; j <= nt; ++j)
      for (std::size_t i = 0; i < nx; ++i) Gv[j][i] = G(i, u[j][i], sol.t[j]);
    std::fill(I.begin(), I.end(), 0.0);
    un[0] = lin[0];
    for (int j = 0; j < nt; ++j) {
      if (j == 0 && exact) {
        pI = iter > 1 ? pg_f : pg_zero;
        for (auto& v : pI) v *= w1;
      } else {
        for (std::size_t i = 0; i < nx; ++i) tmp[i] = decay * I[i] + w1 * Gv[j][i];
        prop->apply(tmp, pI);
      }
      for (std::size_t i = 0; i < nx; ++i) {
        I[i] = pI[i] + w0 * Gv[j + 1][i];
        un[j + 1][i] = lin[j + 1][i] + I[i];
      }
    }
    diff = 0.0;
    for (int j = 0; j <= nt; ++j)
      for (std::size_t i = 0; i < nx; ++i) {
        double d = un[j][i] - u[j][i];
        if (d < -1e-9 * (1.0 + std::abs(u[j][i]))) sol.monotone = false;
        diff = std::max(diff, std::abs(d));
      }
    std::swap(u, un);
    if (!std::isfinite(diff)) throw NumericBlowupError("Picard iterate is not finite");
    if (diff <= grid.tol) break;
  }
  sol.iterations = iter;
  sol.residual = diff;
  if (diff > grid.tol) throw NonConvergenceError("Picard iteration budget exceeded", diff, iter);
  for (int j = 0; j <= nt; ++j) {
    double vj = std::exp(bbar * sol.t[j]) * fnorm + (bbar > 0.0 ? std::expm1(bbar * sol.t[j]) / bbar : sol.t[j]) * gnorm;
    for (std::size_t i = 0; i < nx; ++i)
      if (u[j][i] < -1e-9 || u[j][i] > vj * (1.0 + 1e-9) + 1e-12) sol.bounded = false;
  }
  if (!exact) {
    double umax = 0.0;
    for (double v : u.back()) umax = std::max(umax, v);
    sol.mc_noise = prop->noise_sd * umax * std::sqrt(static_cast<double>(nt));
  }
  sol.u = std::move(u);
  return sol;
}

}  // namespace detail

// Picard iteration u_{n+1} = F_k u_n for
//   u(x,t) = e^{-kt} P_t f + int_0^t e^{-ks} P_s [k u - psi(u) + g](x, t-s) ds,
// starting from u_0 = 0; the convolution uses linear-in-time weights on each step
inline MildSolution solve_mild(const BranchingMechanism& mech, const MotionSpec& motion, const TestFunction& f,
                               double T, const MildGrid& grid = {}, const Forcing& g = nullptr) {
  if (!grid.richardson) return detail::solve_mild_once(mech, motion, f, T, grid, g);
  MildGrid fine = grid;
  int nt = std::max(1, static_cast<int>(std::ceil(T / grid.dt - 1e-9)));
  fine.dt = T / (2.0 * nt);
  auto coarse = detail::solve_mild_once(mech, motion, f, T, grid, g);
  auto sf = detail::solve_mild_once(mech, motion, f, T, fine, g);
  for (std::size_t j = 0; j < coarse.t.size(); ++j)
    for (std::size_t i = 0; i < coarse.x.size(); ++i) {
      double v = (4.0 * sf.u[2 * j][i] - coarse.u[j][i]) / 3.0;
      coarse.u[j][i] = std::max(v, 0.0);
    }
  coarse.iterations += sf.iterations;
  coarse.residual = std::max(coarse.residual, sf.residual);
  coarse.monotone = coarse.monotone && sf.monotone;
  coarse.bounded = coarse.bounded && sf.bounded;
  coarse.mc_noise = std::max(coarse.mc_noise, sf.mc_noise);
  return coarse;
}

// exp(-<u_f(., t), mu>)
inline double laplace_functional(const MildSolution& sol, const std::vector<Atom>& mu, double t) {
  double s = 0.0;
  for (const auto& a : mu) s += a.mass * sol.value(a.x[0], t);
  return std::exp(-s);
}

inline double laplace_functional(const MildSolution& sol, const std::vector<Atom>& mu) {
  return laplace_functional(sol, mu, sol.t.back());
}

}  // namespace skelsim
