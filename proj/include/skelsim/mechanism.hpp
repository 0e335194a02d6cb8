#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "skelsim/errors.hpp"
#include "skelsim/field.hpp"
#include "skelsim/numerics.hpp"
#include "skelsim/rng.hpp"

namespace skelsim {

enum class LevyFamily { zero, tempered_power_law, discrete_atoms };

inline const char* to_string(LevyFamily f) {
  switch (f) {
    case LevyFamily::zero: return "zero";
    case LevyFamily::tempered_power_law: return "tempered-power-law";
    case LevyFamily::discrete_atoms: return "discrete-atoms";
  }
  return "?";
}

// Pi(x,dy) = weight(x) * [image of base(dy) under y -> scale(x) y] * e^{-tilt(x) y}
// base: y^{-1-a} e^{-b y} dy on (0,inf), or a finite sum of atoms.
// The three spatial factors are what h-transforms and the w-tilt act on.
struct LevyKernel {
  LevyFamily family = LevyFamily::zero;
  double a = 0.5, b = 1.0;
  std::vector<std::pair<double, double>> atoms;  // (size, weight) in base units
  double truncation = 0.0;  // samplers drop jumps below this size; see MassRates
  Field weight{1.0}, scale{1.0}, tilt{0.0};

  static LevyKernel none() { return {}; }
  static LevyKernel tempered(double a, double b, double c = 1.0) {
    LevyKernel k;
    k.family = LevyFamily::tempered_power_law;
    k.a = a;
    k.b = b;
    k.weight = Field(c);
    k.validate();
    return k;
  }
  static LevyKernel discrete(std::vector<std::pair<double, double>> atoms) {
    LevyKernel k;
    k.family = LevyFamily::discrete_atoms;
    k.atoms = std::move(atoms);
    k.validate();
    return k;
  }

  bool is_zero() const { return family == LevyFamily::zero; }
  bool is_constant() const { return weight.is_constant() && scale.is_constant() && tilt.is_constant(); }

  void validate() const {
    if (family == LevyFamily::tempered_power_law) {
      if (!(a > 0.0 && a < 2.0) || a == 1.0) throw ConfigError("tempered power law needs exponent a in (0,1) or (1,2)");
      if (b < 0.0) throw ConfigError("tempered power law needs b >= 0");
      if (a < 1.0 && b == 0.0) throw ConfigError("tempered power law with a < 1 needs b > 0 for a finite mean");
    }
    if (family == LevyFamily::discrete_atoms)
      for (auto [y, c] : atoms)
        if (!(y > 0.0) || c < 0.0) throw ConfigError("atoms need positive size and nonnegative weight");
  }

  // base-variable exponential rate at x with an extra tilt t on the actual jump size
  double rate(const Point& x, double t = 0.0) const { return b + (tilt(x) + t) * scale(x); }

  // Pi(x,dy)/dy for the tempered family, in actual jump size
  double density(const Point& x, double y) const {
    if (family != LevyFamily::tempered_power_law || y <= 0.0) return 0.0;
    double c = weight(x), s = scale(x), th = tilt(x);
    return c / s * std::pow(y / s, -1.0 - a) * std::exp(-(b / s + th) * y);
  }

  // int (e^{-yz} - 1 + yz) Pi(x,dy), closed form
  double laplace(const Point& x, double z) const {
    if (z <= 0.0) return 0.0;
    switch (family) {
      case LevyFamily::zero: return 0.0;
      case LevyFamily::discrete_atoms: {
        double s = scale(x), th = tilt(x), c = weight(x), v = 0.0;
        for (auto [y, w] : atoms) v += w * std::exp(-th * s * y) * em1x(s * y * z);
        return c * v;
      }
      case LevyFamily::tempered_power_law: {
        double c = weight(x), s = scale(x), R = rate(x), g = std::tgamma(-a), zs = z * s;
        if (R <= 0.0) return c * g * std::pow(zs, a);
        double u = zs / R;
        double f;
        if (u < 0.1) {
          // (1+u)^a - 1 - a u as a binomial series
          f = 0.0;
          double coef = a * (a - 1.0) / 2.0, up = u * u;
          for (int n = 2; n < 60; ++n) {
            f += coef * up;
            if (std::abs(coef * up) < 1e-18 * std::abs(f)) break;
            coef *= (a - n) / (n + 1.0);
            up *= u;
          }
        } else {
          f = std::expm1(a * std::log1p(u)) - a * u;
        }
        return c * g * std::pow(R, a) * f;
      }
    }
    return 0.0;
  }

  // d/dz of laplace: int y (1 - e^{-yz}) Pi(x,dy)
  double dlaplace(const Point& x, double z) const {
    if (z <= 0.0) return 0.0;
    switch (family) {
      case LevyFamily::zero: return 0.0;
      case LevyFamily::discrete_atoms: {
        double s = scale(x), th = tilt(x), c = weight(x), v = 0.0;
        for (auto [y, w] : atoms) v += w * std::exp(-th * s * y) * s * y * (-std::expm1(-s * y * z));
        return c * v;
      }
      case LevyFamily::tempered_power_law: {
        double c = weight(x), s = scale(x), R = rate(x), g = std::tgamma(-a), zs = z * s;
        if (R <= 0.0) return c * g * a * s * std::pow(zs, a - 1.0);
        return c * g * a * s * std::pow(R, a - 1.0) * std::expm1((a - 1.0) * std::log1p(zs / R));
      }
    }
    return 0.0;
  }

  // same integral as laplace() by adaptive quadrature on the density
  double laplace_quadrature(const Point& x, double z) const {
    if (z <= 0.0 || family == LevyFamily::zero) return 0.0;
    if (family == LevyFamily::discrete_atoms) return laplace(x, z);
    return integrate_positive_line([&](double y) { return em1x(y * z) * density(x, y); }, 1e-10);
  }

  double dlaplace_quadrature(const Point& x, double z) const {
    if (z <= 0.0 || family == LevyFamily::zero) return 0.0;
    if (family == LevyFamily::discrete_atoms) return dlaplace(x, z);
    return integrate_positive_line([&](double y) { return y * (-std::expm1(-y * z)) * density(x, y); }, 1e-10);
  }

  // int_lo^hi y^k e^{-t y} Pi(x,dy), k real; hi may be infinite
  double power_integral(const Point& x, double k, double t, double lo = 0.0,
                        double hi = std::numeric_limits<double>::infinity()) const {
    switch (family) {
      case LevyFamily::zero: return 0.0;
      case LevyFamily::discrete_atoms: {
        double s = scale(x), th = tilt(x), c = weight(x), v = 0.0;
        for (auto [y, w] : atoms) {
          double ys = s * y;
          if (ys >= lo && ys <= hi) v += w * std::pow(ys, k) * std::exp(-(th + t) * ys);
        }
        return c * v;
      }
      case LevyFamily::tempered_power_law: {
        double c = weight(x), s = scale(x), R = rate(x, t), p = k - a;
        double L = lo / s, H = hi / s, v;
        if (std::isinf(H)) v = upper_power_exp(p, R, L);
        else if (p > 0.0) v = lower_power_exp(p, R, H) - lower_power_exp(p, R, L);
        else v = upper_power_exp(p, R, L) - upper_power_exp(p, R, H);
        return c * std::pow(s, k) * v;
      }
    }
    return 0.0;
  }

  // log of int y^k/k! e^{-t y} Pi(x,dy) for integer k >= 2; -inf when zero
  double log_tilted_moment(const Point& x, int k, double t) const {
    switch (family) {
      case LevyFamily::zero: return -std::numeric_limits<double>::infinity();
      case LevyFamily::discrete_atoms: {
        double v = power_integral(x, k, t) / std::tgamma(k + 1.0);
        return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
      }
      case LevyFamily::tempered_power_law: {
        double c = weight(x), s = scale(x), R = rate(x, t), p = k - a;
        if (c <= 0.0) return -std::numeric_limits<double>::infinity();
        if (R <= 0.0) return std::numeric_limits<double>::infinity();
        return std::log(c) + k * std::log(s) + std::lgamma(p) - p * std::log(R) - std::lgamma(k + 1.0);
      }
    }
    return -std::numeric_limits<double>::infinity();
  }

  // int (y ^ y^2) Pi(x,dy)
  double small_large_moment(const Point& x) const { return power_integral(x, 2.0, 0.0, 0.0, 1.0) + power_integral(x, 1.0, 0.0, 1.0); }

  // draw y from the density proportional to y^k e^{-t y} Pi(x,dy) on [lo, inf)
  double sample_power(const Point& x, double k, double t, double lo, Stream& rng) const {
    switch (family) {
      case LevyFamily::zero: throw Error("sampling from a zero Levy kernel");
      case LevyFamily::discrete_atoms: {
        double s = scale(x), th = tilt(x), tot = 0.0;
        std::vector<double> w(atoms.size());
        for (std::size_t i = 0; i < atoms.size(); ++i) {
          double ys = s * atoms[i].first;
          w[i] = ys >= lo ? atoms[i].second * std::pow(ys, k) * std::exp(-(th + t) * ys) : 0.0;
          tot += w[i];
        }
        double u = rng.uniform() * tot;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
          if (u < w[i]) return s * atoms[i].first;
          u -= w[i];
        }
        return s * atoms.back().first;
      }
      case LevyFamily::tempered_power_law: {
        double s = scale(x), R = rate(x, t), p = k - a, L = lo / s;
        if (p > 0.0) {
          for (;;) {
            double g = rng.gamma(p, R);
            if (g >= L) return s * g;
          }
        }
        if (L <= 0.0) throw Error("jump-size sampler needs a positive cutoff");
        for (;;) {
          double y = L * std::pow(rng.uniform(), 1.0 / p);
          if (R <= 0.0 || rng.uniform() < std::exp(-R * (y - L))) return s * y;
        }
      }
    }
    return 0.0;
  }

  // h-transform of the kernel: Pi^h(x,dy) = Pi(x, dy/h(x)) / h(x)
  LevyKernel h_transform(const Field& h) const {
    LevyKernel k = *this;
    k.weight = weight / h;
    k.scale = scale * h;
    k.tilt = tilt / h;
    return k;
  }

  // e^{-w(x) y} Pi(x,dy)
  LevyKernel tilted(const Field& w) const {
    LevyKernel k = *this;
    k.tilt = tilt + w;
    return k;
  }
};

// psi_beta(x,z) = -beta(x) z + alpha(x) z^2 + int (e^{-yz} - 1 + yz) Pi(x,dy)
struct BranchingMechanism {
  Field beta{0.0}, alpha{0.0};
  LevyKernel pi;

  bool is_constant() const { return beta.is_constant() && alpha.is_constant() && pi.is_constant(); }

  double psi0(const Point& x, double z) const { return alpha(x) * z * z + pi.laplace(x, z); }
  double psi(const Point& x, double z) const { return -beta(x) * z + psi0(x, z); }
  double dpsi0(const Point& x, double z) const { return 2.0 * alpha(x) * z + pi.dlaplace(x, z); }
};

// psi by adaptive quadrature of the jump integral
inline double psi_eval(const BranchingMechanism& m, const Point& x, double z) {
  if (z < 0.0) throw Error("psi_eval needs z >= 0");
  return -m.beta(x) * z + m.alpha(x) * z * z + m.pi.laplace_quadrature(x, z);
}

inline double psi0_eval(const BranchingMechanism& m, const Point& x, double z) {
  return m.alpha(x) * z * z + m.pi.laplace_quadrature(x, z);
}

struct OffspringLaw {
  double q = 0.0;
  std::vector<double> p;  // p[k], k = 0..K; p[0] = p[1] = 0
  double tail = 0.0;      // mass beyond K
  int K = 0;
  double tail_ratio = 0.0;  // geometric decay used for tail draws

  double total() const {
    double s = tail;
    for (double v : p) s += v;
    return s;
  }
  double tail_mean() const { return tail > 0.0 ? tail * (K + 1.0 + tail_ratio / (1.0 - tail_ratio)) : 0.0; }
  double mean() const {
    double m = tail_mean();
    for (int k = 0; k <= K; ++k) m += k * p[k];
    return m;
  }
  // sum_k p_k s^k - s over the table
  double generator(double s) const {
    double v = 0.0, sk = 1.0;
    for (int k = 0; k <= K; ++k) {
      v += p[k] * sk;
      sk *= s;
    }
    return v - s;
  }

  int sample(Stream& rng) const {
    double u = rng.uniform();
    for (int k = 2; k <= K; ++k) {
      if (u < p[k]) return k;
      u -= p[k];
    }
    if (tail <= 0.0) return p.size() > 2 && p[2] > 0.0 ? 2 : K;
    double r = std::clamp(tail_ratio, 0.0, 0.999999);
    return K + 1 + int(std::floor(std::log(rng.uniform()) / std::log(r > 0.0 ? r : 1e-300)));
  }

  bool is_dyadic() const { return K >= 2 && p[2] == 1.0 && tail == 0.0; }
};

// branching rate and offspring law of the skeleton at x
inline OffspringLaw skeleton_offspring(const BranchingMechanism& m, double w, const Point& x, int K = 64) {
  if (!(w > 0.0)) throw DegenerateSiteError("skeleton offspring needs w(x) > 0");
  if (K < 2) throw Error("truncation index must be at least 2");
  OffspringLaw law;
  law.K = K;
  law.q = m.dpsi0(x, w) - m.psi0(x, w) / w;
  if (!(law.q > 0.0)) throw DegenerateSiteError("branching rate q(x) <= 0 at a site");
  law.p.assign(K + 1, 0.0);
  double qw = law.q * w, lw = std::log(w), sum = 0.0;
  for (int k = 2; k <= K; ++k) {
    double lm = m.pi.log_tilted_moment(x, k, w);
    double v = std::isfinite(lm) ? std::exp(k * lw + lm) / qw : 0.0;
    if (k == 2) v += m.alpha(x) * w * w / qw;
    law.p[k] = v;
    sum += v;
  }
  law.tail = std::max(0.0, 1.0 - sum);
  if (law.tail < 1e-15) law.tail = 0.0;
  if (law.p[K - 1] > 0.0) law.tail_ratio = law.p[K] / law.p[K - 1];
  return law;
}

// mass issued at a branch point with k offspring: zero (quadratic part) or a
// draw from the density y^k e^{-wy} Pi(x,dy)
inline double branch_point_mass(const BranchingMechanism& m, double w, const Point& x, int k, Stream& rng) {
  if (m.pi.is_zero()) return 0.0;
  double lm = m.pi.log_tilted_moment(x, k, w);
  double jump = std::isfinite(lm) ? std::exp(k * std::log(w) + lm) : 0.0;
  double atom = k == 2 ? m.alpha(x) * w * w : 0.0;
  if (jump <= 0.0 || rng.uniform() * (atom + jump) < atom) return 0.0;
  return m.pi.sample_power(x, k, w, 0.0, rng);
}

struct StarMechanism {
  Field beta_star, alpha;
  LevyKernel pi_star;
  Field w;

  BranchingMechanism as_mechanism() const { return {beta_star, alpha, pi_star}; }
};

// beta* = beta - 2 alpha w - int (1 - e^{-wy}) y Pi(dy),  Pi* = e^{-wy} Pi
inline StarMechanism star_transform(const BranchingMechanism& m, const Field& w) {
  StarMechanism s;
  s.alpha = m.alpha;
  s.pi_star = m.pi.tilted(w);
  s.w = w;
  if (m.is_constant() && w.is_constant()) {
    Point o;
    s.beta_star = Field(m.beta(o) - m.dpsi0(o, w(o)));
  } else {
    s.beta_star = Field(Field::Fn([m, w](const Point& x) { return m.beta(x) - m.dpsi0(x, w(x)); }));
  }
  return s;
}

// beta* by quadrature of the defining integral
inline double beta_star_quadrature(const BranchingMechanism& m, double w, const Point& x) {
  return m.beta(x) - 2.0 * m.alpha(x) * w - m.pi.dlaplace_quadrature(x, w);
}

// z* = sup{z >= 0 : psi(z) <= 0} for a spatially constant mechanism
inline std::optional<double> csbp_root(const BranchingMechanism& m) {
  if (!m.is_constant()) throw UnsupportedError("csbp_root needs a spatially constant mechanism");
  Point o;
  double beta = m.beta(o);
  if (beta <= 0.0) return std::nullopt;
  if (m.alpha(o) == 0.0) {
    // psi grows at most linearly; its slope at infinity is int y Pi - beta
    double slope = m.pi.is_zero() ? 0.0 : m.pi.power_integral(o, 1.0, 0.0);
    bool superlinear = m.pi.family == LevyFamily::tempered_power_law && m.pi.rate(o) <= 0.0;
    if (!superlinear && slope <= beta) return std::nullopt;
  }
  auto psi = [&](double z) { return m.psi(o, z); };
  double lo = 0.0, hi = 1.0;
  int doublings = 0;
  while (psi(hi) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 60) throw UnboundedRootError("no bracket for z* below 2^60");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    double mid = 0.5 * (lo + hi);
    (psi(mid) <= 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

enum class GreyResult { satisfied, violated, not_applicable };

inline const char* to_string(GreyResult g) {
  switch (g) {
    case GreyResult::satisfied: return "satisfied";
    case GreyResult::violated: return "violated";
    case GreyResult::not_applicable: return "not-applicable";
  }
  return "?";
}

struct GreyReport {
  GreyResult result = GreyResult::not_applicable;
  double integral = std::numeric_limits<double>::infinity();
  double growth_exponent = 0.0;
};

// int_{z*+1}^inf dz/psi(z) < inf, with a power-law tail beyond the last node
inline GreyReport grey_check(const BranchingMechanism& m) {
  if (!m.is_constant()) throw UnsupportedError("grey_check needs a spatially constant mechanism");
  Point o;
  GreyReport r;
  if (m.alpha(o) == 0.0 && m.pi.is_zero()) return r;
  auto root = csbp_root(m);
  double z0 = (root ? *root : 0.0) + 1.0;
  auto psi = [&](double z) { return m.psi(o, z); };
  double Z1 = 1e7, Z2 = 1e9;
  if (psi(Z2) <= 0.0 || psi(Z1) <= 0.0) return r;
  r.growth_exponent = std::log(psi(Z2) / psi(Z1)) / std::log(Z2 / Z1);
  if (r.growth_exponent <= 1.0 + 1e-3) {
    r.result = GreyResult::violated;
    return r;
  }
  double body = 0.0;
  for (double a = z0; a < Z2; a *= 10.0) {
    double b = std::min(a * 10.0, Z2);
    body += integrate([&](double z) { return 1.0 / psi(z); }, a, b, 1e-10);
  }
  r.integral = body + Z2 / ((r.growth_exponent - 1.0) * psi(Z2));
  r.result = GreyResult::satisfied;
  return r;
}

}  // namespace skelsim
