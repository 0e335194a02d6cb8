#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "skelsim/errors.hpp"
#include "skelsim/field.hpp"
#include "skelsim/mechanism.hpp"
#include "skelsim/rng.hpp"

namespace skelsim {

enum class DomainKind { full_space, unit_interval };
enum class Boundary { absorbing, reflecting };
enum class ExactSampler { none, ou, brownian };

using VectorField = std::function<Point(const Point&)>;

// Diffusion with isotropic diffusion coefficient a(x) I and Ito drift
// (the divergence-form drift plus half the gradient of a).
struct MotionSpec {
  std::string kind = "brownian-drift";
  DomainKind domain = DomainKind::full_space;
  Boundary boundary = Boundary::absorbing;
  int dim = 1;
  VectorField drift;     // empty means zero
  Field diffusion{1.0};  // a(x)
  ExactSampler exact = ExactSampler::brownian;
  double kappa = 0.0;  // exact OU: drift -kappa x with constant a
  double dt = 1e-3;

  bool in_domain(const Point& x) const {
    if (domain == DomainKind::unit_interval) return x[0] > 0.0 && x[0] < 1.0;
    return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
  }

  Point drift_at(const Point& x) const { return drift ? drift(x) : Point{}; }

  // points used for grid suprema and validation
  std::vector<Point> sample_grid(int n = 241, double radius = 6.0) const {
    std::vector<Point> g;
    if (domain == DomainKind::unit_interval) {
      for (int i = 0; i < n; ++i) g.emplace_back((i + 0.5) / n);
      return g;
    }
    if (dim == 1) {
      for (int i = 0; i < n; ++i) g.emplace_back(-radius + 2.0 * radius * i / (n - 1));
      return g;
    }
    int m = dim == 2 ? 41 : 15;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < (dim == 3 ? m : 1); ++k) {
          Point p;
          p[0] = -radius + 2.0 * radius * i / (m - 1);
          p[1] = -radius + 2.0 * radius * j / (m - 1);
          if (dim == 3) p[2] = -radius + 2.0 * radius * k / (m - 1);
          g.push_back(p);
        }
    return g;
  }
};

inline MotionSpec make_ou(double gamma, int dim, bool inward = true, double dt = 1e-3) {
  MotionSpec m;
  m.kind = inward ? "ou-inward" : "ou-outward";
  m.dim = dim;
  m.kappa = inward ? gamma : -gamma;
  double k = m.kappa;
  m.drift = [k, dim](const Point& x) {
    Point d;
    for (int i = 0; i < dim; ++i) d[i] = -k * x[i];
    return d;
  };
  m.exact = ExactSampler::ou;
  m.dt = dt;
  return m;
}

inline MotionSpec make_brownian(int dim, Point drift = {}, double dt = 1e-3) {
  MotionSpec m;
  m.kind = "brownian-drift";
  m.dim = dim;
  bool zero = drift.norm2() == 0.0;
  if (!zero) m.drift = [drift](const Point&) { return drift; };
  m.exact = zero ? ExactSampler::brownian : ExactSampler::none;
  m.dt = dt;
  return m;
}

// neutral Wright-Fisher diffusion on (0,1), absorbed at the boundary
inline MotionSpec make_wright_fisher(double dt = 1e-3) {
  MotionSpec m;
  m.kind = "wright-fisher";
  m.domain = DomainKind::unit_interval;
  m.boundary = Boundary::absorbing;
  m.dim = 1;
  m.diffusion = Field(Field::Fn([](const Point& x) { return std::max(0.0, x[0] * (1.0 - x[0])); }));
  m.exact = ExactSampler::none;
  m.dt = dt;
  return m;
}

struct PathState {
  Point x;
  double t = 0.0;
  bool alive = true;
};

namespace detail {

inline bool reflect_into_unit(double& y) {
  for (int i = 0; i < 64; ++i) {
    if (y <= 0.0) y = -y;
    else if (y >= 1.0) y = 2.0 - y;
    else return true;
  }
  return false;
}

}  // namespace detail

// one Euler-Maruyama step
inline PathState step(const MotionSpec& m, PathState s, double dt, Stream& rng) {
  if (!s.alive) return s;
  if (!(dt > 0.0)) throw Error("step needs dt > 0");
  Point b = m.drift_at(s.x);
  double a = m.diffusion(s.x);
  double sd = std::sqrt(std::max(a, 0.0) * dt);
  for (int i = 0; i < m.dim; ++i) {
    if (!std::isfinite(b[i])) throw NumericBlowupError("non-finite drift");
    s.x[i] += b[i] * dt + sd * rng.normal();
  }
  s.t += dt;
  if (m.domain == DomainKind::unit_interval && !m.in_domain(s.x)) {
    if (m.boundary == Boundary::absorbing || !detail::reflect_into_unit(s.x[0])) s.alive = false;
  }
  if (m.domain == DomainKind::full_space && !m.in_domain(s.x)) s.alive = false;
  return s;
}

// Gaussian transition of dX = -kappa X dt + dW (kappa of either sign, or 0)
inline double ou_mean_factor(double kappa, double t) { return std::exp(-kappa * t); }
inline double ou_variance(double kappa, double t, double a = 1.0) {
  if (std::abs(kappa * t) < 1e-8) return a * t;
  return a * -std::expm1(-2.0 * kappa * t) / (2.0 * kappa);
}

inline Point exact_ou_sample(double gamma, bool inward, const Point& x, double t, Stream& rng, int dim = 1) {
  if (!(t >= 0.0)) throw Error("exact_ou_sample needs t >= 0");
  double k = inward ? gamma : -gamma;
  double f = ou_mean_factor(k, t), sd = std::sqrt(ou_variance(k, t));
  Point y;
  for (int i = 0; i < dim; ++i) y[i] = f * x[i] + sd * rng.normal();
  return y;
}

// move x forward by duration t; exact where possible, otherwise Euler sub-steps
// of at most m.dt. Returns false if the path reached the cemetery.
inline bool advance(const MotionSpec& m, Point& x, double t, Stream& rng) {
  if (t <= 0.0) return true;
  if (m.exact == ExactSampler::ou || m.exact == ExactSampler::brownian) {
    double a = m.diffusion.constant();
    double k = m.exact == ExactSampler::ou ? m.kappa : 0.0;
    double f = ou_mean_factor(k, t), sd = std::sqrt(ou_variance(k, t, a));
    for (int i = 0; i < m.dim; ++i) x[i] = f * x[i] + sd * rng.normal();
    return true;
  }
  int n = std::max(1, int(std::ceil(t / m.dt - 1e-9)));
  double h = t / n;
  PathState s{x, 0.0, true};
  for (int i = 0; i < n && s.alive; ++i) s = step(m, s, h, rng);
  x = s.x;
  return s.alive;
}

// positive C^2 function with analytic derivatives; gaussian_theta set when
// h = C exp(theta |x|^2), which keeps OU motions exactly samplable
struct HFunction {
  Field value{1.0};
  VectorField grad;  // empty means zero
  Field laplacian{0.0};
  std::optional<double> gaussian_theta;

  Point grad_at(const Point& x) const { return grad ? grad(x) : Point{}; }
  bool is_constant() const { return value.is_constant() && !grad; }

  static HFunction constant(double c) {
    HFunction h;
    h.value = Field(c);
    h.gaussian_theta = 0.0;
    return h;
  }

  // C exp(theta |x|^2) in dimension d
  static HFunction gaussian(double C, double theta, int dim) {
    HFunction h;
    h.value = Field(Field::Fn([=](const Point& x) { return C * std::exp(theta * x.norm2()); }));
    h.grad = [=](const Point& x) {
      double v = 2.0 * theta * C * std::exp(theta * x.norm2());
      Point g;
      for (int i = 0; i < dim; ++i) g[i] = v * x[i];
      return g;
    };
    h.laplacian = Field(Field::Fn([=](const Point& x) {
      return C * std::exp(theta * x.norm2()) * (2.0 * theta * dim + 4.0 * theta * theta * x.norm2());
    }));
    h.gaussian_theta = theta;
    return h;
  }

  // 1/h with derivatives from the chain rule
  HFunction reciprocal() const {
    HFunction r;
    HFunction h = *this;
    r.value = Field(1.0) / h.value;
    if (h.grad) {
      r.grad = [h](const Point& x) {
        double v = h.value(x);
        Point g = h.grad_at(x);
        for (double& c : g.c) c = -c / (v * v);
        return g;
      };
    }
    r.laplacian = Field(Field::Fn([h](const Point& x) {
      double v = h.value(x);
      Point g = h.grad_at(x);
      return -h.laplacian(x) / (v * v) + 2.0 * g.norm2() / (v * v * v);
    }));
    if (h.gaussian_theta) r.gaussian_theta = -*h.gaussian_theta;
    return r;
  }
};

// L h = 1/2 a Lap h + b_Ito . grad h
inline double generator_apply(const MotionSpec& m, const HFunction& h, const Point& x) {
  Point b = m.drift_at(x), g = h.grad_at(x);
  double dot = 0.0;
  for (int i = 0; i < m.dim; ++i) dot += b[i] * g[i];
  return 0.5 * m.diffusion(x) * h.laplacian(x) + dot;
}

// drift b + a grad h / h
inline MotionSpec transform_motion(const MotionSpec& m, const HFunction& h) {
  if (h.is_constant()) return m;
  MotionSpec r = m;
  MotionSpec base = m;
  r.drift = [base, h](const Point& x) {
    Point b = base.drift_at(x), g = h.grad_at(x);
    double v = h.value(x), a = base.diffusion(x);
    for (int i = 0; i < base.dim; ++i) b[i] += a * g[i] / v;
    return b;
  };
  if ((m.exact == ExactSampler::ou || m.exact == ExactSampler::brownian) && h.gaussian_theta &&
      m.diffusion.is_constant()) {
    double k = (m.exact == ExactSampler::ou ? m.kappa : 0.0) - 2.0 * m.diffusion.constant() * *h.gaussian_theta;
    r.kappa = k;
    r.exact = k == 0.0 ? ExactSampler::brownian : ExactSampler::ou;
    if (m.domain == DomainKind::full_space) r.kind = k > 0 ? "ou-inward" : (k < 0 ? "ou-outward" : "brownian-drift");
  } else {
    r.exact = ExactSampler::none;
  }
  return r;
}

// replace a function field by a constant when it is constant on the sample grid
inline Field collapse_if_constant(const Field& f, const MotionSpec& m) {
  if (f.is_constant()) return f;
  auto g = m.sample_grid(41);
  double v0 = f(g.front());
  for (const Point& x : g)
    if (std::abs(f(x) - v0) > 1e-12 * std::max(1.0, std::abs(v0))) return f;
  return Field(v0);
}

struct TransformedModel {
  MotionSpec motion;
  BranchingMechanism mechanism;
};

// L_0^h = L + a grad h/h . grad,  beta^h = (L + beta) h / h,  psi_0^h(z) = psi_0(hz)/h
inline TransformedModel h_transform(const MotionSpec& m, const BranchingMechanism& mech, const HFunction& h) {
  for (const Point& x : m.sample_grid(41)) {
    double v = h.value(x);
    Point g = h.grad_at(x);
    if (!(v > 0.0) || !std::isfinite(v) || !std::isfinite(g.norm2()) || !std::isfinite(h.laplacian(x)))
      throw InvalidHError("h must be positive and finite with finite derivatives");
  }
  TransformedModel r;
  r.motion = transform_motion(m, h);
  if (h.is_constant()) {
    double c = h.value.constant();
    r.mechanism = {mech.beta, mech.alpha * Field(c), mech.pi.h_transform(h.value)};
    return r;
  }
  MotionSpec base = m;
  Field beta = mech.beta;
  r.mechanism.beta = Field(Field::Fn([base, beta, h](const Point& x) {
    return beta(x) + generator_apply(base, h, x) / h.value(x);
  }));
  r.mechanism.beta = collapse_if_constant(r.mechanism.beta, m);
  r.mechanism.alpha = mech.alpha * h.value;
  r.mechanism.pi = mech.pi.h_transform(h.value);
  return r;
}

}  // namespace skelsim
