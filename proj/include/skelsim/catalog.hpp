#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/sinh_sinh.hpp>

#include "skelsim/mechanism.hpp"
#include "skelsim/motion.hpp"
#include "skelsim/report.hpp"
#include "skelsim/testfunction.hpp"

namespace skelsim {

struct EigenData {
  double lambda_c = std::numeric_limits<double>::quiet_NaN();
  HFunction phi;
  Field phi_tilde{1.0};
  HFunction w;  // midpoint of the envelope when only bounds are known
  std::optional<std::pair<Field, Field>> w_envelope;
  bool closed_form = true;
};

// spread function a(t) and constant K for the skeleton SLLN conditions
struct SllnConditions {
  std::function<double(double)> spread;
  double K = 1.0;
  double delta = 0.5;
  double epsilon = 0.25;
  bool whole_domain = false;  // D_t = D
  std::string note;
};

struct ExampleCard {
  std::string name, summary;
  MotionSpec motion;
  BranchingMechanism mechanism;
  EigenData eigen;
  std::optional<SllnConditions> conditions;
  double p = 2.0;
  bool partial = false;
  bool simulable = true;
  std::vector<std::pair<std::string, double>> params;

  MotionSpec spine_motion() const {
    MotionSpec m = transform_motion(motion, eigen.phi);
    if (m.domain == DomainKind::unit_interval) m.boundary = Boundary::reflecting;
    return m;
  }
  MotionSpec skeleton_motion() const { return transform_motion(motion, eigen.w); }

  double phi(const Point& x) const { return eigen.phi.value(x); }
  double w(const Point& x) const { return eigen.w.value(x); }
  double stationary_density(const Point& x) const { return eigen.phi.value(x) * eigen.phi_tilde(x); }

  // c * phi as a test function, keeping closed forms for constant and Gaussian phi
  TestFunction phi_function(double c = 1.0) const {
    std::ostringstream os;
    os << c << "*phi";
    if (eigen.phi.is_constant()) {
      TestFunction t = TestFunction::constant_fn(c * eigen.phi.value.constant());
      t.label = os.str();
      return t;
    }
    if (eigen.phi.gaussian_theta && *eigen.phi.gaussian_theta < 0.0 && motion.dim == 1) {
      double th = -*eigen.phi.gaussian_theta;
      TestFunction t = TestFunction::bump(c * eigen.phi.value(Point{}), 0.0, std::sqrt(0.5 / th));
      t.label = os.str();
      return t;
    }
    return TestFunction::from_field(Field(c) * eigen.phi.value, os.str());
  }

  // Gaussian transition of the spine when it is an OU process (d = 1)
  std::optional<double> spine_kappa() const {
    MotionSpec s = spine_motion();
    if (s.exact == ExactSampler::ou) return s.kappa;
    if (s.exact == ExactSampler::brownian) return 0.0;
    return std::nullopt;
  }
};

namespace cards {

inline double gauss_norm(double gamma, int d) { return std::pow(gamma / std::numbers::pi, d / 2.0); }

inline ExampleCard inward_ou(std::string name, double gamma, double beta, double alpha, LevyKernel pi, int d = 1,
                             double p = 2.0) {
  ExampleCard c;
  c.name = std::move(name);
  c.summary = "inward OU motion, spatially constant mechanism; phi = 1, lambda_c = beta";
  c.motion = make_ou(gamma, d, true);
  c.mechanism = {Field(beta), Field(alpha), std::move(pi)};
  auto z = csbp_root(c.mechanism);
  if (!z) throw ConfigError("inward-ou card needs a supercritical mechanism");
  c.eigen.lambda_c = beta;
  c.eigen.phi = HFunction::constant(1.0);
  double C = gauss_norm(gamma, d);
  c.eigen.phi_tilde = Field(Field::Fn([=](const Point& x) { return C * std::exp(-gamma * x.norm2()); }));
  c.eigen.w = HFunction::constant(*z);
  SllnConditions s;
  s.delta = 0.5;
  s.epsilon = 0.25 * gamma;
  double lam = beta, del = s.delta;
  s.spread = [=](double t) { return std::sqrt((lam / gamma + del) * t); };
  s.K = 1.0;
  c.conditions = s;
  c.p = p;
  c.params = {{"gamma", gamma}, {"beta", beta}, {"alpha", alpha}, {"dim", d}, {"p", p}};
  return c;
}

inline ExampleCard outward_ou(std::string name, double gamma, double beta, double alpha, LevyKernel pi, int d = 1) {
  if (!(beta > gamma * d)) throw ConfigError("outward-ou card needs beta > gamma d");
  ExampleCard c;
  c.name = std::move(name);
  c.summary = "outward OU motion, spatially constant mechanism; lambda_c = beta - gamma d, spine is inward OU";
  c.motion = make_ou(gamma, d, false);
  c.mechanism = {Field(beta), Field(alpha), std::move(pi)};
  auto z = csbp_root(c.mechanism);
  if (!z) throw ConfigError("outward-ou card needs a supercritical mechanism");
  c.eigen.lambda_c = beta - gamma * d;
  c.eigen.phi = HFunction::gaussian(gauss_norm(gamma, d), -gamma, d);
  c.eigen.phi_tilde = Field(1.0);
  c.eigen.w = HFunction::constant(*z);
  SllnConditions s;
  s.delta = 0.5;
  s.epsilon = 0.25;
  double del = s.delta;
  s.spread = [=](double t) { return std::exp(gamma * (1.0 + del) * t); };
  s.K = 2.0;
  c.conditions = s;
  c.params = {{"gamma", gamma}, {"beta", beta}, {"alpha", alpha}, {"dim", d}};
  return c;
}

inline ExampleCard unbounded_w(double gamma = 1.0, double beta = 1.0, int d = 1) {
  ExampleCard c;
  c.name = "unbounded-w";
  c.summary = "inward OU motion, alpha(x) = exp(-gamma|x|^2); w(x) = (beta + gamma d) exp(gamma|x|^2)";
  c.motion = make_ou(gamma, d, true);
  c.mechanism.beta = Field(beta);
  c.mechanism.alpha = Field(Field::Fn([=](const Point& x) { return std::exp(-gamma * x.norm2()); }));
  c.eigen.lambda_c = beta;
  c.eigen.phi = HFunction::constant(1.0);
  double C = gauss_norm(gamma, d);
  c.eigen.phi_tilde = Field(Field::Fn([=](const Point& x) { return C * std::exp(-gamma * x.norm2()); }));
  c.eigen.w = HFunction::gaussian(beta + gamma * d, gamma, d);
  SllnConditions s;
  s.delta = 0.5;
  s.epsilon = 0.25;
  double del = s.delta;
  s.spread = [=](double t) { return std::exp(gamma * (1.0 + del) * t); };
  s.K = 2.0;
  c.conditions = s;
  c.params = {{"gamma", gamma}, {"beta", beta}, {"dim", d}};
  return c;
}

// alpha = kappa(x)/phi with kappa in [1, 1.5], so w is known only up to the envelope
inline ExampleCard unbounded_beta(double gamma = 1.0, double c1 = 0.375, double c2 = 1.0, int d = 1) {
  if (!(gamma * gamma > 2.0 * c1)) throw ConfigError("unbounded-beta card needs gamma^2 > 2 c1");
  ExampleCard c;
  c.name = "unbounded-beta";
  c.summary = "inward OU motion, beta(x) = c1|x|^2 + c2, alpha comparable to 1/phi; w known up to an envelope";
  c.motion = make_ou(gamma, d, true);
  double root = std::sqrt(gamma * gamma - 2.0 * c1);
  double th = 0.5 * (gamma - root);
  double lam = c2 + d * th;
  c.mechanism.beta = Field(Field::Fn([=](const Point& x) { return c1 * x.norm2() + c2; }));
  c.mechanism.alpha =
      Field(Field::Fn([=](const Point& x) { return (1.0 + 0.5 / (1.0 + x.norm2())) * std::exp(-th * x.norm2()); }));
  c.eigen.lambda_c = lam;
  c.eigen.phi = HFunction::gaussian(1.0, th, d);
  double C = std::pow((gamma - 2.0 * th) / std::numbers::pi, d / 2.0);
  c.eigen.phi_tilde = Field(Field::Fn([=](const Point& x) { return C * std::exp((th - gamma) * x.norm2()); }));
  double lo = lam / 1.5, hi = lam / 1.0;
  c.eigen.w = HFunction::gaussian(0.5 * (lo + hi), th, d);
  c.eigen.w_envelope = std::make_pair(Field(Field::Fn([=](const Point& x) { return lo * std::exp(th * x.norm2()); })),
                                      Field(Field::Fn([=](const Point& x) { return hi * std::exp(th * x.norm2()); })));
  SllnConditions s;
  s.delta = 0.5;
  s.epsilon = 0.25 * root;
  double del = s.delta;
  s.spread = [=](double t) { return std::sqrt((lam / root + del) * t); };
  s.K = 1.0;
  s.note = "spread uses the OU rate of the phi-transformed motion";
  c.conditions = s;
  c.simulable = false;
  c.params = {{"gamma", gamma}, {"c1", c1}, {"c2", c2}, {"dim", d}, {"theta", th}};
  return c;
}

// Brownian motion with a compactly supported drift and compactly supported beta.
// Eigendata are known only as two-sided estimates against
// rho(x) = |x|^{(1-d)/2} exp(-sqrt(2 lambda_c)|x|), with lambda_c itself not in closed form.
inline ExampleCard nonsymmetric_compact_drift(double theta = 2.0) {
  ExampleCard c;
  c.name = "nonsymmetric-compact-drift";
  c.summary = "Brownian motion with compactly supported drift; eigendata known up to constants (partial)";
  c.motion = make_brownian(1);
  c.motion.kind = "brownian-drift";
  c.motion.exact = ExactSampler::none;
  c.motion.drift = [](const Point& x) {
    double u = x[0];
    double v = std::abs(u) < 1.0 ? (1.0 - u * u) * (1.0 - u * u) * (0.5 + 0.5 * u) : 0.0;
    return Point(v);
  };
  auto bump = [](const Point& x) {
    double u = x[0];
    return std::abs(u) < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
  };
  c.mechanism.beta = Field(Field::Fn([=](const Point& x) { return theta * bump(x); }));
  c.mechanism.alpha = Field(Field::Fn([](const Point& x) { return std::exp(std::abs(x[0])); }));
  c.eigen.closed_form = false;
  c.eigen.phi = HFunction::constant(std::numeric_limits<double>::quiet_NaN());
  c.eigen.phi_tilde = Field(std::numeric_limits<double>::quiet_NaN());
  c.eigen.w = HFunction::constant(std::numeric_limits<double>::quiet_NaN());
  SllnConditions s;
  double bsup = theta;
  s.spread = [=](double t) { return std::sqrt(2.0 * bsup) * t; };
  s.K = std::numeric_limits<double>::quiet_NaN();
  s.note = "K > 1/sqrt(2 lambda_c) with lambda_c not available in closed form";
  c.conditions = s;
  c.partial = true;
  c.simulable = false;
  c.params = {{"theta", theta}, {"dim", 1}};
  return c;
}

// neutral Wright-Fisher motion on (0,1) killed at the boundary; beta, alpha constant
inline ExampleCard wright_fisher(double beta = 2.0, double alpha = 1.0) {
  if (!(beta > 1.0)) throw ConfigError("wright-fisher card needs beta > 1");
  ExampleCard c;
  c.name = "wright-fisher";
  c.summary = "Wright-Fisher diffusion on (0,1); phi = 6x(1-x), phi~ = 1, lambda_c = beta - 1";
  c.motion = make_wright_fisher();
  c.mechanism = {Field(beta), Field(alpha), LevyKernel::none()};
  c.eigen.lambda_c = beta - 1.0;
  HFunction phi;
  phi.value = Field(Field::Fn([](const Point& x) { return 6.0 * x[0] * (1.0 - x[0]); }));
  phi.grad = [](const Point& x) { return Point(6.0 - 12.0 * x[0]); };
  phi.laplacian = Field(-12.0);
  c.eigen.phi = phi;
  c.eigen.phi_tilde = Field(1.0);
  double lo_c = (beta - 1.0) / (1.5 * alpha), hi = beta / alpha;
  HFunction w;
  w.value = Field(Field::Fn([=](const Point& x) { return 0.5 * (lo_c * 6.0 * x[0] * (1.0 - x[0]) + hi); }));
  w.grad = [=](const Point& x) { return Point(0.5 * lo_c * (6.0 - 12.0 * x[0])); };
  w.laplacian = Field(-6.0 * lo_c);
  c.eigen.w = w;
  c.eigen.w_envelope = std::make_pair(Field(Field::Fn([=](const Point& x) { return lo_c * 6.0 * x[0] * (1.0 - x[0]); })),
                                      Field(hi));
  SllnConditions s;
  s.whole_domain = true;
  s.K = 1.0;
  s.spread = [](double) { return std::numeric_limits<double>::infinity(); };
  s.note = "D_t = D, so the support condition is vacuous";
  c.conditions = s;
  c.params = {{"beta", beta}, {"alpha", alpha}};
  return c;
}

}  // namespace cards

inline std::vector<std::string> catalog_names() {
  return {"inward-ou-quadratic", "inward-ou-tempered", "inward-ou-heavy-tail", "outward-ou-quadratic",
          "unbounded-w",         "unbounded-beta",     "nonsymmetric-compact-drift", "wright-fisher"};
}

inline ExampleCard card(const std::string& name) {
  if (name == "inward-ou-quadratic" || name == "inward-ou")
    return cards::inward_ou("inward-ou-quadratic", 1.0, 1.0, 1.0, LevyKernel::none());
  if (name == "inward-ou-tempered") {
    auto c = cards::inward_ou(name, 1.0, 1.0, 1.0, LevyKernel::tempered(0.7, 1.0, 1.0));
    c.summary += "; tempered power-law jumps y^{-1.7} e^{-y}";
    return c;
  }
  if (name == "inward-ou-heavy-tail") {
    // Pi(dy) = y^{-2.7} dy: all moments of order < 1.7 finite, no second moment
    auto c = cards::inward_ou(name, 1.0, 1.0, 1.0, LevyKernel::tempered(1.7, 0.0, 1.0), 1, 1.5);
    c.summary += "; untempered jumps y^{-2.7}, moments of order p < 1.7 only";
    return c;
  }
  if (name == "outward-ou-quadratic" || name == "outward-ou")
    return cards::outward_ou("outward-ou-quadratic", 1.0, 2.0, 1.0, LevyKernel::none());
  if (name == "unbounded-w") return cards::unbounded_w();
  if (name == "unbounded-beta") return cards::unbounded_beta();
  if (name == "nonsymmetric-compact-drift") return cards::nonsymmetric_compact_drift();
  if (name == "wright-fisher") return cards::wright_fisher();
  throw UnknownNameError("unknown catalog card '" + name + "'");
}

inline EigenData eigendata(const std::string& name) { return card(name).eigen; }
inline HFunction martingale_function(const std::string& name) { return card(name).eigen.w; }

// integral over the card's domain (d = 1)
template <class F>
double domain_integral(const MotionSpec& m, F&& f, double rel_tol = 1e-10) {
  if (m.dim != 1) throw UnsupportedError("domain quadrature is implemented for d = 1");
  if (m.domain == DomainKind::unit_interval) return integrate([&](double x) { return f(Point(x)); }, 0.0, 1.0, rel_tol);
  boost::math::quadrature::sinh_sinh<double> ss;
  double err = 0.0;
  double v = ss.integrate([&](double x) {
    double y = f(Point(x));
    return std::isfinite(y) ? y : 0.0;
  }, rel_tol, &err);
  return v;
}

namespace detail {

// sup of g over the inner half-box and the full box; a bounded function should not grow
inline std::pair<double, double> grid_sup_growth(const MotionSpec& m, const std::function<double(const Point&)>& g) {
  double inner = 0.0, outer = 0.0;
  if (m.domain == DomainKind::unit_interval) {
    for (const auto& x : m.sample_grid(401)) inner = std::max(inner, std::abs(g(x)));
    for (int i = 1; i < 2000; ++i) outer = std::max(outer, std::abs(g(Point(i / 2000.0))));
    return {inner, outer};
  }
  for (const auto& x : m.sample_grid(241, 6.0)) inner = std::max(inner, std::abs(g(x)));
  for (const auto& x : m.sample_grid(241, 12.0)) outer = std::max(outer, std::abs(g(x)));
  return {inner, outer};
}

inline RunReport bounded_check(const std::string& name, const MotionSpec& m,
                               const std::function<double(const Point&)>& g) {
  auto [inner, outer] = grid_sup_growth(m, g);
  RunReport r = RunReport::at_most(name, outer, std::max(2.0 * inner, 1e-300));
  if (!std::isfinite(outer)) r.pass = false;
  if (inner == 0.0 && outer == 0.0) r.pass = true;
  std::ostringstream os;
  os << "grid sup " << inner << " (inner box), " << outer << " (doubled box)";
  r.note = os.str();
  return r;
}

}  // namespace detail

// moment, criticality and martingale-function checks on a sample grid
inline std::vector<RunReport> validate_assumptions(const ExampleCard& c) {
  std::vector<RunReport> out;
  if (c.partial || !c.eigen.closed_form) {
    out.push_back(RunReport::info("partial-card", 0.0, "eigendata known only up to constants; checks skipped"));
    auto r = detail::bounded_check("phi-alpha-sup", c.motion, [&](const Point& x) {
      double ax = std::abs(x[0]);
      double rho = std::exp(-std::sqrt(2.0) * ax);
      return rho * c.mechanism.alpha(x);
    });
    r.note += " (rho envelope with unit rate)";
    out.push_back(r);
    return out;
  }
  const auto& m = c.motion;
  const auto& mech = c.mechanism;
  double p = c.p;
  auto phi = [&](const Point& x) { return c.phi(x); };

  out.push_back(RunReport::at_least("lambda-positive", c.eigen.lambda_c, 1e-300));

  if (m.dim == 1) {
    double norm = domain_integral(m, [&](const Point& x) { return c.stationary_density(x); });
    auto r = RunReport::at_most("phi-phitilde-normalized", std::abs(norm - 1.0), 1e-8);
    r.oracle = 1.0;
    r.note = "<phi,phi~> = " + std::to_string(norm);
    out.push_back(r);
  }

  out.push_back(detail::bounded_check("phi-alpha-sup", m, [&](const Point& x) { return phi(x) * mech.alpha(x); }));

  if (!mech.pi.is_zero()) {
    out.push_back(detail::bounded_check("pi-lower-tail", m, [&](const Point& x) {
      return phi(x) * mech.pi.power_integral(x, 2.0, 0.0, 0.0, 1.0);
    }));
    out.push_back(detail::bounded_check("pi-upper-tail-p", m, [&](const Point& x) {
      return std::pow(phi(x), p - 1.0) * mech.pi.power_integral(x, p, 0.0, 1.0);
    }));
  }

  if (m.dim == 1) {
    double v = domain_integral(m, [&](const Point& x) { return std::pow(phi(x), p - 1.0) * c.stationary_density(x); });
    auto r = RunReport::at_most("phi-p-moment", v, 1e300);
    if (!std::isfinite(v)) r.pass = false;
    out.push_back(r);
    if (!mech.pi.is_zero()) {
      double u = domain_integral(m, [&](const Point& x) {
        return mech.pi.power_integral(x, 2.0, c.w(x), 1.0) * c.stationary_density(x);
      });
      auto r2 = RunReport::at_most("lattice-continuity", u, 1e300);
      if (!std::isfinite(u)) r2.pass = false;
      out.push_back(r2);
    }
  }

  {
    double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
    for (const auto& x : m.sample_grid(121, 3.0)) {
      double v = c.w(x);
      wmin = std::min(wmin, v);
      wmax = std::max(wmax, v);
    }
    auto r = RunReport::at_most("w-locally-bounded", wmax, 1e300);
    r.pass = std::isfinite(wmax) && wmin > 0.0;
    r.note = "w in [" + std::to_string(wmin) + ", " + std::to_string(wmax) + "] on a compact";
    if (c.eigen.w_envelope) r.note += "; envelope midpoint";
    out.push_back(r);
  }
  return out;
}

// P^phi_x[g(xi_t)] for cards with an OU spine (closed form or quadrature),
// or the stationary value for late times otherwise
inline double spine_expectation(const ExampleCard& c, const TestFunction& g, const Point& x, double t,
                                double fallback_horizon = 20.0) {
  if (t <= 0.0) return g(x);
  auto kappa = c.spine_kappa();
  if (kappa && c.motion.dim == 1) {
    double a = c.spine_motion().diffusion.constant();
    double mean = ou_mean_factor(*kappa, t) * x[0], var = ou_variance(*kappa, t, a);
    return gaussian_average(g, mean, var);
  }
  if (c.eigen.closed_form && c.motion.dim == 1 && t >= fallback_horizon)
    return domain_integral(c.motion, [&](const Point& y) { return g(y) * c.stationary_density(y); });
  throw UnsupportedError("no spine transition density for card '" + c.name + "' at this time");
}

struct ConditionCurves {
  std::vector<double> t, support, support_threshold, ergodic;
  std::vector<RunReport> reports;
};

// the two skeleton SLLN conditions: support tail of the spine
// weighted by w/phi against exp(-(lambda_c + eps) t), and the uniform
// ergodic-speed deviation at time K t
inline ConditionCurves check_slln_skeleton_conditions(const ExampleCard& c, double step = 0.5, double horizon = 20.0,
                                                      double t_start = 1.0) {
  ConditionCurves cc;
  if (!c.conditions) {
    cc.reports.push_back(RunReport::info("slln-conditions", 0.0, "card carries no spread function"));
    return cc;
  }
  const auto& s = *c.conditions;
  if (s.whole_domain) {
    cc.reports.push_back(RunReport::info("support-condition", 0.0, "vacuous: D_t = D"));
    cc.reports.push_back(RunReport::info("ergodic-condition", 0.0, "no closed-form spine density; not evaluated"));
    return cc;
  }
  auto kappa = c.spine_kappa();
  if (!kappa || c.motion.dim != 1 || !c.eigen.closed_form) {
    cc.reports.push_back(RunReport::info("slln-conditions", 0.0, "needs an OU spine in d = 1; not evaluated"));
    return cc;
  }
  double lam = c.eigen.lambda_c, k = *kappa;
  auto w_over_phi = [&](double y) {
    Point p(y);
    double w = c.eigen.w_envelope ? c.eigen.w_envelope->second(p) : c.w(p);
    return w / c.phi(p);
  };
  bool support_ok = true;
  for (double t = t_start; t <= horizon + 1e-9; t += step) {
    double a = s.spread(t);
    double mean = 0.0, var = ou_variance(k, t), sd = std::sqrt(var);
    // integrate in u = y - a over [0, inf) on both sides of the origin
    boost::math::quadrature::exp_sinh<double> es;
    auto side = [&](double sign) {
      auto g = [&](double u) {
        double y = sign * (a + u);
        double lp = -0.5 * (y - mean) * (y - mean) / var;
        double v = std::exp(lp + std::log(w_over_phi(y))) / (sd * std::sqrt(2.0 * std::numbers::pi));
        return std::isfinite(v) ? v : 0.0;
      };
      if (!std::isfinite(a)) return 0.0;
      return es.integrate(g, 0.0, std::numeric_limits<double>::infinity(), 1e-9);
    };
    double val = side(1.0) + side(-1.0);
    double thr = std::exp(-(lam + s.epsilon) * t);
    cc.t.push_back(t);
    cc.support.push_back(val);
    cc.support_threshold.push_back(thr);
    if (val > thr) support_ok = false;

    double Kt = s.K * t, mf = ou_mean_factor(k, Kt), vk = ou_variance(k, Kt), dev = 0.0;
    for (int i = 0; i <= 200; ++i) {
      double y1 = -a + 2.0 * a * i / 200.0;
      for (int j = 0; j <= 40; ++j) {
        double y2 = -1.0 + 2.0 * j / 40.0;
        double dens = normal_pdf((y2 - mf * y1) / std::sqrt(vk)) / std::sqrt(vk);
        double st = c.stationary_density(Point(y2));
        double d = std::abs(dens / st - 1.0);
        dev = std::max(dev, std::isfinite(d) ? d : std::numeric_limits<double>::infinity());
      }
    }
    cc.ergodic.push_back(dev);
  }
  auto r1 = RunReport::at_most("support-condition", support_ok ? 0.0 : 1.0, 0.0);
  r1.note = "P^phi_0[1{|xi_t|>=a(t)} w/phi] <= exp(-(lambda_c+eps)t) on the whole t-grid";
  cc.reports.push_back(r1);
  bool decreasing = true;
  for (std::size_t i = cc.ergodic.size() / 2; i + 1 < cc.ergodic.size(); ++i)
    if (cc.ergodic[i + 1] > cc.ergodic[i] * (1.0 + 1e-9) + 1e-12) decreasing = false;
  auto r2 = RunReport::at_most("ergodic-condition", cc.ergodic.empty() ? 0.0 : cc.ergodic.back(), 0.05);
  r2.pass = r2.pass && decreasing;
  r2.note = "sup |p^phi(y1,y2,Kt)/(phi phi~)(y2) - 1| over |y1|<a(t), y2 in [-1,1]; nonincreasing on the late half";
  cc.reports.push_back(r2);
  return cc;
}

}  // namespace skelsim
