#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "skelsim/errors.hpp"

namespace skelsim {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// e^{-x} - 1 + x without cancellation near 0
inline double em1x(double x) {
  if (std::abs(x) < 1e-2) {
    double x2 = x * x;
    return x2 * (0.5 - x / 6.0 + x2 / 24.0 - x2 * x / 120.0 + x2 * x2 / 720.0);
  }
  return std::expm1(-x) + x;
}

// adaptive Gauss-Kronrod on [a,b]
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-10, double* err = nullptr) {
  double e = 0.0, l1 = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, rel_tol, &e, &l1);
  if (err) *err = e;
  if (!std::isfinite(v)) throw IntegrationError("quadrature produced a non-finite value", e);
  if (e > 1e3 * rel_tol * std::max(l1, 1e-300) && e > 1e-13) throw IntegrationError("quadrature did not converge", e);
  return v;
}

// integral over (0,inf) of a function of y, done in u = log y so that power
// singularities at 0 and algebraic tails become exponential decay
template <class F>
double integrate_positive_line(F&& f, double rel_tol = 1e-10, double* err = nullptr) {
  boost::math::quadrature::exp_sinh<double> es;
  auto g = [&](double u) {
    double y = std::exp(u);
    double v = f(y) * y;
    return std::isfinite(v) ? v : 0.0;
  };
  double e1 = 0, e2 = 0, l1 = 0, l2 = 0;
  double right = es.integrate(g, 0.0, std::numeric_limits<double>::infinity(), rel_tol, &e1, &l1);
  double left = es.integrate([&](double u) { return g(-u); }, 0.0, std::numeric_limits<double>::infinity(), rel_tol, &e2,
                             &l2);
  double e = e1 + e2;
  if (err) *err = e;
  double l = l1 + l2;
  if (!std::isfinite(left + right)) throw IntegrationError("quadrature produced a non-finite value", e);
  if (e > 1e3 * rel_tol * std::max(l, 1e-300) && e > 1e-13) throw IntegrationError("quadrature did not converge", e);
  return left + right;
}

// int_L^inf y^{p-1} e^{-B y} dy  (B >= 0; B = 0 needs p < 0 and L > 0)
inline double upper_power_exp(double p, double B, double L) {
  if (B <= 0.0) {
    if (p >= 0.0 || L <= 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(L, p) / (-p);
  }
  double x = B * L;
  if (p > 0.0) {
    double g = x > 0.0 ? boost::math::tgamma(p, x) : std::tgamma(p);
    return g * std::pow(B, -p);
  }
  if (x <= 0.0) return std::numeric_limits<double>::infinity();
  // Gamma(p,x) = (Gamma(p+1,x) - x^p e^{-x}) / p, stepped up to a positive parameter
  int n = int(std::floor(-p)) + 1;
  double g = boost::math::tgamma(p + n, x);
  for (int j = n - 1; j >= 0; --j) {
    double pj = p + j;
    g = (g - std::pow(x, pj) * std::exp(-x)) / pj;
  }
  return g * std::pow(B, -p);
}

// int_0^U y^{p-1} e^{-B y} dy  (p > 0)
inline double lower_power_exp(double p, double B, double U) {
  if (U <= 0.0) return 0.0;
  if (B <= 0.0) return std::pow(U, p) / p;
  return boost::math::tgamma_lower(p, B * U) * std::pow(B, -p);
}

struct MeanSe {
  double mean = 0.0, se = 0.0, sd = 0.0;
  std::size_t n = 0;
};

// Welford accumulator; merge is associative given a fixed order
struct Accumulator {
  std::size_t n = 0;
  double mean = 0.0, m2 = 0.0;

  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / double(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / double(n - 1) : 0.0; }
  double se() const { return n > 1 ? std::sqrt(variance() / double(n)) : 0.0; }
  MeanSe summary() const { return {mean, se(), std::sqrt(variance()), n}; }
};

inline MeanSe mean_se(std::span<const double> xs) {
  Accumulator a;
  for (double x : xs) a.add(x);
  return a.summary();
}

// sample variance with its standard error (normal-free, via fourth central moment)
struct VarianceEstimate {
  double var = 0.0, se = 0.0;
};

inline VarianceEstimate variance_se(std::span<const double> xs) {
  std::size_t n = xs.size();
  if (n < 4) return {};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= double(n);
  double s2 = 0.0, s4 = 0.0;
  for (double x : xs) {
    double d = (x - m) * (x - m);
    s2 += d;
    s4 += d * d;
  }
  double mu2 = s2 / double(n), mu4 = s4 / double(n);
  double var = s2 / double(n - 1);
  double v = (mu4 - mu2 * mu2 * (double(n) - 3.0) / (double(n) - 1.0)) / double(n);
  return {var, std::sqrt(std::max(v, 0.0))};
}

inline double correlation(std::span<const double> a, std::span<const double> b) {
  std::size_t n = std::min(a.size(), b.size());
  if (n < 2) return 0.0;
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= double(n);
  mb /= double(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

struct LineFit {
  double intercept = 0.0, slope = 0.0, slope_se = 0.0;
};

// ordinary least squares y = a + b t with classical slope SE
inline LineFit fit_line(std::span<const double> t, std::span<const double> y) {
  std::size_t n = std::min(t.size(), y.size());
  LineFit r;
  if (n < 2) return r;
  double mt = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= double(n);
  my /= double(n);
  double stt = 0, sty = 0;
  for (std::size_t i = 0; i < n; ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    sty += (t[i] - mt) * (y[i] - my);
  }
  if (stt <= 0) return r;
  r.slope = sty / stt;
  r.intercept = my - r.slope * mt;
  if (n > 2) {
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = y[i] - r.intercept - r.slope * t[i];
      sse += e * e;
    }
    r.slope_se = std::sqrt(sse / double(n - 2) / stt);
  }
  return r;
}

// two-sided Kolmogorov distribution tail P(K > x)
inline double kolmogorov_pvalue(double d, std::size_t n) {
  double sn = std::sqrt(double(n));
  double x = (sn + 0.12 + 0.11 / sn) * d;
  if (x < 1e-3) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

// one-sample KS statistic against a continuous cdf
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf&& cdf) {
  std::sort(xs.begin(), xs.end());
  double n = double(xs.size()), d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double F = cdf(xs[i]);
    d = std::max({d, double(i + 1) / n - F, F - double(i) / n});
  }
  return d;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * double(i) / double(n - 1);
  return v;
}

}  // namespace skelsim
