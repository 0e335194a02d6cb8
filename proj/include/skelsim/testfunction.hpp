#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "skelsim/errors.hpp"
#include "skelsim/field.hpp"
#include "skelsim/numerics.hpp"

namespace skelsim {

// test functions f >= 0 named in run configs
struct TestFunction {
  enum class Kind { indicator_interval, gaussian_bump, constant, monomial, field };

  Kind kind = Kind::constant;
  std::string label = "1";
  double lo = -1.0, hi = 1.0;                      // indicator-interval
  double amp = 1.0, center = 0.0, width = 1.0;     // gaussian-bump: amp exp(-(x-c)^2/(2 width^2))
  double power = 2.0;                              // monomial |x|^power
  int dim = 1;
  Field f;                                         // generic field
  std::vector<double> cuts;                        // discontinuities of a generic field

  static TestFunction indicator(double lo, double hi, int dim = 1) {
    TestFunction t;
    t.kind = Kind::indicator_interval;
    t.lo = lo;
    t.hi = hi;
    t.dim = dim;
    std::ostringstream os;
    os << "1[" << lo << "," << hi << "]";
    t.label = os.str();
    return t;
  }
  static TestFunction bump(double amp, double center, double width, int dim = 1) {
    TestFunction t;
    t.kind = Kind::gaussian_bump;
    t.amp = amp;
    t.center = center;
    t.width = width;
    t.dim = dim;
    std::ostringstream os;
    os << amp << "*bump(" << center << "," << width << ")";
    t.label = os.str();
    return t;
  }
  static TestFunction constant_fn(double c) {
    TestFunction t;
    t.kind = Kind::constant;
    t.amp = c;
    std::ostringstream os;
    os << c;
    t.label = os.str();
    return t;
  }
  static TestFunction monomial(double power) {
    TestFunction t;
    t.kind = Kind::monomial;
    t.power = power;
    t.label = "|x|^" + std::to_string(power);
    return t;
  }
  static TestFunction from_field(Field f, std::string label) {
    if (f.is_constant()) {
      TestFunction t = constant_fn(f.constant());
      t.label = std::move(label);
      return t;
    }
    TestFunction t;
    t.kind = Kind::field;
    t.f = std::move(f);
    t.label = std::move(label);
    return t;
  }

  double operator()(const Point& x) const {
    switch (kind) {
      case Kind::indicator_interval:
        for (int i = 0; i < dim; ++i)
          if (x[i] < lo || x[i] > hi) return 0.0;
        return 1.0;
      case Kind::gaussian_bump: {
        Point d = x;
        d[0] -= center;
        return amp * std::exp(-d.norm2() / (2.0 * width * width));
      }
      case Kind::constant: return amp;
      case Kind::monomial: return std::pow(x.norm(), power);
      case Kind::field: return f(x);
    }
    return 0.0;
  }

  TestFunction scaled(double c) const {
    TestFunction t = *this;
    switch (kind) {
      case Kind::gaussian_bump:
      case Kind::constant: t.amp *= c; break;
      default: {
        TestFunction base = *this;
        t.kind = Kind::field;
        t.f = Field(Field::Fn([base, c](const Point& x) { return c * base(x); }));
      }
    }
    std::ostringstream os;
    os << c << "*" << label;
    t.label = os.str();
    return t;
  }

  // E f(m + sqrt(v) N) in d = 1, when a closed form exists
  std::optional<double> gaussian_expectation(double m, double v) const {
    if (dim != 1) return std::nullopt;
    double s = std::sqrt(std::max(v, 0.0));
    switch (kind) {
      case Kind::indicator_interval:
        if (s == 0.0) return (m >= lo && m <= hi) ? 1.0 : 0.0;
        return normal_cdf((hi - m) / s) - normal_cdf((lo - m) / s);
      case Kind::gaussian_bump: {
        double w2 = width * width;
        return amp * width / std::sqrt(w2 + v) * std::exp(-(m - center) * (m - center) / (2.0 * (w2 + v)));
      }
      case Kind::constant: return amp;
      default: return std::nullopt;
    }
  }

  // points where f is not smooth, for quadrature splitting
  std::vector<double> breakpoints() const {
    if (kind == Kind::indicator_interval) return {lo, hi};
    if (kind == Kind::field) return cuts;
    return {};
  }

  double sup_norm(const std::vector<Point>& grid) const {
    double s = 0.0;
    for (const auto& x : grid) s = std::max(s, std::abs((*this)(x)));
    return s;
  }
};

// E f(m + sqrt(v) N) in d = 1, by quadrature split at the breakpoints when no closed form exists
inline double gaussian_average(const TestFunction& g, double mean, double var) {
  if (auto v = g.gaussian_expectation(mean, var)) return *v;
  double s = std::sqrt(var);
  if (s == 0.0) return g(Point(mean));
  std::vector<double> cuts{mean - 12.0 * s};
  for (double b : g.breakpoints())
    if (b > mean - 12.0 * s && b < mean + 12.0 * s) cuts.push_back(b);
  cuts.push_back(mean + 12.0 * s);
  std::sort(cuts.begin(), cuts.end());
  double tot = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    tot += integrate([&](double y) { return g(Point(y)) * normal_pdf((y - mean) / s) / s; }, cuts[i], cuts[i + 1], 1e-12);
  return tot;
}

// "indicator-interval -1 1", "gaussian-bump amp center width", "constant c",
// "monomial k", "phi c"; phi is resolved by the caller
inline TestFunction parse_test_function(const std::string& spec, const std::function<TestFunction(double)>& phi,
                                        int dim = 1) {
  std::istringstream is(spec);
  std::string family;
  is >> family;
  std::vector<double> args;
  double v;
  while (is >> v) args.push_back(v);
  if (!is.eof()) throw ConfigError("test function parameters must be numbers: " + spec);
  auto need = [&](std::size_t n) {
    if (args.size() != n) throw ConfigError(family + " takes " + std::to_string(n) + " parameters");
  };
  if (family == "indicator-interval") {
    need(2);
    if (!(args[0] < args[1])) throw ConfigError("indicator-interval needs lo < hi");
    return TestFunction::indicator(args[0], args[1], dim);
  }
  if (family == "gaussian-bump") {
    need(3);
    if (!(args[2] > 0.0) || args[0] < 0.0) throw ConfigError("gaussian-bump needs amp >= 0 and width > 0");
    return TestFunction::bump(args[0], args[1], args[2], dim);
  }
  if (family == "constant") {
    need(1);
    return TestFunction::constant_fn(args[0]);
  }
  if (family == "monomial") {
    need(1);
    return TestFunction::monomial(args[0]);
  }
  if (family == "phi") {
    if (args.size() > 1) throw ConfigError("phi takes at most one parameter");
    return phi(args.empty() ? 1.0 : args[0]);
  }
  throw ConfigError("unknown test function family '" + family + "'");
}

}  // namespace skelsim
