#pragma once

#include <functional>
#include <utility>

#include "skelsim/point.hpp"

namespace skelsim {

// scalar function on the domain; constant fields skip the indirect call
class Field {
 public:
  using Fn = std::function<double(const Point&)>;

  Field(double c = 0.0) : c_(c) {}
  Field(Fn f) : fn_(std::move(f)) {}

  double operator()(const Point& x) const { return fn_ ? fn_(x) : c_; }
  bool is_constant() const { return !fn_; }
  double constant() const { return c_; }

  template <class Op>
  friend Field combine(const Field& a, const Field& b, Op op) {
    if (a.is_constant() && b.is_constant()) return Field(op(a.c_, b.c_));
    return Field(Fn([a, b, op](const Point& x) { return op(a(x), b(x)); }));
  }

 private:
  double c_ = 0.0;
  Fn fn_;
};

inline Field operator*(const Field& a, const Field& b) { return combine(a, b, [](double u, double v) { return u * v; }); }
inline Field operator/(const Field& a, const Field& b) { return combine(a, b, [](double u, double v) { return u / v; }); }
inline Field operator+(const Field& a, const Field& b) { return combine(a, b, [](double u, double v) { return u + v; }); }
inline Field operator-(const Field& a, const Field& b) { return combine(a, b, [](double u, double v) { return u - v; }); }

}  // namespace skelsim
