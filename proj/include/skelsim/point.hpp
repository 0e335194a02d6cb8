#pragma once

#include <array>
#include <cmath>

namespace skelsim {

inline constexpr int kMaxDim = 3;

// positions live in R^d, d <= 3; unused coordinates stay zero
struct Point {
  std::array<double, kMaxDim> c{0.0, 0.0, 0.0};

  Point() = default;
  explicit Point(double x) : c{x, 0.0, 0.0} {}
  Point(double x, double y, double z = 0.0) : c{x, y, z} {}

  double& operator[](int i) { return c[i]; }
  double operator[](int i) const { return c[i]; }

  double norm2() const { return c[0] * c[0] + c[1] * c[1] + c[2] * c[2]; }
  double norm() const { return std::sqrt(norm2()); }
};

struct Atom {
  Point x;
  double mass = 0.0;
};

}  // namespace skelsim
