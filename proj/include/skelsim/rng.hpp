#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <string_view>

namespace skelsim {

// Philox4x32-10 (Salmon et al. 2011), counter-based
namespace philox {

using Ctr = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Ctr round(Ctr c, Key k) {
  constexpr std::uint64_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  std::uint64_t p0 = M0 * c[0];
  std::uint64_t p1 = M1 * c[2];
  return {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1),
          std::uint32_t(p0 >> 32) ^ c[3] ^ k[1], std::uint32_t(p0)};
}

inline Ctr block(Ctr c, Key k) {
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += W0;
      k[1] += W1;
    }
    c = round(c, k);
  }
  return c;
}

}  // namespace philox

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

// A random stream identified by (seed, replica, name). Draws depend only on
// that triple and the draw index, never on scheduling.
class Stream {
 public:
  using result_type = std::uint32_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  Stream() : Stream(0, 0, "default") {}
  Stream(std::uint64_t seed, std::uint64_t replica, std::string_view name) {
    std::uint64_t k = splitmix64(seed ^ splitmix64(fnv1a(name)));
    key_ = {std::uint32_t(k), std::uint32_t(k >> 32)};
    ctr_ = {0, 0, std::uint32_t(replica), std::uint32_t(replica >> 32)};
  }

  result_type operator()() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t hi = (*this)();
    return (hi << 32) | (*this)();
  }

  // uniform on the open interval (0,1)
  double uniform() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double r = std::sqrt(-2.0 * std::log(uniform()));
    double th = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // index in [0, n)
  std::uint64_t index(std::uint64_t n) { return std::uint64_t(uniform() * double(n)) % n; }

  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
      double l = std::exp(-mean), p = uniform();
      std::uint64_t k = 0;
      while (p > l) {
        p *= uniform();
        ++k;
      }
      return k;
    }
    std::poisson_distribution<std::uint64_t> d(mean);
    return d(*this);
  }

  // Marsaglia-Tsang; density x^{shape-1} e^{-rate x}
  double gamma(double shape, double rate = 1.0) {
    if (shape < 1.0) {
      double u = uniform();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

 private:
  void refill() {
    buf_ = philox::block(ctr_, key_);
    if (++ctr_[0] == 0) ++ctr_[1];
    pos_ = 0;
  }

  philox::Key key_{};
  philox::Ctr ctr_{};
  philox::Ctr buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// named substreams of one replica; a restarted replica uses a fresh attempt index
struct StreamSet {
  Stream motion, branching, immigration_a, immigration_b, immigration_c, init;
  StreamSet(std::uint64_t seed, std::uint64_t replica, int attempt = 0)
      : motion(seed, replica, tag("motion", attempt)), branching(seed, replica, tag("branching", attempt)),
        immigration_a(seed, replica, tag("immigration-a", attempt)),
        immigration_b(seed, replica, tag("immigration-b", attempt)),
        immigration_c(seed, replica, tag("immigration-c", attempt)), init(seed, replica, tag("init", attempt)) {}

 private:
  static std::string tag(const char* name, int attempt) {
    return attempt ? std::string(name) + "#" + std::to_string(attempt) : std::string(name);
  }
};

}  // namespace skelsim
