#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "skelsim/errors.hpp"
#include "skelsim/field.hpp"
#include "skelsim/mechanism.hpp"
#include "skelsim/motion.hpp"
#include "skelsim/point.hpp"
#include "skelsim/rng.hpp"

namespace skelsim {

struct MassParticle {
  Point x;
  double t = 0.0;  // time of the last position update
};

struct SkeletonParticle {
  Point x;
  double t = 0.0;
  std::uint64_t id = 0, parent = 0;
  double birth = 0.0;
};

struct BranchEvent {
  double t;
  Point x;
  int offspring;
  std::uint64_t id;
  double birth;  // birth time of the particle that branched
};

enum class Source { initial, trajectory, jump, branch_point };

inline const char* to_string(Source s) {
  switch (s) {
    case Source::initial: return "initial";
    case Source::trajectory: return "trajectory";
    case Source::jump: return "jump";
    case Source::branch_point: return "branch-point";
  }
  return "?";
}

struct LedgerEntry {
  double t;
  Source source;
  double mass;
  Point x;
  std::uint64_t issuer;     // skeleton particle id (0 for the initial condition)
  double issuer_birth;
  std::uint64_t particles;  // mass particles created
};

// per-source totals of issued mass and events
struct LedgerCounts {
  std::uint64_t events[4] = {0, 0, 0, 0};
  double mass[4] = {0, 0, 0, 0};
  void add(Source s, double m) {
    ++events[static_cast<int>(s)];
    mass[static_cast<int>(s)] += m;
  }
};

// stochastic rounding of y/m to a particle count with the right mean
inline std::uint64_t round_mass(double y, double m, Stream& rng) {
  double r = y / m;
  double f = std::floor(r);
  return static_cast<std::uint64_t>(f) + (rng.uniform() < r - f ? 1 : 0);
}

inline double grid_sup(const MotionSpec& m, double radius, const std::function<double(const Point&)>& g) {
  double s = 0.0;
  for (const auto& x : m.sample_grid(241, radius)) {
    double v = g(x);
    if (std::isfinite(v)) s = std::max(s, v);
  }
  return s;
}

// Rates of one mass-m particle under a mechanism (beta, alpha, Pi):
//   critical binary branching at rate 2 alpha_eff / m,
//   birth (lin > 0) or death (lin < 0) at rate |lin| with lin = beta - int_{y>=delta} y Pi,
//   jumps y >= delta at rate m Pi([delta, inf)), adding about y/m particles.
// Jumps below delta enter alpha_eff through (1/2) int_0^delta y^2 Pi; the
// term -|lin| m / 2 makes the first two moments of the mass match the
// continuum process exactly.
struct MassModel {
  MotionSpec motion;
  BranchingMechanism mech;
  double m = 0.01, delta = 0.01;
  bool constant = false;
  double bound = 0.0;
  bool alpha_floor = false;  // alpha_eff clipped at 0 somewhere on the grid

  struct Rates {
    double crit = 0.0, lin = 0.0, jump = 0.0;
    double total() const { return crit + std::abs(lin) + jump; }
  };
  Rates cached;

  MassModel() = default;
  MassModel(MotionSpec mo, BranchingMechanism me, double m_, double delta_, double box = 6.0, double safety = 1.5)
      : motion(std::move(mo)), mech(std::move(me)), m(m_), delta(delta_) {
    if (!(m > 0.0)) throw ConfigError("mass unit m must be positive");
    if (!(delta > 0.0)) throw ConfigError("jump cutoff must be positive");
    constant = mech.is_constant();
    if (constant) {
      cached = compute(Point{});
      bound = cached.total();
      alpha_floor = alpha_eff(Point{}) < 0.0;
    } else {
      bound = safety * grid_sup(motion, box, [&](const Point& x) { return compute(x).total(); });
      for (const auto& x : motion.sample_grid(241, box)) alpha_floor = alpha_floor || alpha_eff(x) < 0.0;
    }
  }

  double alpha_eff(const Point& x) const {
    double small = 0.0, comp = 0.0;
    if (!mech.pi.is_zero()) {
      small = 0.5 * mech.pi.power_integral(x, 2.0, 0.0, 0.0, delta);
      comp = mech.pi.power_integral(x, 1.0, 0.0, delta);
    }
    return mech.alpha(x) + small - 0.5 * std::abs(mech.beta(x) - comp) * m;
  }

  Rates compute(const Point& x) const {
    Rates r;
    double small = 0.0, comp = 0.0;
    if (!mech.pi.is_zero()) {
      small = 0.5 * mech.pi.power_integral(x, 2.0, 0.0, 0.0, delta);
      comp = mech.pi.power_integral(x, 1.0, 0.0, delta);
      r.jump = m * mech.pi.power_integral(x, 0.0, 0.0, delta);
    }
    r.lin = mech.beta(x) - comp;
    double aeff = mech.alpha(x) + small - 0.5 * std::abs(r.lin) * m;
    r.crit = 2.0 * std::max(aeff, 0.0) / m;
    return r;
  }
  Rates at(const Point& x) const { return constant ? cached : compute(x); }
};

// Skeleton particle rates: branching at q(x) with the offspring law, and when
// dressing, immigration (a) at 2 alpha / eps issuing mass eps, immigration (b)
// of masses y >= eps at rate y e^{-w y} Pi(dy); the flux of smaller masses is
// issued through stream (a) as extra eps-mass seeds.
struct SkeletonModel {
  MotionSpec motion;  // w-transformed motion
  BranchingMechanism mech;
  Field w;
  double eps = 0.05;
  bool dress = false;
  int K = 64;
  bool constant = false;
  double bound = 0.0;

  struct Rates {
    double branch = 0.0, imm_a = 0.0, imm_b = 0.0;
    double total() const { return branch + imm_a + imm_b; }
  };
  Rates cached;
  OffspringLaw cached_law;

  SkeletonModel() = default;
  SkeletonModel(MotionSpec mo, BranchingMechanism me, Field w_, double eps_, bool dress_, int K_ = 64,
                double box = 6.0, double safety = 1.5)
      : motion(std::move(mo)), mech(std::move(me)), w(std::move(w_)), eps(eps_), dress(dress_), K(K_) {
    if (dress && !(eps > 0.0)) throw ConfigError("immigration scale eps must be positive");
    constant = mech.is_constant() && w.is_constant();
    if (constant) {
      cached = compute(Point{});
      cached_law = skeleton_offspring(mech, w.constant(), Point{}, K);
      bound = cached.total();
    } else {
      bound = safety * grid_sup(motion, box, [&](const Point& x) { return compute(x).total(); });
    }
  }

  Rates compute(const Point& x) const {
    Rates r;
    double wx = w(x);
    r.branch = mech.dpsi0(x, wx) - mech.psi0(x, wx) / wx;
    if (dress) {
      double small = 0.0;
      if (!mech.pi.is_zero()) {
        r.imm_b = mech.pi.power_integral(x, 1.0, wx, eps);
        small = mech.pi.power_integral(x, 2.0, wx, 0.0, eps);
      }
      r.imm_a = (2.0 * mech.alpha(x) + small) / eps;
    }
    return r;
  }
  Rates at(const Point& x) const { return constant ? cached : compute(x); }
  OffspringLaw law(const Point& x) const { return constant ? cached_law : skeleton_offspring(mech, w(x), x, K); }
};

struct EngineConfig {
  double cap = 1e7;  // maximum particles of either kind
  int max_restarts = 20;
  bool record_events = false;
  bool record_ledger = false;
  // checked every 256 events and at observation times; true ends the replica
  std::function<bool(double t, std::size_t n_mass, std::size_t n_skeleton)> stop;
};

struct Snapshot {
  double t = 0.0;
  double m = 0.0;
  const std::vector<MassParticle>* X = nullptr;
  const std::vector<SkeletonParticle>* Z = nullptr;
};

struct ReplicaOutcome {
  bool truncated = false;
  bool stopped = false;
  double stop_time = std::numeric_limits<double>::quiet_NaN();
  int restarts = 0;
  std::uint64_t events = 0, rejected = 0;
  std::size_t initial_skeleton = 0, initial_mass = 0;
  std::vector<BranchEvent> branch_log;
  std::vector<LedgerEntry> ledger;
  LedgerCounts counts;
};

template <class R>
struct ReplicaResult {
  ReplicaOutcome outcome;
  std::vector<R> records;
};

// Gillespie loop over both particle kinds with per-kind thinning bounds and
// lazy position updates; observation times are reached by the memoryless
// property of the exponential clock.
class Engine {
 public:
  std::optional<MassModel> mass;
  std::optional<SkeletonModel> skeleton;
  EngineConfig cfg;

  template <class Obs>
  auto run(const std::vector<Atom>& mu, std::vector<double> obs, std::uint64_t seed, std::uint64_t replica,
           Obs&& observer) const -> ReplicaResult<decltype(observer(Snapshot{}))> {
    using R = decltype(observer(Snapshot{}));
    std::sort(obs.begin(), obs.end());
    double mb = mass ? mass->bound : 0.0, sb = skeleton ? skeleton->bound : 0.0;
    for (int attempt = 0;; ++attempt) {
      ReplicaResult<R> res;
      res.outcome.restarts = attempt;
      int kind = -1;
      try {
        run_once(mu, obs, seed, replica, attempt, mb, sb, kind, res, observer);
        return res;
      } catch (const ThinningBoundViolation& e) {
        if (attempt >= cfg.max_restarts) throw;
        if (kind == 0) mb = std::max(2.0 * mb, 1.5 * e.rate);
        else sb = std::max(2.0 * sb, 1.5 * e.rate);
      }
    }
  }

 private:
  template <class R, class Obs>
  void run_once(const std::vector<Atom>& mu, const std::vector<double>& obs, std::uint64_t seed,
                std::uint64_t replica, int attempt, double mb, double sb, int& kind, ReplicaResult<R>& res,
                Obs& observer) const {
    StreamSet rs(seed, replica, attempt);
    std::vector<MassParticle> X;
    std::vector<SkeletonParticle> Z;
    std::uint64_t next_id = 1;
    auto& out = res.outcome;
    double m = mass ? mass->m : 0.0;

    auto issue = [&](Source src, double y, const Point& x, double t, std::uint64_t issuer, double birth,
                     Stream& rng) {
      std::uint64_t n = round_mass(y, m, rng);
      for (std::uint64_t i = 0; i < n; ++i) X.push_back({x, t});
      out.counts.add(src, y);
      if (cfg.record_ledger) out.ledger.push_back({t, src, y, x, issuer, birth, n});
    };

    for (const auto& a : mu) {
      if (a.mass < 0.0) throw ConfigError("initial measure must be nonnegative");
      if (skeleton) {
        std::uint64_t n = rs.init.poisson(skeleton->w(a.x) * a.mass);
        for (std::uint64_t i = 0; i < n; ++i) Z.push_back({a.x, 0.0, next_id++, 0, 0.0});
      }
      if (mass) issue(Source::initial, a.mass, a.x, 0.0, 0, 0.0, rs.init);
    }
    out.initial_skeleton = Z.size();
    out.initial_mass = X.size();

    double clock = 0.0;
    auto move_mass = [&](MassParticle& p, double t) {
      bool alive = advance(mass->motion, p.x, t - p.t, rs.motion);
      p.t = t;
      return alive;
    };
    auto move_skel = [&](SkeletonParticle& p, double t) {
      bool alive = advance(skeleton->motion, p.x, t - p.t, rs.motion);
      p.t = t;
      return alive;
    };
    auto remove_mass = [&](std::size_t i) {
      X[i] = X.back();
      X.pop_back();
    };
    auto remove_skel = [&](std::size_t i) {
      Z[i] = Z.back();
      Z.pop_back();
    };

    for (double t_obs : obs) {
      while (!out.stopped && !out.truncated) {
        double RX = X.size() * mb, RZ = Z.size() * sb, Rtot = RX + RZ;
        if (Rtot <= 0.0) break;
        double tau = clock + rs.branching.exponential(Rtot);
        if (tau >= t_obs) break;
        clock = tau;
        ++out.events;
        bool pick_mass = RZ == 0.0 || (RX > 0.0 && rs.branching.uniform() * Rtot < RX);
        if (pick_mass) {
          std::size_t i = rs.branching.index(X.size());
          if (!move_mass(X[i], tau)) {
            remove_mass(i);
            continue;
          }
          auto r = mass->at(X[i].x);
          double tot = r.total();
          if (tot > mb) {
            kind = 0;
            throw ThinningBoundViolation(tot, mb);
          }
          double v = rs.branching.uniform() * mb;
          if (v < r.crit) {
            if (v < 0.5 * r.crit) remove_mass(i);
            else X.push_back(X[i]);
          } else if ((v -= r.crit) < std::abs(r.lin)) {
            if (r.lin > 0.0) X.push_back(X[i]);
            else remove_mass(i);
          } else if ((v -= std::abs(r.lin)) < r.jump) {
            double y = mass->mech.pi.sample_power(X[i].x, 0.0, 0.0, mass->delta, rs.branching);
            std::uint64_t n = round_mass(y, m, rs.branching);
            MassParticle c = X[i];
            for (std::uint64_t k = 0; k < n; ++k) X.push_back(c);
          } else {
            ++out.rejected;
          }
        } else {
          std::size_t i = rs.branching.index(Z.size());
          if (!move_skel(Z[i], tau)) {
            remove_skel(i);
            continue;
          }
          const Point x = Z[i].x;
          auto r = skeleton->at(x);
          double tot = r.total();
          if (tot > sb) {
            kind = 1;
            throw ThinningBoundViolation(tot, sb);
          }
          bool only_branch = skeleton->constant && !skeleton->dress && r.branch == sb;
          double v = only_branch ? 0.0 : rs.branching.uniform() * sb;
          if (v < r.branch) {
            int k = skeleton->constant ? skeleton->cached_law.sample(rs.branching)
                                       : skeleton->law(x).sample(rs.branching);
            std::uint64_t id = Z[i].id;
            double birth = Z[i].birth;
            if (cfg.record_events) out.branch_log.push_back({tau, x, k, id, birth});
            if (mass) {
              double y = branch_point_mass(skeleton->mech, skeleton->w(x), x, k, rs.immigration_c);
              if (y > 0.0) issue(Source::branch_point, y, x, tau, id, birth, rs.immigration_c);
              else out.counts.add(Source::branch_point, 0.0);
            }
            Z[i] = {x, tau, next_id++, id, tau};
            for (int c = 1; c < k; ++c) Z.push_back({x, tau, next_id++, id, tau});
          } else if ((v -= r.branch) < r.imm_a) {
            issue(Source::trajectory, skeleton->eps, x, tau, Z[i].id, Z[i].birth, rs.immigration_a);
          } else if ((v -= r.imm_a) < r.imm_b) {
            double y = skeleton->mech.pi.sample_power(x, 1.0, skeleton->w(x), skeleton->eps, rs.immigration_b);
            issue(Source::jump, y, x, tau, Z[i].id, Z[i].birth, rs.immigration_b);
          } else {
            ++out.rejected;
          }
        }
        if (static_cast<double>(X.size()) > cfg.cap || static_cast<double>(Z.size()) > cfg.cap) out.truncated = true;
        if (cfg.stop && (out.events & 255) == 0 && cfg.stop(clock, X.size(), Z.size())) {
          out.stopped = true;
          out.stop_time = clock;
        }
      }
      if (out.stopped || out.truncated) return;
      clock = t_obs;
      for (std::size_t i = X.size(); i-- > 0;)
        if (!move_mass(X[i], t_obs)) remove_mass(i);
      for (std::size_t i = Z.size(); i-- > 0;)
        if (!move_skel(Z[i], t_obs)) remove_skel(i);
      res.records.push_back(observer(Snapshot{t_obs, m, &X, &Z}));
      if (cfg.stop && cfg.stop(clock, X.size(), Z.size())) {
        out.stopped = true;
        out.stop_time = clock;
        return;
      }
    }
  }
};

}  // namespace skelsim
