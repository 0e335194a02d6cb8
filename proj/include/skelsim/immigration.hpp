#pragma once

#include <cmath>
#include <vector>

#include "skelsim/catalog.hpp"
#include "skelsim/particles.hpp"
#include "skelsim/skeleton.hpp"
#include "skelsim/testfunction.hpp"

namespace skelsim {

struct DressConfig {
  double m = 0.01;
  double eps = 0.05;
  double delta = 0.0;  // jump cutoff for mass particles; 0 means m
  EngineConfig engine;
};

// standard per-snapshot statistics of X and Z
struct Observation {
  double t = 0.0;
  double mass = 0.0;
  std::size_t n_mass = 0, n_skeleton = 0;
  double W_X = 0.0, W_Z = 0.0;
  std::vector<double> fX;     // <f, X_t> per test function
  std::vector<double> fZ;     // <f, Z_t>
  std::vector<double> fZ_phiw;  // <(phi/w) f, Z_t>
};

struct Observer {
  const ExampleCard* card = nullptr;
  std::vector<TestFunction> fs;

  Observation operator()(const Snapshot& s) const {
    Observation o;
    o.t = s.t;
    double damp = std::exp(-card->eigen.lambda_c * s.t);
    o.fX.assign(fs.size(), 0.0);
    o.fZ.assign(fs.size(), 0.0);
    o.fZ_phiw.assign(fs.size(), 0.0);
    if (s.X) {
      o.n_mass = s.X->size();
      o.mass = s.m * o.n_mass;
      double wphi = 0.0;
      for (const auto& p : *s.X) {
        wphi += card->phi(p.x);
        for (std::size_t k = 0; k < fs.size(); ++k) o.fX[k] += fs[k](p.x);
      }
      o.W_X = damp * s.m * wphi;
      for (auto& v : o.fX) v *= s.m;
    }
    if (s.Z) {
      o.n_skeleton = s.Z->size();
      double wz = 0.0;
      for (const auto& p : *s.Z) {
        double r = card->phi(p.x) / card->w(p.x);
        wz += r;
        for (std::size_t k = 0; k < fs.size(); ++k) {
          double f = fs[k](p.x);
          o.fZ[k] += f;
          o.fZ_phiw[k] += r * f;
        }
      }
      o.W_Z = damp * wz;
    }
    return o;
  }
};

struct SuperRun {
  ReplicaOutcome outcome;
  std::vector<Observation> obs;
};

inline MassModel direct_model(const ExampleCard& c, const DressConfig& d) {
  return MassModel(c.motion, c.mechanism, d.m, d.delta > 0.0 ? d.delta : d.m);
}

inline MassModel star_model(const ExampleCard& c, const DressConfig& d) {
  auto star = star_transform(c.mechanism, c.eigen.w.value);
  return MassModel(c.motion, star.as_mechanism(), d.m, d.delta > 0.0 ? d.delta : d.m);
}

// (L, psi*) particle approximation started from mu
inline SuperRun run_xstar(const ExampleCard& c, const std::vector<Atom>& mu, const std::vector<double>& obs,
                          const DressConfig& d, const std::vector<TestFunction>& fs, std::uint64_t seed,
                          std::uint64_t replica) {
  Engine e;
  e.mass = star_model(c, d);
  e.cfg = d.engine;
  auto r = e.run(mu, obs, seed, replica, Observer{&c, fs});
  return {std::move(r.outcome), std::move(r.records)};
}

// direct particle approximation of (L, psi_beta), used as an oracle
inline SuperRun run_super_direct(const ExampleCard& c, const std::vector<Atom>& mu, const std::vector<double>& obs,
                                 const DressConfig& d, const std::vector<TestFunction>& fs, std::uint64_t seed,
                                 std::uint64_t replica) {
  Engine e;
  e.mass = direct_model(c, d);
  e.cfg = d.engine;
  auto r = e.run(mu, obs, seed, replica, Observer{&c, fs});
  return {std::move(r.outcome), std::move(r.records)};
}

// skeleton Z from Poisson(w mu), X* from mu, and the three immigration streams
// along Z; X = X* + I is observed together with Z on the same replica
inline SuperRun dress_skeleton(const ExampleCard& c, const std::vector<Atom>& mu, const std::vector<double>& obs,
                               const DressConfig& d, const std::vector<TestFunction>& fs, std::uint64_t seed,
                               std::uint64_t replica) {
  if (!(d.eps > 0.0) || !(d.m > 0.0)) throw ConfigError("dressing needs m > 0 and eps > 0");
  Engine e;
  e.mass = star_model(c, d);
  e.skeleton = skeleton_model(c, true, d.eps);
  e.cfg = d.engine;
  auto r = e.run(mu, obs, seed, replica, Observer{&c, fs});
  return {std::move(r.outcome), std::move(r.records)};
}

}  // namespace skelsim
