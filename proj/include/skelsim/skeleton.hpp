#pragma once

#include <cmath>
#include <vector>

#include "skelsim/catalog.hpp"
#include "skelsim/particles.hpp"

namespace skelsim {

struct SkeletonState {
  std::vector<SkeletonParticle> particles;
  std::vector<BranchEvent> events;
  std::size_t initial_count = 0;
  double clock = 0.0;
};

// Poisson(w(x) m) particles at each atom (x, m) of mu
inline SkeletonState init_skeleton(const std::vector<Atom>& mu, const Field& w, Stream& rng) {
  SkeletonState s;
  std::uint64_t id = 1;
  for (const auto& a : mu) {
    if (a.mass < 0.0) throw ConfigError("initial measure must be nonnegative");
    std::uint64_t n = rng.poisson(w(a.x) * a.mass);
    for (std::uint64_t i = 0; i < n; ++i) s.particles.push_back({a.x, 0.0, id++, 0, 0.0});
  }
  s.initial_count = s.particles.size();
  return s;
}

inline SkeletonModel skeleton_model(const ExampleCard& c, bool dress = false, double eps = 0.05, int K = 64) {
  return SkeletonModel(c.skeleton_motion(), c.mechanism, c.eigen.w.value, eps, dress, K);
}

// e^{-lambda_c t} sum phi/w over the skeleton
inline double martingale_Z(const std::vector<SkeletonParticle>& z, const ExampleCard& c, double t) {
  double s = 0.0;
  for (const auto& p : z) s += c.phi(p.x) / c.w(p.x);
  return std::exp(-c.eigen.lambda_c * t) * s;
}

inline double martingale_Z(const Snapshot& snap, const ExampleCard& c) { return martingale_Z(*snap.Z, c, snap.t); }

struct SkeletonSnapshot {
  double t = 0.0;
  std::vector<Point> positions;
};

struct SkeletonRun {
  ReplicaOutcome outcome;
  std::vector<SkeletonSnapshot> snapshots;
  std::size_t final_count = 0;
};

// the skeleton alone, with snapshots of all positions at the observation times
inline SkeletonRun run_skeleton(const ExampleCard& c, const std::vector<Atom>& mu, const std::vector<double>& obs,
                                std::uint64_t seed, std::uint64_t replica, EngineConfig cfg = {}) {
  Engine e;
  e.skeleton = skeleton_model(c);
  e.cfg = std::move(cfg);
  auto r = e.run(mu, obs, seed, replica, [](const Snapshot& s) {
    SkeletonSnapshot out{s.t, {}};
    out.positions.reserve(s.Z->size());
    for (const auto& p : *s.Z) out.positions.push_back(p.x);
    return out;
  });
  SkeletonRun run{std::move(r.outcome), std::move(r.records), 0};
  if (!run.snapshots.empty()) run.final_count = run.snapshots.back().positions.size();
  return run;
}

}  // namespace skelsim
