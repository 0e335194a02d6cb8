#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace skelsim {

// ten significant digits, for labels and CSV cells
inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

enum class Rule { z_score, at_most, at_least, info };

inline const char* to_string(Rule r) {
  switch (r) {
    case Rule::z_score: return "|z|<=";
    case Rule::at_most: return "<=";
    case Rule::at_least: return ">=";
    case Rule::info: return "info";
  }
  return "?";
}

struct RunReport {
  static constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  std::string check;
  double estimate = nan, se = nan, oracle = nan, z = nan;
  Rule rule = Rule::info;
  double threshold = nan;
  bool pass = true;
  std::string note;
  std::map<std::string, std::string> meta;

  void decide() {
    switch (rule) {
      case Rule::z_score: pass = std::isfinite(z) && std::abs(z) <= threshold; break;
      case Rule::at_most: pass = estimate <= threshold; break;
      case Rule::at_least: pass = estimate >= threshold; break;
      case Rule::info: pass = true; break;
    }
  }

  static RunReport z_test(std::string name, double est, double se, double oracle, double zmax = 3.0) {
    RunReport r;
    r.check = std::move(name);
    r.estimate = est;
    r.se = se;
    r.oracle = oracle;
    r.z = se > 0.0 ? (est - oracle) / se : (est == oracle ? 0.0 : std::numeric_limits<double>::infinity());
    r.rule = Rule::z_score;
    r.threshold = zmax;
    r.decide();
    return r;
  }

  static RunReport at_most(std::string name, double value, double threshold) {
    RunReport r;
    r.check = std::move(name);
    r.estimate = value;
    r.rule = Rule::at_most;
    r.threshold = threshold;
    r.decide();
    return r;
  }

  static RunReport at_least(std::string name, double value, double threshold) {
    RunReport r = at_most(std::move(name), value, threshold);
    r.rule = Rule::at_least;
    r.decide();
    return r;
  }

  static RunReport info(std::string name, double value, std::string note = {}) {
    RunReport r;
    r.check = std::move(name);
    r.estimate = value;
    r.note = std::move(note);
    return r;
  }

  static RunReport failure(std::string name, std::string note) {
    RunReport r;
    r.check = std::move(name);
    r.rule = Rule::at_most;
    r.pass = false;
    r.note = std::move(note);
    return r;
  }
};

inline bool all_pass(const std::vector<RunReport>& rs) {
  for (const auto& r : rs)
    if (!r.pass) return false;
  return true;
}

}  // namespace skelsim
