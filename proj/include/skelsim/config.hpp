#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "skelsim/catalog.hpp"
#include "skelsim/errors.hpp"
#include "skelsim/testfunction.hpp"

namespace skelsim {

struct ConfigEntry {
  std::string value;
  int line = 0;
};

// sections [run], [motion], [mechanism], [functions]; '#' or ';' start comments
struct RunConfig {
  std::string origin = "<config>";
  std::string card = "inward-ou-quadratic";
  double T = 1.0, dt = 0.01, m = 0.01, eps = 0.05, x0 = 0.0, mass = 1.0, p = 1.5;
  int replicas = 1000, jobs = 0, bins = 35;
  std::uint64_t seed = 1;
  std::string mode = "skeleton";
  std::vector<double> times;
  std::string out;

  // inline card
  std::optional<std::string> motion_kind;
  double gamma = 1.0;
  int dim = 1;
  double beta = 1.0, alpha = 1.0;
  std::string levy = "none";

  std::vector<std::pair<std::string, std::string>> functions;
  std::map<std::string, int> lines;  // "section.key" -> line
  std::vector<std::pair<std::string, std::string>> echo;  // canonical key=value pairs in file order

  std::string where(const std::string& key) const {
    auto it = lines.find(key);
    return origin + (it != lines.end() ? ":" + std::to_string(it->second) : "") + ": ";
  }
  std::vector<Atom> initial() const { return {{Point(x0), mass}}; }
  std::vector<double> obs_times() const { return times.empty() ? std::vector<double>{T} : times; }
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_number(const std::string& v, const std::string& where, const std::string& key) {
  std::size_t used = 0;
  double d;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(where + "'" + key + "' expects a number, got '" + v + "'");
  }
  if (trim(v.substr(used)) != "") throw ConfigError(where + "'" + key + "' expects a number, got '" + v + "'");
  return d;
}

inline long long parse_integer(const std::string& v, const std::string& where, const std::string& key) {
  std::size_t used = 0;
  long long d;
  try {
    d = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(where + "'" + key + "' expects an integer, got '" + v + "'");
  }
  if (trim(v.substr(used)) != "") throw ConfigError(where + "'" + key + "' expects an integer, got '" + v + "'");
  return d;
}

inline std::uint64_t parse_seed(const std::string& v, const std::string& where) {
  std::size_t used = 0;
  std::uint64_t d;
  try {
    d = std::stoull(v, &used, 0);
  } catch (const std::exception&) {
    throw ConfigError(where + "'seed' expects an unsigned 64-bit integer, got '" + v + "'");
  }
  if (trim(v.substr(used)) != "" || trim(v).starts_with("-"))
    throw ConfigError(where + "'seed' expects an unsigned 64-bit integer, got '" + v + "'");
  return d;
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>") {
  static const std::map<std::string, std::set<std::string>> known = {
      {"run", {"card", "T", "dt", "m", "eps", "replicas", "seed", "jobs", "mode", "times", "x0", "mass", "p", "bins",
               "out"}},
      {"motion", {"kind", "gamma", "dim"}},
      {"mechanism", {"beta", "alpha", "levy"}},
      {"functions", {}}};
  RunConfig c;
  c.origin = origin;
  std::map<std::string, ConfigEntry> kv;
  std::set<std::string> sections;
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    if (auto h = s.find_first_of("#;"); h != std::string::npos) s = s.substr(0, h);
    s = detail::trim(s);
    if (s.empty()) continue;
    std::string at = origin + ":" + std::to_string(line) + ": ";
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(at + "malformed section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      if (!known.count(section)) throw ConfigError(at + "unknown section [" + section + "]");
      sections.insert(section);
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(at + "expected key = value");
    if (section.empty()) throw ConfigError(at + "key outside of any section");
    std::string key = detail::trim(s.substr(0, eq)), value = detail::trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(at + "empty key");
    if (section != "functions" && !known.at(section).count(key))
      throw ConfigError(at + "unknown key '" + key + "' in [" + section + "]");
    std::string full = section + "." + key;
    if (kv.count(full)) throw ConfigError(at + "duplicate key '" + key + "' in [" + section + "]");
    kv[full] = {value, line};
    c.lines[full] = line;
    c.echo.emplace_back(full, value);
    if (section == "functions") c.functions.emplace_back(key, value);
  }

  auto get = [&](const std::string& k) -> const ConfigEntry* {
    auto it = kv.find(k);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto positive = [&](const std::string& k, double& dst) {
    if (auto e = get(k)) {
      dst = detail::parse_number(e->value, c.where(k), k);
      if (!(dst > 0.0)) throw ConfigError(c.where(k) + "'" + k + "' must be positive");
    }
  };
  auto positive_int = [&](const std::string& k, int& dst) {
    if (auto e = get(k)) {
      long long v = detail::parse_integer(e->value, c.where(k), k);
      if (v <= 0 || v > 1000000000) throw ConfigError(c.where(k) + "'" + k + "' must be a positive integer");
      dst = int(v);
    }
  };

  if (auto e = get("run.card")) c.card = e->value;
  positive("run.T", c.T);
  positive("run.dt", c.dt);
  positive("run.m", c.m);
  positive("run.eps", c.eps);
  positive("run.mass", c.mass);
  positive("run.p", c.p);
  positive_int("run.replicas", c.replicas);
  positive_int("run.jobs", c.jobs);
  positive_int("run.bins", c.bins);
  if (auto e = get("run.x0")) c.x0 = detail::parse_number(e->value, c.where("run.x0"), "x0");
  if (auto e = get("run.seed")) c.seed = detail::parse_seed(e->value, c.where("run.seed"));
  if (auto e = get("run.mode")) {
    if (e->value != "direct" && e->value != "skeleton")
      throw ConfigError(c.where("run.mode") + "'mode' must be direct or skeleton");
    c.mode = e->value;
  }
  if (auto e = get("run.out")) c.out = e->value;
  if (auto e = get("run.times")) {
    std::string v = e->value;
    for (char& ch : v)
      if (ch == ',') ch = ' ';
    std::istringstream ts(v);
    std::string tok;
    while (ts >> tok) {
      double t = detail::parse_number(tok, c.where("run.times"), "times");
      if (!(t >= 0.0)) throw ConfigError(c.where("run.times") + "'times' must be nonnegative");
      c.times.push_back(t);
    }
    if (c.times.empty()) throw ConfigError(c.where("run.times") + "'times' is empty");
    std::sort(c.times.begin(), c.times.end());
  }

  if (sections.count("motion") || sections.count("mechanism")) {
    auto need = [&](const std::string& k) {
      if (!get(k)) {
        auto sec = k.substr(0, k.find('.'));
        throw ConfigError(origin + ": missing required key '" + k.substr(k.find('.') + 1) + "' in [" + sec + "]");
      }
    };
    need("motion.kind");
    need("mechanism.beta");
    need("mechanism.alpha");
    c.motion_kind = get("motion.kind")->value;
    if (*c.motion_kind != "inward-ou" && *c.motion_kind != "outward-ou" && *c.motion_kind != "wright-fisher")
      throw ConfigError(c.where("motion.kind") + "'kind' must be inward-ou, outward-ou or wright-fisher");
    positive("motion.gamma", c.gamma);
    positive_int("motion.dim", c.dim);
    if (c.dim > kMaxDim) throw ConfigError(c.where("motion.dim") + "'dim' must be at most 3");
    positive("mechanism.alpha", c.alpha);
    c.beta = detail::parse_number(get("mechanism.beta")->value, c.where("mechanism.beta"), "beta");
    if (auto e = get("mechanism.levy")) c.levy = e->value;
  }
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

// "none" or "tempered a b c"
inline LevyKernel parse_levy(const std::string& spec, const std::string& where = "") {
  std::istringstream is(spec);
  std::string family;
  is >> family;
  if (family == "none") return LevyKernel::none();
  if (family == "tempered") {
    double a, b, c = 1.0;
    if (!(is >> a >> b)) throw ConfigError(where + "'levy' tempered needs a and b");
    is >> c;
    auto k = LevyKernel::tempered(a, b, c);
    k.validate();
    return k;
  }
  throw ConfigError(where + "unknown Levy family '" + family + "'");
}

inline ExampleCard build_card(const RunConfig& c) {
  if (!c.motion_kind) return card(c.card);
  auto pi = parse_levy(c.levy, c.where("mechanism.levy"));
  try {
    if (*c.motion_kind == "inward-ou") return cards::inward_ou("inline-inward-ou", c.gamma, c.beta, c.alpha, pi, c.dim);
    if (*c.motion_kind == "outward-ou") return cards::outward_ou("inline-outward-ou", c.gamma, c.beta, c.alpha, pi, c.dim);
    if (!pi.is_zero()) throw ConfigError("wright-fisher inline card takes no Levy measure");
    return cards::wright_fisher(c.beta, c.alpha);
  } catch (const ConfigError& e) {
    throw ConfigError(c.where("motion.kind") + e.what());
  }
}

// test functions of the [functions] section; each f must have f/phi bounded on the card
inline std::vector<TestFunction> build_functions(const RunConfig& c, const ExampleCard& k) {
  std::vector<TestFunction> fs;
  for (const auto& [name, spec] : c.functions) {
    std::string where = c.where("functions." + name);
    TestFunction f;
    try {
      f = parse_test_function(spec, [&](double s) { return k.phi_function(s); }, k.motion.dim);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
    auto r = detail::bounded_check("f/phi", k.motion, [&](const Point& x) { return f(x) / k.phi(x); });
    if (!r.pass) throw ConfigError(where + "test function '" + name + "' violates f/phi bounded on card " + k.name);
    f.label = name;
    fs.push_back(f);
  }
  return fs;
}

inline std::string config_echo(const RunConfig& c) {
  std::ostringstream os;
  for (const auto& [k, v] : c.echo) os << k << " = " << v << "\n";
  return os.str();
}

}  // namespace skelsim
