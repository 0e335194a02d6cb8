#include <CLI11.hpp>
#include <openssl/evp.h>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "skelsim/catalog.hpp"
#include "skelsim/config.hpp"
#include "skelsim/diagnostics.hpp"
#include "skelsim/immigration.hpp"
#include "skelsim/mechanism.hpp"
#include "skelsim/mildsolver.hpp"
#include "skelsim/output.hpp"
#include "skelsim/skeleton.hpp"
#include "skelsim/spine.hpp"

using namespace skelsim;

namespace {

// git blob object id of content
std::string blob_sha1(const std::string& content) {
  std::string obj = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(obj.data(), obj.size(), md, &len, EVP_sha1(), nullptr) != 1) throw Error("sha1 failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

struct Globals {
  std::string config_path, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicas, jobs;
  bool strict = false, plot = false;
};

struct Overrides {
  std::string card, mode;
  std::optional<double> T, m, eps, dt, p, x0, threshold;
  std::vector<double> times;
  std::vector<std::string> fs;
  std::optional<int> bins, nodes;
};

struct Context {
  RunConfig cfg;
  ExampleCard card;
  std::vector<TestFunction> fs;
  std::vector<std::string> argv;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, blob id
  bool failed = false;
};

bool has_T(const RunConfig& c) { return c.lines.count("run.T") > 0; }
bool has_times(const RunConfig& c) { return !c.times.empty(); }

Context prepare(const Globals& g, const Overrides& o, const std::vector<std::string>& argv) {
  Context ctx;
  ctx.argv = argv;
  if (!g.config_path.empty()) ctx.cfg = parse_config(g.config_path);
  auto& c = ctx.cfg;
  if (!o.card.empty()) c.card = o.card, c.motion_kind.reset();
  if (!o.mode.empty()) {
    if (o.mode != "direct" && o.mode != "skeleton") throw ConfigError("--mode must be direct or skeleton");
    c.mode = o.mode;
  }
  auto pos = [](const char* name, double v) {
    if (!(v > 0.0)) throw ConfigError(std::string("--") + name + " must be positive");
    return v;
  };
  if (o.T) c.T = pos("T", *o.T), c.lines["run.T"] = 0;
  if (o.m) c.m = pos("m", *o.m);
  if (o.eps) c.eps = pos("eps", *o.eps);
  if (o.dt) c.dt = pos("dt", *o.dt);
  if (o.p) c.p = *o.p;
  if (o.x0) c.x0 = *o.x0;
  if (o.bins) c.bins = int(pos("bins", *o.bins));
  if (!o.times.empty()) {
    c.times = o.times;
    std::sort(c.times.begin(), c.times.end());
  }
  if (g.seed) c.seed = *g.seed;
  if (g.replicas) c.replicas = int(pos("replicas", *g.replicas));
  if (g.jobs) c.jobs = *g.jobs;
  if (!g.out.empty()) c.out = g.out;
  ctx.card = build_card(c);
  for (std::size_t i = 0; i < o.fs.size(); ++i) c.functions.emplace_back("f" + std::to_string(i + 1), o.fs[i]);
  ctx.fs = build_functions(c, ctx.card);
  return ctx;
}

std::string effective_config(const Context& ctx) {
  const auto& c = ctx.cfg;
  std::ostringstream os;
  os << "card = " << ctx.card.name << "\n";
  os << "T = " << format_double(c.T) << "\ndt = " << format_double(c.dt) << "\nm = " << format_double(c.m)
     << "\neps = " << format_double(c.eps) << "\nreplicas = " << c.replicas << "\nseed = " << c.seed
     << "\nmode = " << c.mode << "\nx0 = " << format_double(c.x0) << "\nmass = " << format_double(c.mass)
     << "\np = " << format_double(c.p) << "\nbins = " << c.bins << "\ntimes =";
  for (double t : c.times) os << " " << format_double(t);
  os << "\n";
  for (const auto& [k, v] : c.functions) os << "function " << k << " = " << v << "\n";
  return os.str();
}

void emit(Context& ctx, const std::string& content, const std::string& suffix = "") {
  if (ctx.cfg.out.empty()) {
    std::cout << content;
    return;
  }
  std::string path = ctx.cfg.out;
  if (!suffix.empty()) {
    auto dot = path.find_last_of('.');
    auto slash = path.find_last_of('/');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) path = path.substr(0, dot);
    path += suffix;
  }
  write_file(path, content);
  ctx.outputs.emplace_back(path, blob_sha1(content));
}

void finish(Context& ctx) {
  if (ctx.cfg.out.empty()) return;
  std::ostringstream os;
  os << "command =";
  for (const auto& a : ctx.argv) os << " " << a;
  os << "\nseed = " << ctx.cfg.seed << "\n\n[config]\n" << effective_config(ctx);
  if (!ctx.cfg.echo.empty()) os << "\n[config file " << ctx.cfg.origin << "]\n" << config_echo(ctx.cfg);
  os << "\n[outputs]\n";
  for (const auto& [p, h] : ctx.outputs) os << h << "  " << p << "\n";
  write_file(ctx.cfg.out + ".manifest", os.str());
}

void print_reports(Context& ctx, const std::vector<RunReport>& rs) {
  for (const auto& r : rs) {
    std::cerr << (r.pass ? "PASS " : "FAIL ") << r.check << ": estimate " << format_double(r.estimate);
    if (std::isfinite(r.oracle)) std::cerr << " oracle " << format_double(r.oracle);
    if (std::isfinite(r.z)) std::cerr << " z " << format_double(r.z);
    if (r.rule == Rule::at_most || r.rule == Rule::at_least) std::cerr << " " << to_string(r.rule) << " " << format_double(r.threshold);
    std::cerr << "\n";
    ctx.failed = ctx.failed || !r.pass;
  }
  emit(ctx, report_table(rs).str());
}

BatchConfig batch_config(const Context& ctx, Mode mode) {
  BatchConfig b;
  b.mode = mode;
  b.dress.m = ctx.cfg.m;
  b.dress.eps = ctx.cfg.eps;
  b.replicas = ctx.cfg.replicas;
  b.seed = ctx.cfg.seed;
  b.jobs = ctx.cfg.jobs;
  return b;
}

Mode mode_of(const Context& ctx) { return ctx.cfg.mode == "direct" ? Mode::direct : Mode::skeleton; }

std::vector<TestFunction> functions_or(const Context& ctx, TestFunction dflt) {
  return ctx.fs.empty() ? std::vector<TestFunction>{dflt} : ctx.fs;
}

MildGrid mild_grid(const Context& ctx, std::optional<int> nodes) {
  MildGrid g;
  g.dt = ctx.cfg.dt;
  if (nodes) g.nodes = *nodes;
  g.seed = ctx.cfg.seed;
  return g;
}

// subcommand bodies

void cmd_catalog_list(Context& ctx) {
  CsvTable t;
  t.header = {"name", "summary"};
  for (const auto& n : catalog_names()) t.add({n, card(n).summary});
  emit(ctx, t.str());
}

void cmd_catalog_show(Context& ctx) {
  const auto& c = ctx.card;
  CsvTable t;
  t.header = {"key", "value"};
  t.add({"name", c.name});
  t.add({"summary", c.summary});
  t.add({"lambda_c", format_double(c.eigen.lambda_c)});
  t.add({"p", format_double(c.p)});
  t.add({"phi(0)", format_double(c.phi(c.motion.domain == DomainKind::unit_interval ? Point(0.5) : Point(0.0)))});
  t.add({"simulable", c.simulable ? "yes" : "no"});
  for (const auto& [k, v] : c.params) t.add({"param " + k, format_double(v)});
  for (const auto& r : validate_assumptions(c))
    t.add({"check " + r.check, std::string(r.pass ? "pass" : "fail") + (r.note.empty() ? "" : " (" + r.note + ")")});
  emit(ctx, t.str());
}

void cmd_mech(Context& ctx, double zmax) {
  const auto& mech = ctx.card.mechanism;
  Point x(ctx.cfg.x0);
  CsvTable t;
  t.header = {"z", "psi", "psi0", "dpsi0"};
  for (int i = 0; i <= 50; ++i) {
    double z = zmax * i / 50.0;
    t.add({format_double(z), format_double(mech.psi(x, z)), format_double(mech.psi0(x, z)),
           format_double(mech.dpsi0(x, z))});
  }
  emit(ctx, t.str());
  auto root = csbp_root(mech);
  auto grey = grey_check(mech);
  std::cerr << "root z* = " << (root ? format_double(*root) : std::string("none")) << "\n";
  std::cerr << "grey: " << to_string(grey.result) << "\n";
  double w = ctx.card.w(x);
  auto law = skeleton_offspring(mech, w, x);
  std::cerr << "skeleton branching rate " << format_double(law.q) << ", mean offspring " << format_double(law.mean())
            << ", total mass " << format_double(law.total()) << "\n";
}

void cmd_mild(Context& ctx, std::optional<int> nodes) {
  auto f = functions_or(ctx, TestFunction::indicator(-1, 1)).front();
  auto sol = solve_mild(ctx.card.mechanism, ctx.card.motion, f, ctx.cfg.T, mild_grid(ctx, nodes));
  auto times = ctx.cfg.obs_times();
  CsvTable t;
  t.header = {"x", "t", "u"};
  for (double tt : times)
    for (double x : sol.x) t.add({format_double(x), format_double(tt), format_double(sol.value(x, tt))});
  emit(ctx, t.str());
  std::cerr << "iterations " << sol.iterations << ", residual " << format_double(sol.residual) << ", laplace at x0 "
            << format_double(laplace_functional(sol, ctx.cfg.initial(), ctx.cfg.T)) << "\n";
  if (ctx.cfg.out.size() && !sol.x.empty()) {
    std::vector<double> u;
    for (double x : sol.x) u.push_back(sol.value(x, ctx.cfg.T));
    emit(ctx, svg_band_plot("u_f(x, T)", sol.x, u, {}, "x"), ".svg");
  }
}

void cmd_skeleton(Context& ctx) {
  auto times = ctx.cfg.obs_times();
  const auto& c = ctx.card;
  auto runs = parallel_map(ctx.cfg.replicas, ctx.cfg.jobs,
                           [&](std::size_t r) { return run_skeleton(c, ctx.cfg.initial(), times, ctx.cfg.seed, r); });
  CsvTable t;
  t.header = {"replica", "t", "count", "W_Z"};
  std::vector<Accumulator> acc(times.size());
  for (std::size_t r = 0; r < runs.size(); ++r)
    for (std::size_t k = 0; k < runs[r].snapshots.size(); ++k) {
      const auto& s = runs[r].snapshots[k];
      double wz = 0.0;
      for (const auto& x : s.positions) wz += c.phi(x) / c.w(x);
      wz *= std::exp(-c.eigen.lambda_c * s.t);
      acc[k].add(wz);
      t.add({std::to_string(r), format_double(s.t), std::to_string(s.positions.size()), format_double(wz)});
    }
  emit(ctx, t.str());
  if (ctx.cfg.out.size()) {
    std::vector<double> m, se;
    for (const auto& a : acc) m.push_back(a.mean), se.push_back(a.se());
    emit(ctx, svg_band_plot("E W_Z", times, m, se), ".svg");
  }
}

void cmd_super(Context& ctx) {
  auto b = run_batch(ctx.card, ctx.cfg.initial(), ctx.cfg.obs_times(), ctx.fs, batch_config(ctx, mode_of(ctx)));
  CsvTable t;
  t.header = {"replica", "t", "mass", "n_mass", "n_skeleton", "W_X", "W_Z"};
  for (const auto& f : b.fs) t.header.push_back("<" + f.label + ",X>");
  std::vector<Accumulator> acc(b.times.size());
  for (std::size_t r = 0; r < b.runs.size(); ++r)
    for (std::size_t k = 0; k < b.runs[r].obs.size(); ++k) {
      const auto& o = b.runs[r].obs[k];
      acc[k].add(o.W_X);
      std::vector<std::string> row{std::to_string(r), format_double(o.t), format_double(o.mass),
                                   std::to_string(o.n_mass), std::to_string(o.n_skeleton), format_double(o.W_X),
                                   format_double(o.W_Z)};
      for (double v : o.fX) row.push_back(format_double(v));
      t.add(row);
    }
  emit(ctx, t.str());
  if (ctx.cfg.out.size()) {
    std::vector<double> m, se;
    for (const auto& a : acc) m.push_back(a.mean), se.push_back(a.se());
    emit(ctx, svg_band_plot("E W_X", b.times, m, se), ".svg");
  }
}

void cmd_spine(Context& ctx, std::optional<double> tail_from) {
  auto grid = ctx.cfg.times;
  if (grid.empty()) grid = linspace(ctx.cfg.T / 10.0, ctx.cfg.T, 10);
  double tf = tail_from ? *tail_from : grid[grid.size() / 2];
  auto cv = spine_lp_curve(ctx.card, ctx.cfg.initial(), ctx.cfg.p, grid, ctx.cfg.replicas, ctx.cfg.seed, tf, {},
                           ctx.cfg.jobs);
  CsvTable t;
  t.header = {"t", "mean", "se", "replicas"};
  for (std::size_t i = 0; i < cv.t.size(); ++i)
    t.add({format_double(cv.t[i]), format_double(cv.mean[i]), format_double(cv.se[i]), std::to_string(cv.n[i])});
  emit(ctx, t.str());
  std::cerr << "p = " << format_double(cv.p) << ": sup " << format_double(cv.sup) << ", tail slope "
            << format_double(cv.tail.slope) << " (z " << format_double(cv.tail_z) << ")\n";
  if (ctx.cfg.out.size()) emit(ctx, svg_band_plot("E[S_t^(p-1)]", cv.t, cv.mean, cv.se), ".svg");
}

void cmd_verify(Context& ctx, const std::string& check, const Overrides& o) {
  const auto& c = ctx.card;
  auto mu = ctx.cfg.initial();
  auto& cfg = ctx.cfg;
  std::vector<RunReport> rs;
  if (check == "mto") {
    if (!has_times(cfg)) cfg.times = {0.5, 1.0, 2.0};
    auto f = functions_or(ctx, TestFunction::indicator(-1, 1)).front();
    rs = check_many_to_one(c, f, mu, cfg.times, batch_config(ctx, Mode::skeleton));
  } else if (check == "variance") {
    auto f = functions_or(ctx, TestFunction::constant_fn(1.0)).front();
    rs = {check_variance(c, f, mu, cfg.T, batch_config(ctx, Mode::direct))};
  } else if (check == "laplace") {
    auto fs = functions_or(ctx, TestFunction::indicator(-1, 1));
    auto b = run_batch(c, mu, {cfg.T}, fs, batch_config(ctx, mode_of(ctx)));
    for (std::size_t i = 0; i < fs.size(); ++i)
      rs.push_back(check_laplace(b, i, cfg.T, laplace_oracle(c, fs[i], mu, cfg.T, mild_grid(ctx, o.nodes))));
  } else if (check == "slln") {
    if (!has_times(cfg)) cfg.times = {1.0, 2.0, 4.0, 8.0};
    auto f = functions_or(ctx, TestFunction::indicator(-1, 1)).front();
    auto b = run_batch(c, mu, cfg.times, {f}, batch_config(ctx, Mode::skeleton));
    rs = slln_curve(b, 0).reports;
    auto cp = check_coupling(b, cfg.times.back(), 0);
    rs.insert(rs.end(), cp.begin(), cp.end());
  } else if (check == "extinction") {
    double T = has_T(cfg) ? cfg.T : 15.0;
    rs = extinction_frequency(c, mu, T, batch_config(ctx, Mode::direct), o.threshold ? *o.threshold : 0.015);
  } else if (check == "ergodic") {
    double T = has_T(cfg) ? cfg.T : 50.0;
    double thr = o.threshold ? *o.threshold : (c.motion.domain == DomainKind::unit_interval ? 0.05 : 0.03);
    if (c.motion.domain == DomainKind::unit_interval && !o.x0 && !cfg.lines.count("run.x0")) mu = {{Point(0.5), 1.0}};
    rs = {ergodic_occupation(c, mu, T, cfg.bins, cfg.replicas, cfg.seed, thr, cfg.jobs)};
  } else if (check == "martingale") {
    if (!has_times(cfg)) cfg.times = {1.0, 2.0, 4.0, 8.0};
    auto b = run_batch(c, mu, cfg.times, {}, batch_config(ctx, mode_of(ctx)));
    rs = check_martingales(b);
  }
  print_reports(ctx, rs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skelsim: skeleton decomposition simulator and verification harness"};
  app.require_subcommand(1);
  Globals g;
  Overrides o;
  app.add_option("--config", g.config_path, "run configuration file");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--replicas", g.replicas, "number of replicas");
  app.add_option("--jobs", g.jobs, "worker threads (default: SKELSIM_JOBS or hardware concurrency)");
  app.add_option("--out", g.out, "output CSV path; a manifest is written next to it");
  app.add_flag("--strict", g.strict, "exit 1 when any verdict fails");

  auto common = [&](CLI::App* s) {
    s->add_option("--card", o.card, "catalog card");
    s->add_option("--T", o.T, "horizon");
    s->add_option("--times", o.times, "observation times")->delimiter(',');
    s->add_option("--f", o.fs, "test function, e.g. 'indicator-interval -1 1'");
    s->add_option("--m", o.m, "mass unit");
    s->add_option("--eps", o.eps, "immigration mass scale");
    s->add_option("--dt", o.dt, "mild solver time step");
    s->add_option("--x0", o.x0, "position of the initial unit atom");
    s->add_option("--mode", o.mode, "direct or skeleton");
  };

  auto* catalog = app.add_subcommand("catalog", "list or show example cards");
  catalog->require_subcommand(1);
  auto* cat_list = catalog->add_subcommand("list", "list card names");
  auto* cat_show = catalog->add_subcommand("show", "show one card and its assumption checks");
  std::string show_name;
  cat_show->add_option("name", show_name, "card name")->required();

  auto* mech = app.add_subcommand("mech", "tabulate the branching mechanism");
  common(mech);
  double zmax = 5.0;
  mech->add_option("--zmax", zmax, "largest z");

  auto* mild = app.add_subcommand("mild", "log-Laplace functional solver");
  mild->require_subcommand(1);
  auto* mild_solve = mild->add_subcommand("solve", "solve the mild equation for u_f");
  common(mild_solve);
  mild_solve->add_option("--nodes", o.nodes, "spatial nodes");

  auto* skel = app.add_subcommand("skeleton", "skeleton simulation");
  skel->require_subcommand(1);
  auto* skel_run = skel->add_subcommand("run", "simulate the skeleton");
  common(skel_run);

  auto* super = app.add_subcommand("super", "superprocess simulation");
  super->require_subcommand(1);
  auto* super_run = super->add_subcommand("run", "simulate X directly or through the skeleton");
  common(super_run);

  auto* spine = app.add_subcommand("spine", "spine L^p diagnostics");
  spine->require_subcommand(1);
  auto* spine_run = spine->add_subcommand("run", "E[(conditional mass)^(p-1)] curve");
  common(spine_run);
  spine_run->add_option("--p", o.p, "moment exponent in (1, 2]");
  std::optional<double> tail_from;
  spine_run->add_option("--tail-from", tail_from, "start of the tail window");

  auto* verify = app.add_subcommand("verify", "statistical checks against oracles");
  verify->require_subcommand(1);
  std::string check;
  for (const char* name : {"mto", "variance", "laplace", "slln", "extinction", "ergodic", "martingale"}) {
    auto* s = verify->add_subcommand(name, std::string("verify ") + name);
    common(s);
    s->add_option("--threshold", o.threshold, "pass threshold where applicable");
    s->add_option("--bins", o.bins, "histogram bins (ergodic)");
    s->add_option("--nodes", o.nodes, "mild solver nodes (laplace)");
    s->callback([&check, name] { check = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  std::vector<std::string> args(argv, argv + argc);
  try {
    if (*cat_show) o.card = show_name;
    Context ctx = prepare(g, o, args);
    if (*cat_list) cmd_catalog_list(ctx);
    else if (*cat_show) cmd_catalog_show(ctx);
    else if (*mech) cmd_mech(ctx, zmax);
    else if (*mild_solve) cmd_mild(ctx, o.nodes);
    else if (*skel_run) cmd_skeleton(ctx);
    else if (*super_run) cmd_super(ctx);
    else if (*spine_run) cmd_spine(ctx, tail_from);
    else if (!check.empty()) cmd_verify(ctx, check, o);
    finish(ctx);
    return g.strict && ctx.failed ? 1 : 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
