// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "riskeig/golden.hpp"
#include "riskeig/io.hpp"

#ifndef RISKEIG_VERSION
#define RISKEIG_VERSION "0.0.0"
#endif

namespace riskeig::cli
{

enum ExitCode : int
{
  kPass = 0,
  kCheckFailed = 1,
  kUsage = 2,
  kInfrastructure = 3,
};

inline int exit_code_for(ErrorKind k)
{
  switch (k)
  {
    case ErrorKind::config:
    case ErrorKind::precondition:
    case ErrorKind::catalog:
    case ErrorKind::invalid_model:
    case ErrorKind::monotonicity:
      return kUsage;
    default:
      return kInfrastructure;
  }
}

inline const std::vector<std::string> &suites()
{
  static const std::vector<std::string> s{"golden", "battery", "fk", "exit", "moment", "gamma", "probe", "identity"};
  return s;
}

/// Values given on the command line; unset ones fall back to the config file
/// and then to defaults.
struct Flags
{
  std::optional<std::string> model, config, radii, out, suite;
  std::optional<double> h, r, tol, dt, horizon;
  std::optional<std::size_t> paths, threads, trace_rows;
  std::optional<std::uint64_t> seed;
};

inline Json default_config()
{
  return Json{
      {"grid", {{"radii", {2.0, 4.0, 6.0, 8.0}}, {"r", 8.0}, {"h", 0.01}}},
      {"solver", {{"tol", 1e-10}, {"saturation_tol", 1e-6}, {"max_sweeps", 100}, {"scheme", "hybrid"}}},
      {"simulation",
       {{"dt", 1e-3}, {"horizon", 50.0}, {"paths", 10000}, {"seed", 1}, {"burn_in", 5.0}, {"trace_rows", 0}}},
      {"probe", {{"lo", -1.0}, {"hi", 1.0}, {"epsilon", 0.1}}},
      {"certificate", {{"gamma", 0.1}, {"r_cut", 1.0}}},
      {"exit", {{"x0", 2.0}, {"r", 1.0}}},
      {"suite", "golden"},
      {"threads", 0},
      {"out", "riskeig-out"},
  };
}

inline std::vector<double> parse_list(const std::string &s)
{
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
  {
    std::size_t used = 0;
    double v = 0.0;
    try
    {
      v = std::stod(item, &used);
    }
    catch (const std::exception &)
    {
      used = 0;
    }
    require(used > 0 && used == item.size(), ErrorKind::config, "malformed number '" + item + "' in list");
    out.push_back(v);
  }
  require(!out.empty(), ErrorKind::config, "empty list");
  return out;
}

/// Fully resolved and validated run description.
struct Plan
{
  std::string command;
  Json config;
  Model model;
  std::vector<double> radii;
  double r = 0.0;
  double h = 0.0;
  double sat_tol = 0.0;
  HjbOptions hjb;
  SimConfig sim;
  double burn_in = 0.0;
  std::size_t trace_rows = 0;
  Box bump;
  double epsilon = 0.0;
  double gamma = 0.0;
  double r_cut = 0.0;
  Point exit_x0{};
  double exit_r = 0.0;
  std::optional<double> delta;
  std::string suite;
  std::size_t threads = 1;
  std::filesystem::path out;

  /// Config without the keys that cannot change results.
  Json reproducible_config() const
  {
    Json c = config;
    c.erase("out");
    c.erase("threads");
    return c;
  }
};

inline Plan make_plan(const std::string &command, const Flags &f)
{
  Json cfg = default_config();
  if (f.config)
  {
    std::ifstream in(*f.config);
    require(static_cast<bool>(in), ErrorKind::config, "cannot read config file '" + *f.config + "'");
    Json user;
    try
    {
      user = Json::parse(in);
    }
    catch (const Json::parse_error &e)
    {
      throw Error(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
    }
    require(user.is_object(), ErrorKind::config, "config must be a JSON object");
    cfg.merge_patch(user);
  }
  if (f.model)
    cfg["model"] = *f.model;
  if (f.radii)
    cfg["grid"]["radii"] = parse_list(*f.radii);
  if (f.h)
    cfg["grid"]["h"] = *f.h;
  if (f.r)
    cfg["grid"]["r"] = *f.r;
  if (f.tol)
    cfg["solver"]["tol"] = *f.tol;
  if (f.dt)
    cfg["simulation"]["dt"] = *f.dt;
  if (f.horizon)
    cfg["simulation"]["horizon"] = *f.horizon;
  if (f.paths)
    cfg["simulation"]["paths"] = *f.paths;
  if (f.seed)
    cfg["simulation"]["seed"] = *f.seed;
  if (f.trace_rows)
    cfg["simulation"]["trace_rows"] = *f.trace_rows;
  if (f.threads)
    cfg["threads"] = *f.threads;
  if (f.out)
    cfg["out"] = *f.out;
  if (f.suite)
    cfg["suite"] = *f.suite;

  Plan p;
  p.command = command;
  try
  {
    p.suite = cfg.at("suite").get<std::string>();
    require(std::find(suites().begin(), suites().end(), p.suite) != suites().end(), ErrorKind::config,
            "unknown suite '" + p.suite + "'");
    const bool golden = command == "verify" && p.suite == "golden";
    if (golden)
    {
      if (!cfg.contains("model"))
        cfg["model"] = "ou_quadratic";
      require(cfg.at("model") == Json("ou_quadratic"), ErrorKind::config, "the golden suite is defined for ou_quadratic");
    }
    require(cfg.contains("model"), ErrorKind::config, "a model is required (--model NAME or \"model\" in --config)");
    p.model = model_from_json(cfg.at("model"));

    const Json &g = cfg.at("grid");
    p.h = g.at("h").get<double>();
    p.r = g.at("r").get<double>();
    p.radii = g.at("radii").get<std::vector<double>>();
    require(std::isfinite(p.h) && p.h > 0.0, ErrorKind::config, "--h must be positive");
    require(std::isfinite(p.r) && p.r > p.h, ErrorKind::config, "--r must exceed --h");
    require(!p.radii.empty(), ErrorKind::config, "--radii must not be empty");
    for (std::size_t k = 0; k < p.radii.size(); ++k)
    {
      require(p.radii[k] > p.h, ErrorKind::config, "every radius must exceed --h");
      require(k == 0 || p.radii[k] > p.radii[k - 1], ErrorKind::config, "--radii must be strictly increasing");
    }

    const Json &s = cfg.at("solver");
    p.hjb.eigen.tol = s.at("tol").get<double>();
    p.hjb.max_sweeps = s.at("max_sweeps").get<std::size_t>();
    p.sat_tol = s.at("saturation_tol").get<double>();
    const std::string scheme = s.at("scheme").get<std::string>();
    require(scheme == "hybrid" || scheme == "upwind", ErrorKind::config, "scheme must be hybrid or upwind");
    p.hjb.scheme = scheme == "hybrid" ? DriftScheme::hybrid : DriftScheme::upwind;
    require(p.hjb.eigen.tol > 0.0, ErrorKind::config, "--tol must be positive");
    require(p.hjb.max_sweeps >= 1, ErrorKind::config, "max_sweeps must be at least 1");

    const Json &sim = cfg.at("simulation");
    p.sim.dt = sim.at("dt").get<double>();
    p.sim.horizon = sim.at("horizon").get<double>();
    p.sim.paths = sim.at("paths").get<std::size_t>();
    p.sim.seed = sim.at("seed").get<std::uint64_t>();
    p.burn_in = sim.at("burn_in").get<double>();
    p.trace_rows = sim.at("trace_rows").get<std::size_t>();
    const double largest = std::max(p.r, p.radii.back());
    p.sim.kill_radius = sim.contains("kill_radius") ? sim.at("kill_radius").get<double>() : 2.0 * largest;
    require(p.sim.dt > 0.0 && p.sim.dt < p.sim.horizon, ErrorKind::config, "need 0 < --dt < --horizon");
    require(p.sim.paths >= 1, ErrorKind::config, "--paths must be at least 1");
    require(p.burn_in >= 0.0 && p.burn_in < p.sim.horizon, ErrorKind::config, "burn_in must lie in [0, horizon)");
    require(p.sim.kill_radius > 0.0, ErrorKind::config, "kill_radius must be positive");

    const int d = p.model.dim;
    const Json &pr = cfg.at("probe");
    p.bump.lo = detail::point_from_json(pr.at("lo"), d, "probe.lo");
    p.bump.hi = detail::point_from_json(pr.at("hi"), d, "probe.hi");
    p.epsilon = pr.at("epsilon").get<double>();
    require(p.epsilon >= 0.0, ErrorKind::config, "probe.epsilon must be nonnegative");
    const Json &ce = cfg.at("certificate");
    p.gamma = ce.at("gamma").get<double>();
    p.r_cut = ce.at("r_cut").get<double>();
    require(p.gamma > 0.0 && p.r_cut > 0.0, ErrorKind::config, "certificate gamma and r_cut must be positive");
    const Json &ex = cfg.at("exit");
    p.exit_x0 = detail::point_from_json(ex.at("x0"), d, "exit.x0");
    if (ex.at("x0").is_number())
      for (int k = 1; k < d; ++k)
        p.exit_x0[k] = 0.0;
    p.exit_r = ex.at("r").get<double>();
    if (ex.contains("delta"))
      p.delta = ex.at("delta").get<double>();
    require(p.exit_r > 0.0 && norm(p.exit_x0, d) > p.exit_r, ErrorKind::config, "exit.x0 must lie outside exit.r");
    require(norm(p.exit_x0, d) < p.sim.kill_radius, ErrorKind::config, "exit.x0 must lie inside kill_radius");

    const auto threads = cfg.at("threads").get<std::size_t>();
    p.threads = threads == 0 ? default_threads() : threads;
    p.sim.threads = p.threads;
    p.out = cfg.at("out").get<std::string>();
  }
  catch (const Json::exception &e)
  {
    throw Error(ErrorKind::config, std::string("bad config value: ") + e.what());
  }

  std::vector<Point> sample;
  const double largest = std::max(p.r, p.radii.back());
  for_each_lattice_point(p.model.dim, largest, largest / 64.0, [&](const Point &x) { sample.push_back(x); });
  validate_model(p.model, sample);
  p.config = std::move(cfg);
  return p;
}

inline void write_json(const std::filesystem::path &path, const Json &j)
{
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

template <class Fn>
void write_text(const std::filesystem::path &path, Fn &&fn)
{
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw std::runtime_error("cannot write " + path.string());
  fn(f);
}

inline Json manifest(const Plan &p, const std::vector<std::string> &outputs)
{
  const std::string canonical = p.reproducible_config().dump();
  return Json{{"tool", "riskeig"},
              {"version", RISKEIG_VERSION},
              {"command", p.command},
              {"config", p.config},
              {"config_hash", "fnv1a64:" + hex64(fnv1a(canonical))},
              {"seed", p.sim.seed},
              {"threads", p.threads},
              {"compiler", __VERSION__},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"outputs", outputs}};
}

inline SweepOptions sweep_options(const Plan &p)
{
  SweepOptions so;
  so.hjb = p.hjb;
  so.threads = p.threads;
  return so;
}

inline void write_solution_csv(const Plan &p, const HjbSolution &s, const std::filesystem::path &path)
{
  const LogTransform lt = log_transform(s.grid, s.eigenpair.v);
  std::vector<double> v(s.eigenpair.v.data(), s.eigenpair.v.data() + s.eigenpair.v.size());
  std::vector<double> u1(s.grid.size());
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    u1[i] = p.model.actions[s.policy.action[i]][0];
  write_text(path, [&](std::ostream &o) {
    write_field_csv(s.grid, {"v", "psi", "u1"}, {v, lt.psi, u1}, o);
  });
}

inline int cmd_solve(const Plan &p, std::ostream &out)
{
  const HjbSolution s = solve_hjb_dirichlet(p.model, make_grid(p.model.dim, p.r, p.h), p.hjb);
  Json result = to_json(s, p.model);
  result["command"] = "solve";
  result["model"] = p.model.label;
  result["hjb_residual"] = hjb_residual(p.model, s, p.hjb.scheme);
  std::filesystem::create_directories(p.out / "fields");
  write_json(p.out / "result.json", result);
  write_solution_csv(p, s, p.out / "fields" / "solution.csv");
  write_json(p.out / "manifest.json", manifest(p, {"result.json", "fields/solution.csv"}));
  out.precision(17);
  out << "lambda " << s.eigenpair.lambda << "\nresidual " << s.eigenpair.residual << "\nhjb_residual "
      << result["hjb_residual"].get<double>() << "\n";
  return kPass;
}

inline int cmd_sweep(const Plan &p, std::ostream &out)
{
  const SweepResult s = sweep(p.model, p.radii, p.h, p.sat_tol, sweep_options(p));
  const Regime regime = classify_regime(p.model, 2.0 * p.radii.back(), p.h * 10.0);
  Json result = to_json(s);
  result["command"] = "sweep";
  result["model"] = p.model.label;
  result["regime"] = {{"drift_assumption_holds", regime.assumption_holds}, {"label", regime.label}};
  std::filesystem::create_directories(p.out);
  write_json(p.out / "result.json", result);
  write_text(p.out / "sweep.csv", [&](std::ostream &o) { write_sweep_csv(s, o); });
  write_json(p.out / "manifest.json", manifest(p, {"result.json", "sweep.csv"}));
  out.precision(17);
  for (const auto &r : s.rows)
    out << "r " << r.radius << " lambda " << r.lambda << "\n";
  out << regime.label << " estimate " << s.lambda_star_estimate << (s.converged ? "" : " (not saturated)") << "\n";
  return kPass;
}

struct CertifyOutcome
{
  SweepResult sweep;
  GroundState ground;
  Certificate certificate;
  std::optional<ProbeResult> probe;
  Json probe_error;
};

inline bool probe_applicable(const Plan &p)
{
  const Box core = Box::cube(p.radii.front(), p.model.dim);
  Box overlap;
  for (int k = 0; k < p.model.dim; ++k)
  {
    overlap.lo[k] = std::max(p.bump.lo[k], core.lo[k]);
    overlap.hi[k] = std::min(p.bump.hi[k], core.hi[k]);
  }
  return overlap.volume(p.model.dim) > 0.0 && p.epsilon > 0.0;
}

inline CertifyOutcome certify(const Plan &p)
{
  CertifyOutcome c;
  c.sweep = sweep(p.model, p.radii, p.h, p.sat_tol, sweep_options(p));
  const HjbSolution &sol = *c.sweep.last_solution;
  c.ground = ground_state(p.model, sol);
  c.certificate = ergodicity_certificate(p.model, sol, p.gamma, p.r_cut, c.sweep.saturation_gap, p.hjb);
  c.ground.classification = c.certificate.classification;
  if (c.certificate.classification != Classification::geometric_certified && probe_applicable(p))
  {
    c.probe = monotonicity_probe(p.model, p.bump, p.epsilon, p.radii, p.h, p.sat_tol, sweep_options(p));
    if (c.probe->strict)
      c.ground.classification = Classification::recurrent_certified;
    else if (c.probe->gap <= std::max(10.0 * c.probe->saturation_gap, 1e-6))
      c.ground.classification = Classification::transient_suspected;
  }
  return c;
}

inline int cmd_certify(const Plan &p, std::ostream &out)
{
  const CertifyOutcome c = certify(p);
  Json result{{"command", "certify"},
              {"model", p.model.label},
              {"classification", to_string(c.ground.classification)},
              {"h2_asserted", p.model.h2_asserted},
              {"lambda", c.ground.lambda},
              {"sweep", to_json(c.sweep)},
              {"certificate", to_json(c.certificate)},
              {"probe", c.probe ? to_json(*c.probe) : Json(nullptr)}};
  const Grid &g = c.ground.grid;
  std::vector<std::vector<double>> cols(2 + 2 * static_cast<std::size_t>(g.dim), std::vector<double>(g.size()));
  std::vector<std::string> names{"psi", "lyapunov"};
  for (int k = 0; k < g.dim; ++k)
  {
    names.push_back("grad_psi_" + std::to_string(k + 1));
    names.push_back("twisted_drift_" + std::to_string(k + 1));
  }
  for (std::size_t i = 0; i < g.size(); ++i)
  {
    cols[0][i] = c.ground.psi[i];
    cols[1][i] = c.certificate.lyapunov[i];
    for (int k = 0; k < g.dim; ++k)
    {
      cols[2 + 2 * static_cast<std::size_t>(k)][i] = c.ground.grad_psi[i][k];
      cols[3 + 2 * static_cast<std::size_t>(k)][i] = c.ground.twisted_drift[i][k];
    }
  }
  std::vector<std::span<const double>> spans(cols.begin(), cols.end());
  std::filesystem::create_directories(p.out / "fields");
  write_json(p.out / "result.json", result);
  write_text(p.out / "sweep.csv", [&](std::ostream &o) { write_sweep_csv(c.sweep, o); });
  write_text(p.out / "fields" / "groundstate.csv", [&](std::ostream &o) { write_field_csv(g, names, spans, o); });
  write_json(p.out / "manifest.json", manifest(p, {"result.json", "sweep.csv", "fields/groundstate.csv"}));
  out.precision(17);
  out << "classification " << to_string(c.ground.classification) << "\ndelta " << c.certificate.delta << "\n";
  return kPass;
}

struct Outcome
{
  std::string name;
  std::string status;  // pass, fail, skipped
  Json detail;
};

inline Json outcomes_json(const std::vector<Outcome> &v)
{
  Json a = Json::array();
  for (const auto &o : v)
    a.push_back(Json{{"name", o.name}, {"status", o.status}, {"detail", o.detail}});
  return a;
}

inline std::vector<Outcome> run_battery(const Plan &p)
{
  const bool all = p.suite == "battery";
  auto wants = [&](const char *name) { return all || p.suite == name; };
  std::vector<Outcome> res;
  const SweepResult sw = sweep(p.model, p.radii, p.h, p.sat_tol, sweep_options(p));
  const HjbSolution &sol = *sw.last_solution;
  const Dynamics dyn = controlled_dynamics(p.model, sol.grid, sol.policy);
  const double lambda = sol.eigenpair.lambda;
  const Point origin{};

  auto guarded = [&](const char *name, auto &&body) {
    Outcome o{name, "fail", Json::object()};
    try
    {
      body(o);
    }
    catch (const Error &e)
    {
      o.status = "fail";
      o.detail["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
    }
    res.push_back(std::move(o));
  };

  if (wants("fk"))
    guarded("fk", [&](Outcome &o) {
      const FkEstimate fk = fk_lambda(dyn, origin, p.sim);
      bool ordered = true;
      for (const auto &r : sw.rows)
        ordered = ordered && r.lambda <= fk.value + 3.0 * fk.stderr;
      o.status = ordered ? "pass" : "fail";
      o.detail = {{"estimate", to_json(fk)}, {"ordering", ordered}};
    });
  if (wants("exit"))
    guarded("exit", [&](Outcome &o) {
      const ExitRatio ex =
          exit_representation_check(dyn, grid_function(sol.grid, sol.eigenpair.v), lambda, p.exit_r, p.exit_x0, p.sim);
      const bool ok = std::abs(ex.ratio - 1.0) <= 3.0 * ex.stderr && ex.truncated_fraction < 0.01;
      o.status = ok ? "pass" : "fail";
      o.detail = to_json(ex);
    });
  if (wants("moment"))
    guarded("moment", [&](Outcome &o) {
      const Certificate cert = ergodicity_certificate(p.model, sol, p.gamma, p.r_cut, sw.saturation_gap, p.hjb);
      o.detail["certificate"] = to_json(cert);
      if (!p.delta && cert.classification != Classification::geometric_certified)
      {
        o.status = "skipped";
        return;
      }
      const double delta = p.delta ? *p.delta : 0.5 * cert.delta;
      const ExpMomentReport em = exit_exponential_moment(dyn, lambda, delta, p.exit_r, p.exit_x0, p.sim);
      o.status = em.verdict == "finite-consistent" ? "pass" : "fail";
      o.detail["delta"] = delta;
      o.detail["exponential_moment"] = to_json(em);
    });
  if (wants("gamma"))
    guarded("gamma", [&](Outcome &o) {
      const GammaReport g = gamma_integral(dyn, lambda, origin, p.sim);
      o.status = g.verdict == "divergent-consistent" ? "pass" : "fail";
      o.detail = to_json(g);
    });
  if (wants("probe"))
    guarded("probe", [&](Outcome &o) {
      const ProbeResult pr = monotonicity_probe(p.model, p.bump, p.epsilon, p.radii, p.h, p.sat_tol, sweep_options(p));
      o.status = pr.strict ? "pass" : "fail";
      o.detail = to_json(pr);
    });
  if (wants("identity"))
    guarded("identity", [&](Outcome &o) {
      const IdentityReport id = ergodic_identity(p.model, sol, origin, p.sim, p.burn_in);
      o.status = id.abs_gap < 3.0 * id.stderr_sum ? "pass" : "fail";
      o.detail = to_json(id);
    });
  return res;
}

inline int cmd_verify(const Plan &p, std::ostream &out)
{
  std::vector<Outcome> outcomes;
  if (p.suite == "golden")
  {
    golden::Options go;
    go.sim = p.sim;
    go.threads = p.threads;
    go.burn_in = p.burn_in;
    for (auto &c : golden::run(go))
      outcomes.push_back(Outcome{std::to_string(c.id) + " " + c.name, c.pass ? "pass" : "fail", std::move(c.detail)});
  }
  else
  {
    outcomes = run_battery(p);
  }

  std::vector<std::string> outputs{"result.json"};
  std::filesystem::create_directories(p.out);
  if (p.trace_rows > 0)
  {
    const HjbSolution s = solve_hjb_dirichlet(p.model, make_grid(p.model.dim, p.radii.back(), p.h), p.hjb);
    SimConfig tc = p.sim;
    tc.paths = std::min<std::size_t>(p.sim.paths, 16);
    const std::size_t stride = std::max<std::size_t>(1, tc.steps() / 1000);
    const PathEnsemble ens = simulate(controlled_dynamics(p.model, s.grid, s.policy), Point{}, tc, tc.paths, stride);
    std::filesystem::create_directories(p.out / "fields");
    write_text(p.out / "fields" / "traces.csv",
               [&](std::ostream &o) { write_trace_csv(ens, p.model.dim, stride, p.trace_rows, o); });
    outputs.push_back("fields/traces.csv");
  }

  bool all_pass = true;
  for (const auto &o : outcomes)
    all_pass = all_pass && o.status != "fail";
  Json result{{"command", "verify"},
              {"suite", p.suite},
              {"model", p.model.label},
              {"passed", all_pass},
              {"checks", outcomes_json(outcomes)}};
  write_json(p.out / "result.json", result);
  write_json(p.out / "manifest.json", manifest(p, outputs));
  for (const auto &o : outcomes)
    out << (o.status == "pass" ? "PASS " : o.status == "skipped" ? "SKIP " : "FAIL ") << o.name << "\n";
  out << (all_pass ? "all checks passed" : "some checks failed") << "\n";
  return all_pass ? kPass : kCheckFailed;
}

inline void report_error(std::ostream &err, const std::string &kind, const std::string &message, int code,
                         const std::optional<std::filesystem::path> &dir = std::nullopt)
{
  const Json j{{"error", {{"kind", kind}, {"message", message}}}, {"exit_code", code}};
  err << j.dump() << "\n";
  if (dir)
  {
    std::error_code ec;
    std::filesystem::create_directories(*dir, ec);
    std::ofstream f(*dir / "error.json", std::ios::binary);
    if (f)
      f << j.dump(2) << "\n";
  }
}

/// Entry point: riskeig {solve|sweep|certify|verify} [flags].
inline int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
  CLI::App app{"Risk-sensitive ergodic control via Dirichlet principal eigenvalues", "riskeig"};
  // "-h" would collide with the spacing flag "--h"
  app.set_help_flag("--help", "print help and exit");
  app.set_version_flag("--version", RISKEIG_VERSION);
  app.require_subcommand(1, 1);
  Flags f;
  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--model", f.model, "builtin model name");
    sub->add_option("--config", f.config, "JSON experiment config; flags override it");
    sub->add_option("--radii", f.radii, "comma-separated increasing radii");
    sub->add_option("--h", f.h, "grid spacing");
    sub->add_option("--r", f.r, "radius for a single solve");
    sub->add_option("--tol", f.tol, "eigen residual tolerance");
    sub->add_option("--paths", f.paths, "Monte Carlo paths");
    sub->add_option("--dt", f.dt, "Euler-Maruyama step");
    sub->add_option("--horizon", f.horizon, "simulation horizon");
    sub->add_option("--seed", f.seed, "RNG seed");
    sub->add_option("--threads", f.threads, "worker threads (0 = all cores)");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--trace-rows", f.trace_rows, "row cap for fields/traces.csv (0 = none)");
  };
  CLI::App *solve = app.add_subcommand("solve", "one Dirichlet HJB solve");
  CLI::App *sweep_cmd = app.add_subcommand("sweep", "radius continuation");
  CLI::App *certify_cmd = app.add_subcommand("certify", "ground state and ergodicity classification");
  CLI::App *verify = app.add_subcommand("verify", "Monte Carlo verification suites");
  for (CLI::App *s : {solve, sweep_cmd, certify_cmd, verify})
    add_common(s);
  verify->add_option("--suite", f.suite, "golden, battery, fk, exit, moment, gamma, probe or identity");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    if (e.get_exit_code() == 0)
    {
      app.exit(e, out, err);
      return kPass;
    }
    report_error(err, "usage", e.what(), kUsage);
    err << app.help();
    return kUsage;
  }

  std::string command;
  for (const auto *s : {solve, sweep_cmd, certify_cmd, verify})
    if (s->parsed())
      command = s->get_name();

  // plan errors still land in --out when it was given
  std::optional<std::filesystem::path> dir;
  if (f.out)
    dir = *f.out;
  try
  {
    const Plan plan = make_plan(command, f);
    dir = plan.out;
    if (command == "solve")
      return cmd_solve(plan, out);
    if (command == "sweep")
      return cmd_sweep(plan, out);
    if (command == "certify")
      return cmd_certify(plan, out);
    return cmd_verify(plan, out);
  }
  catch (const Error &e)
  {
    const int code = exit_code_for(e.kind());
    report_error(err, to_string(e.kind()), e.what(), code, dir);
    return code;
  }
  catch (const std::exception &e)
  {
    report_error(err, "infrastructure", e.what(), kInfrastructure, dir);
    return kInfrastructure;
  }
}

}  // namespace riskeig::cli
