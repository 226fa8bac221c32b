// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskeig/groundstate.hpp"

namespace riskeig
{

using Json = nlohmann::json;

namespace detail
{

inline double number(const Json &j, const char *key, double fallback)
{
  if (!j.contains(key))
    return fallback;
  require(j.at(key).is_number(), ErrorKind::config, std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

inline Point point_from_json(const Json &j, int dim, const char *what)
{
  Point p{};
  if (j.is_number())
  {
    for (int k = 0; k < dim; ++k)
      p[k] = j.get<double>();
    return p;
  }
  require(j.is_array() && static_cast<int>(j.size()) == dim, ErrorKind::config,
          std::string(what) + " must be a number or an array of length dim");
  for (int k = 0; k < dim; ++k)
  {
    require(j[k].is_number(), ErrorKind::config, std::string(what) + " entries must be numbers");
    p[k] = j[k].get<double>();
  }
  return p;
}

inline std::function<Point(const Point &, const Action &)> drift_family(const Json &j, int d)
{
  require(j.is_object() && j.contains("family"), ErrorKind::config, "drift needs a 'family'");
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "ou")
  {
    const double beta = number(j, "beta", 1.0);
    return [d, beta](const Point &x, const Action &) {
      Point b{};
      for (int k = 0; k < d; ++k)
        b[k] = -beta * x[k];
      return b;
    };
  }
  if (fam == "ou_control")
  {
    const double beta = number(j, "beta", 1.0);
    const double gain = number(j, "gain", 1.0);
    return [d, beta, gain](const Point &x, const Action &u) {
      Point b{};
      for (int k = 0; k < d; ++k)
        b[k] = -beta * x[k] + gain * u[k];
      return b;
    };
  }
  if (fam == "double_well")
  {
    return [d](const Point &x, const Action &) {
      Point b{};
      for (int k = 0; k < d; ++k)
        b[k] = -(x[k] * x[k] * x[k] - x[k]);
      return b;
    };
  }
  if (fam == "tanh")
  {
    const double gain = number(j, "gain", 0.0);
    return [d, gain](const Point &x, const Action &u) {
      Point b{};
      for (int k = 0; k < d; ++k)
        b[k] = -std::tanh(x[k]) + gain * u[k];
      return b;
    };
  }
  if (fam == "zero")
    return [](const Point &, const Action &) { return Point{}; };
  if (fam == "constant")
  {
    require(j.contains("value"), ErrorKind::config, "constant drift needs 'value'");
    const Point v = point_from_json(j.at("value"), d, "drift value");
    return [v](const Point &, const Action &) { return v; };
  }
  throw Error(ErrorKind::config, "unknown drift family '" + fam + "'");
}

inline std::function<double(const Point &, const Action &)> cost_family(const Json &j, int d)
{
  require(j.is_object() && j.contains("family"), ErrorKind::config, "cost needs a 'family'");
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "quadratic")
  {
    const double kappa = number(j, "kappa", 1.0);
    const double rho = number(j, "rho", 0.0);
    return [d, kappa, rho](const Point &x, const Action &u) { return kappa * dot(x, x, d) + 0.5 * rho * dot(u, u, d); };
  }
  if (fam == "saturating")
  {
    const double weight = number(j, "weight", 0.0);
    return [d, weight](const Point &x, const Action &u) {
      const double r2 = dot(x, x, d);
      return r2 / (1.0 + r2) + weight * dot(u, u, d);
    };
  }
  if (fam == "constant")
  {
    const double c = number(j, "value", 0.0);
    return [c](const Point &, const Action &) { return c; };
  }
  if (fam == "zero")
    return [](const Point &, const Action &) { return 0.0; };
  throw Error(ErrorKind::config, "unknown cost family '" + fam + "'");
}

inline std::vector<Action> actions_from_json(const Json &j, int d)
{
  if (j.is_object())
  {
    require(j.contains("interval") && j.at("interval").is_array() && j.at("interval").size() == 2, ErrorKind::config,
            "actions.interval must be [lo, hi]");
    const double lo = j.at("interval")[0].get<double>();
    const double hi = j.at("interval")[1].get<double>();
    const double count = number(j, "count", 2.0);
    require(count >= 1.0 && std::floor(count) == count, ErrorKind::config, "actions.count must be a positive integer");
    return interval_actions(lo, hi, static_cast<std::size_t>(count), d);
  }
  require(j.is_array() && !j.empty(), ErrorKind::config, "actions must be an interval object or a non-empty list");
  std::vector<Action> out;
  for (const auto &a : j)
    out.push_back(point_from_json(a, d, "action"));
  return out;
}

}  // namespace detail

/// Model from a JSON object: either {"builtin": name, "params": {...}} or
/// {"dim", "drift": {"family", ...}, "cost": {"family", ...}, "sigma",
/// "actions"}. `sigma` is a scalar (times I) or a dim×dim matrix.
inline Model model_from_json(const Json &j)
{
  if (j.is_string())
    return builtin(j.get<std::string>());
  require(j.is_object(), ErrorKind::config, "model must be a builtin name or an object");
  if (j.contains("builtin"))
  {
    Params params;
    if (j.contains("params"))
    {
      require(j.at("params").is_object(), ErrorKind::config, "params must be an object");
      for (const auto &[k, v] : j.at("params").items())
      {
        require(v.is_number(), ErrorKind::config, "param '" + k + "' must be a number");
        params[k] = v.get<double>();
      }
    }
    Model m = builtin(j.at("builtin").get<std::string>(), params);
    m.h2_asserted = j.value("h2_asserted", false);
    return m;
  }

  Model m;
  m.dim = static_cast<int>(detail::number(j, "dim", 1.0));
  require(m.dim == 1 || m.dim == 2, ErrorKind::config, "dim must be 1 or 2");
  const int d = m.dim;
  require(j.contains("drift") && j.contains("cost"), ErrorKind::config, "inline model needs 'drift' and 'cost'");
  m.drift = detail::drift_family(j.at("drift"), d);
  m.cost = detail::cost_family(j.at("cost"), d);

  Mat sigma = identity_mat(d);
  if (j.contains("sigma"))
  {
    const Json &s = j.at("sigma");
    if (s.is_number())
    {
      for (int k = 0; k < d; ++k)
        sigma[k][k] = s.get<double>();
    }
    else
    {
      require(s.is_array() && static_cast<int>(s.size()) == d, ErrorKind::config, "sigma must be a scalar or dim×dim");
      for (int r = 0; r < d; ++r)
        sigma[r] = detail::point_from_json(s[r], d, "sigma row");
    }
  }
  m.diffusion = [sigma](const Point &) { return sigma; };
  m.constant_diffusion = true;
  m.actions = j.contains("actions") ? detail::actions_from_json(j.at("actions"), d) : std::vector<Action>{Action{}};
  m.label = j.value("label", std::string("inline"));
  m.h2_asserted = j.value("h2_asserted", false);
  return m;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string &bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes)
  {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v)
{
  static const char *digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4)
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

/// Non-finite values have no JSON literal; they are written as strings.
inline Json real(double x)
{
  if (std::isfinite(x))
    return x;
  if (std::isnan(x))
    return "nan";
  return x > 0 ? "inf" : "-inf";
}

inline Json grid_json(const Grid &g)
{
  return Json{{"dim", g.dim}, {"r", g.radius}, {"h", g.spacing}, {"nodes", g.size()}};
}

inline Json to_json(const EigenPair &e, const Grid &g)
{
  Json v = Json::array();
  for (Eigen::Index i = 0; i < e.v.size(); ++i)
    v.push_back(e.v[i]);
  return Json{{"lambda", e.lambda}, {"residual", real(e.residual)}, {"iterations", e.iterations},
              {"grid", grid_json(g)}, {"v", std::move(v)}};
}

inline Json to_json(const HjbSolution &s, const Model &m)
{
  Json out = to_json(s.eigenpair, s.grid);
  out["policy"] = s.policy.action;
  Json acts = Json::array();
  for (const Action &a : m.actions)
  {
    Json row = Json::array();
    for (int k = 0; k < m.dim; ++k)
      row.push_back(a[k]);
    acts.push_back(row);
  }
  out["actions"] = std::move(acts);
  out["policy_sweeps"] = s.policy_sweeps;
  out["lambda_history"] = s.lambda_history;
  return out;
}

inline Json to_json(const SweepResult &s)
{
  Json rows = Json::array();
  for (const auto &r : s.rows)
    rows.push_back(Json{{"radius", r.radius}, {"spacing", r.spacing}, {"lambda", r.lambda},
                        {"residual", real(r.residual)}, {"policy_sweeps", r.policy_sweeps}});
  return Json{{"rows", std::move(rows)},
              {"lambda_star_estimate", s.lambda_star_estimate},
              {"saturation_gap", real(s.saturation_gap)},
              {"converged", s.converged},
              {"tail", Json{{"value", s.tail.value},
                            {"ratio", real(s.tail.ratio)},
                            {"extrapolated", s.tail.extrapolated},
                            {"non_monotone", s.tail.non_monotone}}}};
}

inline Json to_json(const FkEstimate &e)
{
  return Json{{"value", real(e.value)},
              {"stderr", real(e.stderr)},
              {"paths_used", e.paths_used},
              {"truncated_fraction", e.truncated_fraction},
              {"warnings", e.warnings}};
}

inline Json to_json(const ExitRatio &e)
{
  return Json{{"ratio", real(e.ratio)},
              {"stderr", real(e.stderr)},
              {"paths_used", e.paths_used},
              {"truncated_fraction", e.truncated_fraction},
              {"psi_x0", e.psi_x0}};
}

inline Json to_json(const ExpMomentReport &r)
{
  Json sched = Json::array();
  for (const auto &p : r.schedule)
    sched.push_back(Json{{"horizon", p.horizon}, {"estimate", real(p.estimate)}, {"stderr", real(p.stderr)}});
  return Json{{"estimate", to_json(r.estimate)}, {"schedule", std::move(sched)}, {"max_share", real(r.max_share)},
              {"verdict", r.verdict}};
}

inline Json to_json(const GammaReport &r)
{
  return Json{{"times", r.times},
              {"log_g", r.log_g},
              {"fitted_rate", real(r.fitted_rate)},
              {"plateau", real(r.plateau)},
              {"truncated_fraction", r.truncated_fraction},
              {"verdict", r.verdict}};
}

inline Json to_json(const ProbeResult &p)
{
  return Json{{"lambda_base", p.lambda_base},
              {"lambda_bumped", p.lambda_bumped},
              {"gap", p.gap},
              {"saturation_gap", real(p.saturation_gap)},
              {"strict", p.strict}};
}

inline Json to_json(const MixingReport &r)
{
  return Json{{"lags", r.lags},
              {"autocorrelation", r.autocorrelation},
              {"rate", real(r.rate)},
              {"r_squared", real(r.r_squared)},
              {"warnings", r.warnings}};
}

inline Json to_json(const Certificate &c)
{
  return Json{{"classification", to_string(c.classification)},
              {"gamma", c.gamma},
              {"r_cut", c.r_cut},
              {"lambda", c.lambda},
              {"lambda_aux", c.lambda_aux},
              {"delta", c.delta},
              {"noise_floor", real(c.noise_floor)},
              {"max_violation", real(c.max_violation)},
              {"checked_nodes", c.checked_nodes}};
}

inline Json to_json(const IdentityReport &r)
{
  return Json{{"mu_f", r.mu_f},
              {"half_mu_G", r.half_mu_G},
              {"sum", r.sum},
              {"lambda", r.lambda},
              {"abs_gap", r.abs_gap},
              {"stderr_f", r.stderr_f},
              {"stderr_half_G", r.stderr_half_G},
              {"stderr_sum", r.stderr_sum},
              {"truncated_fraction", r.truncated_fraction},
              {"warnings", r.warnings}};
}

/// Per-path traces as CSV (path, step, x1[, x2]); stops after `row_cap` rows.
inline void write_trace_csv(const PathEnsemble &ens, int dim, std::size_t stride, std::size_t row_cap,
                            std::ostream &out)
{
  out << "path,step,x1";
  if (dim == 2)
    out << ",x2";
  out << "\n";
  out.precision(17);
  std::size_t rows = 0;
  for (std::size_t p = 0; p < ens.traces.size(); ++p)
    for (std::size_t s = 0; s < ens.traces[p].size(); ++s)
    {
      if (rows++ >= row_cap)
        return;
      out << p << "," << s * stride << "," << ens.traces[p][s][0];
      if (dim == 2)
        out << "," << ens.traces[p][s][1];
      out << "\n";
    }
}

}  // namespace riskeig
