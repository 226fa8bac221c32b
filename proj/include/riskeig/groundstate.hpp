// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "riskeig/continuation.hpp"
#include "riskeig/montecarlo.hpp"

namespace riskeig
{

/// ψ = log v and its gradient on the interior nodes.
struct LogTransform
{
  std::vector<double> psi;
  std::vector<Point> grad_psi;
};

/// Central differences in the interior, one-sided toward the interior on
/// nodes whose neighbour lies on the Dirichlet shell.
inline LogTransform log_transform(const Grid &grid, std::span<const double> v)
{
  require(v.size() == grid.size(), ErrorKind::precondition, "vector length mismatch");
  LogTransform out;
  out.psi.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
  {
    require(v[i] > 0.0, ErrorKind::precondition, "log transform needs a positive eigenvector");
    out.psi[i] = std::log(v[i]);
  }
  out.grad_psi.assign(v.size(), Point{});
  const double h = grid.spacing;
  for (std::size_t i = 0; i < v.size(); ++i)
  {
    const auto k = grid.lattice(i);
    for (int d = 0; d < grid.dim; ++d)
    {
      const long e1 = d == 0 ? 1 : 0;
      const long e2 = d == 1 ? 1 : 0;
      const bool fwd = grid.interior(k[0] + e1, k[1] + e2);
      const bool bwd = grid.interior(k[0] - e1, k[1] - e2);
      const double here = out.psi[i];
      if (fwd && bwd)
        out.grad_psi[i][d] = (out.psi[grid.flat(k[0] + e1, k[1] + e2)] - out.psi[grid.flat(k[0] - e1, k[1] - e2)]) / (2.0 * h);
      else if (fwd)
        out.grad_psi[i][d] = (out.psi[grid.flat(k[0] + e1, k[1] + e2)] - here) / h;
      else if (bwd)
        out.grad_psi[i][d] = (here - out.psi[grid.flat(k[0] - e1, k[1] - e2)]) / h;
    }
  }
  return out;
}

inline LogTransform log_transform(const Grid &grid, const Vector &v)
{
  return log_transform(grid, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

/// b(x, v(x)) + a(x)∇ψ(x) at every node.
inline std::vector<Point> twisted_drift(const Model &model, const Grid &grid, const Policy &policy,
                                        std::span<const Point> grad_psi)
{
  check_policy(model, grid, policy);
  require(grad_psi.size() == grid.size(), ErrorKind::precondition, "gradient field size does not match grid");
  std::vector<Point> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
  {
    const Point x = grid.node(i);
    const Point b = model.drift(x, model.actions[policy.action[i]]);
    const Point ag = mat_vec(model.a(x), grad_psi[i], grid.dim);
    for (int d = 0; d < grid.dim; ++d)
      out[i][d] = b[d] + ag[d];
  }
  return out;
}

/// G = ⟨∇ψ, a∇ψ⟩ at every node.
inline std::vector<double> gradient_energy(const Model &model, const Grid &grid, std::span<const Point> grad_psi)
{
  std::vector<double> g(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    g[i] = dot(grad_psi[i], mat_vec(model.a(grid.node(i)), grad_psi[i], grid.dim), grid.dim);
  return g;
}

enum class Classification
{
  recurrent_certified,
  geometric_certified,
  transient_suspected,
  inconclusive,
};

inline const char *to_string(Classification c)
{
  switch (c)
  {
    case Classification::recurrent_certified:
      return "recurrent-certified";
    case Classification::geometric_certified:
      return "geometric-certified";
    case Classification::transient_suspected:
      return "transient-suspected";
    case Classification::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

struct GroundState
{
  Grid grid;
  Policy policy;
  double lambda = 0.0;
  std::vector<double> psi;
  std::vector<Point> grad_psi;
  std::vector<Point> twisted_drift;
  Classification classification = Classification::inconclusive;
};

inline GroundState ground_state(const Model &model, const HjbSolution &sol)
{
  GroundState gs;
  gs.grid = sol.grid;
  gs.policy = sol.policy;
  gs.lambda = sol.eigenpair.lambda;
  LogTransform lt = log_transform(sol.grid, sol.eigenpair.v);
  gs.psi = std::move(lt.psi);
  gs.grad_psi = std::move(lt.grad_psi);
  gs.twisted_drift = twisted_drift(model, sol.grid, sol.policy, gs.grad_psi);
  return gs;
}

struct Certificate
{
  Classification classification = Classification::inconclusive;
  double gamma = 0.0;
  double r_cut = 0.0;
  double lambda = 0.0;
  double lambda_aux = 0.0;
  double delta = 0.0;
  double noise_floor = 0.0;
  /// max over nodes outside B_{r_cut} of (L*Ṽ + δ̂/2·Ṽ)/Ṽ; ≤ 0 when the
  /// drift inequality holds.
  double max_violation = std::numeric_limits<double>::quiet_NaN();
  std::size_t checked_nodes = 0;
  /// Ṽ = Ψ̃/Ψ on the grid.
  std::vector<double> lyapunov;
};

/// Foster–Lyapunov certificate for the twisted process under the solution's
/// policy. Solves the eigenproblem for the potential lowered by γ on B_{r_cut}
/// and tests the discrete drift inequality for Ṽ = Ψ̃/Ψ, where the discrete
/// twisted generator is L*g = Ψ⁻¹ A(Ψg) − λg. `saturation_gap` is the last
/// gap of the radius sweep; δ̂ at or below three times it is not trusted.
inline Certificate ergodicity_certificate(const Model &model, const HjbSolution &sol, double gamma, double r_cut,
                                          double saturation_gap, const HjbOptions &opts = {})
{
  require(gamma > 0.0, ErrorKind::precondition, "gamma must be positive");
  require(r_cut > 0.0, ErrorKind::precondition, "r_cut must be positive");
  const Grid &grid = sol.grid;
  const Model aux_model = with_bump(model, Box::cube(r_cut, model.dim), -gamma);
  const OperatorMatrix base = assemble(model, grid, sol.policy, opts.scheme);
  const OperatorMatrix aux = assemble(aux_model, grid, sol.policy, opts.scheme);
  const EigenPair aux_pair = principal_eigenpair(aux, opts.eigen, &sol.eigenpair.v);

  Certificate cert;
  cert.gamma = gamma;
  cert.r_cut = r_cut;
  cert.lambda = sol.eigenpair.lambda;
  cert.lambda_aux = aux_pair.lambda;
  cert.delta = cert.lambda - cert.lambda_aux;
  cert.noise_floor = std::isfinite(saturation_gap) ? 3.0 * std::abs(saturation_gap)
                                                   : std::numeric_limits<double>::infinity();

  const Vector &psi = sol.eigenpair.v;
  const Vector &psi_aux = aux_pair.v;
  cert.lyapunov.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    cert.lyapunov[i] = psi_aux[static_cast<Eigen::Index>(i)] / psi[static_cast<Eigen::Index>(i)];

  const Vector a_psi_aux = base.matrix * psi_aux;
  const Box cut = Box::cube(r_cut, model.dim);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i)
  {
    if (cut.contains(grid.node(i), model.dim))
      continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const double lv = a_psi_aux[ii] / psi[ii] - cert.lambda * cert.lyapunov[i];
    worst = std::max(worst, (lv + 0.5 * cert.delta * cert.lyapunov[i]) / cert.lyapunov[i]);
    ++cert.checked_nodes;
  }
  cert.max_violation = worst;

  if (cert.delta > cert.noise_floor && cert.checked_nodes > 0 && worst <= 0.0)
    cert.classification = Classification::geometric_certified;
  else
    cert.classification = Classification::inconclusive;
  return cert;
}

struct IdentityReport
{
  double mu_f = 0.0;
  double half_mu_G = 0.0;
  double sum = 0.0;
  double lambda = 0.0;
  double abs_gap = 0.0;
  /// Standard errors from independent per-path time averages.
  double stderr_f = 0.0;
  double stderr_half_G = 0.0;
  double stderr_sum = 0.0;
  double truncated_fraction = 0.0;
  std::vector<std::string> warnings;
};

/// ½μ(G) + μ(f) against λ, with μ approximated by the post-burn-in occupation
/// measure of the base (untwisted) diffusion under the solution's policy.
/// The base process is assumed positive recurrent; that is the caller's claim.
inline IdentityReport ergodic_identity(const Model &model, const HjbSolution &sol, const Point &x0,
                                       const SimConfig &cfg, double burn_in)
{
  cfg.validate();
  require(burn_in >= 0.0 && burn_in < cfg.horizon, ErrorKind::precondition, "burn-in must lie in [0, horizon)");
  const Grid &grid = sol.grid;
  const LogTransform lt = log_transform(grid, sol.eigenpair.v);
  const std::vector<double> g_field = gradient_energy(model, grid, lt.grad_psi);
  const Dynamics dyn = controlled_dynamics(model, grid, sol.policy);
  const auto burn = static_cast<std::size_t>(std::llround(burn_in / cfg.dt));
  const std::size_t n = cfg.steps();
  require(burn < n, ErrorKind::precondition, "burn-in consumes the whole horizon");

  std::vector<double> avg_f(cfg.paths, 0.0);
  std::vector<double> avg_g(cfg.paths, 0.0);
  std::vector<std::uint8_t> killed(cfg.paths, 0);
  std::vector<std::uint8_t> left_grid(cfg.paths, 0);
  const double window = grid.boundary_radius();
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
    double sf = 0.0, sg = 0.0;
    bool outside = false;
    const PathStatus st = integrate_path(dyn, x0, cfg, p, [&](std::size_t k, const Point &x, const Point &) {
      if (k >= burn)
      {
        sf += dyn.potential(x);
        sg += interpolate(grid, std::span<const double>(g_field), x, Extension::clamp);
        for (int d = 0; d < grid.dim; ++d)
          outside = outside || std::abs(x[d]) >= window;
      }
      return true;
    });
    const double m = static_cast<double>(n - burn);
    avg_f[p] = sf / m;
    avg_g[p] = sg / m;
    killed[p] = st.truncated ? 1 : 0;
    left_grid[p] = outside ? 1 : 0;
  });

  std::vector<double> f_kept, g_kept, s_kept;
  for (std::size_t p = 0; p < cfg.paths; ++p)
  {
    if (killed[p])
      continue;
    f_kept.push_back(avg_f[p]);
    g_kept.push_back(0.5 * avg_g[p]);
    s_kept.push_back(avg_f[p] + 0.5 * avg_g[p]);
  }
  require(!s_kept.empty(), ErrorKind::estimator_undefined, "all paths truncated");

  IdentityReport rep;
  const MeanStderr mf = mean_stderr(f_kept);
  const MeanStderr mg = mean_stderr(g_kept);
  const MeanStderr ms = mean_stderr(s_kept);
  rep.mu_f = mf.mean;
  rep.half_mu_G = mg.mean;
  rep.sum = ms.mean;
  rep.stderr_f = mf.stderr;
  rep.stderr_half_G = mg.stderr;
  rep.stderr_sum = ms.stderr;
  rep.lambda = sol.eigenpair.lambda;
  rep.abs_gap = std::abs(rep.sum - rep.lambda);
  rep.truncated_fraction = 1.0 - static_cast<double>(s_kept.size()) / static_cast<double>(cfg.paths);
  if (rep.truncated_fraction > 0.0)
    rep.warnings.push_back("some paths truncated at kill_radius");
  if (std::count(left_grid.begin(), left_grid.end(), 1) > 0)
    rep.warnings.push_back("paths left the grid window; G was extended by clamping");
  rep.warnings.push_back("assumes the base diffusion is positive recurrent");
  return rep;
}

/// Node coordinates followed by one column per named field.
inline void write_field_csv(const Grid &grid, const std::vector<std::string> &names,
                            const std::vector<std::span<const double>> &columns, std::ostream &out)
{
  require(names.size() == columns.size(), ErrorKind::precondition, "one name per column");
  for (const auto &c : columns)
    require(c.size() == grid.size(), ErrorKind::precondition, "column length does not match grid");
  out << "x1";
  if (grid.dim == 2)
    out << ",x2";
  for (const auto &n : names)
    out << "," << n;
  out << "\n";
  out.precision(17);
  for (std::size_t i = 0; i < grid.size(); ++i)
  {
    const Point x = grid.node(i);
    out << x[0];
    if (grid.dim == 2)
      out << "," << x[1];
    for (const auto &c : columns)
      out << "," << c[i];
    out << "\n";
  }
}

}  // namespace riskeig
