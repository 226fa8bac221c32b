// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "riskeig/io.hpp"

namespace riskeig::golden
{

/// One reference check with closed-form or self-consistency targets.
struct Check
{
  int id = 0;
  std::string name;
  bool pass = false;
  Json detail;
};

struct Options
{
  /// Monte Carlo settings shared by the stochastic checks.
  SimConfig sim;
  std::size_t threads = 1;
  double burn_in = 5.0;
};

namespace detail
{

inline Model uncontrolled(int dim, std::function<Point(const Point &, const Action &)> drift,
                          std::function<double(const Point &, const Action &)> cost, const std::string &label)
{
  Model m;
  m.dim = dim;
  m.drift = std::move(drift);
  m.cost = std::move(cost);
  m.diffusion = [dim](const Point &) { return identity_mat(dim); };
  m.constant_diffusion = true;
  m.actions = {Action{}};
  m.label = label;
  return m;
}

inline Model ou_with_potential(std::function<double(const Point &, const Action &)> cost)
{
  return uncontrolled(
      1, [](const Point &x, const Action &) { return Point{-x[0], 0.0}; }, std::move(cost), "ou_random");
}

/// Random nonnegative potential: a + b x² + c·exp(−(x−m)²).
struct RandomPotential
{
  double a, b, c, m;

  double operator()(const Point &x, const Action &) const
  {
    return a + b * x[0] * x[0] + c * std::exp(-(x[0] - m) * (x[0] - m));
  }
};

inline RandomPotential draw_potential(PathStream &rng)
{
  return RandomPotential{rng.uniform(), 0.1 + 0.3 * rng.uniform(), 2.0 * rng.uniform(), 4.0 * rng.uniform() - 2.0};
}

/// Irreducible Metzler matrix: positive chain couplings plus random extra
/// nonnegative entries and an arbitrary diagonal.
inline SparseMatrix random_metzler(PathStream &rng, int n)
{
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i)
  {
    t.emplace_back(i, i, 4.0 * rng.uniform() - 2.0);
    if (i + 1 < n)
    {
      t.emplace_back(i, i + 1, 0.1 + rng.uniform());
      t.emplace_back(i + 1, i, 0.1 + rng.uniform());
    }
  }
  const int extra = 2 * n;
  for (int k = 0; k < extra; ++k)
  {
    const int i = static_cast<int>(rng.uniform() * n);
    const int j = static_cast<int>(rng.uniform() * n);
    if (i != j)
      t.emplace_back(i, j, rng.uniform());
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  a.makeCompressed();
  return a;
}

inline double dense_principal(const SparseMatrix &a)
{
  const Eigen::MatrixXd d(a);
  Eigen::EigenSolver<Eigen::MatrixXd> es(d, false);
  return es.eigenvalues().real().maxCoeff();
}

inline bool strictly_increasing(const SweepResult &s, double margin)
{
  for (std::size_t k = 1; k < s.rows.size(); ++k)
    if (!(s.rows[k].lambda - s.rows[k - 1].lambda > margin))
      return false;
  return true;
}

}  // namespace detail

inline constexpr double kOuLambda = 0.25;

/// Runs the reference checks. Every stochastic check uses `opts.sim` (seed,
/// paths, dt, horizon); grids are fixed.
inline std::vector<Check> run(const Options &opts)
{
  std::vector<Check> out;
  const double h = 0.01;
  SweepOptions so;
  so.threads = opts.threads;

  const Model ou = builtin("ou_quadratic");
  const SweepResult ou_sweep = sweep(ou, {2.0, 4.0, 6.0, 8.0}, h, 1e-6, so);
  const HjbSolution &ou_sol = *ou_sweep.last_solution;

  {
    Check c{1, "ou_quadratic eigenvalue", false, Json::object()};
    bool below = true;
    for (const auto &r : ou_sweep.rows)
      below = below && r.lambda < kOuLambda;
    const double err = std::abs(ou_sweep.lambda_star_estimate - kOuLambda);
    c.pass = below && err <= 1e-2;
    c.detail = {{"sweep", to_json(ou_sweep)}, {"abs_error", err}, {"all_below", below}};
    out.push_back(std::move(c));
  }

  {
    Check c{2, "dirichlet laplacian", false, Json::object()};
    const Model lap = detail::uncontrolled(
        1, [](const Point &, const Action &) { return Point{}; }, [](const Point &, const Action &) { return 0.0; },
        "laplacian");
    HjbOptions ho;
    ho.eigen.tol = 1e-8;
    const HjbSolution s = solve_hjb_dirichlet(lap, make_grid(1, 1.0, 1e-3), ho);
    const double target = -std::numbers::pi * std::numbers::pi / 8.0;
    const double err = std::abs(s.eigenpair.lambda - target);
    c.pass = err <= 5e-3;
    c.detail = {{"lambda", s.eigenpair.lambda}, {"target", target}, {"abs_error", err}};
    out.push_back(std::move(c));
  }

  {
    Check c{3, "radius monotonicity", true, Json::object()};
    const std::vector<double> radii{0.5, 1.0, 1.5, 2.0, 2.5};
    for (const char *name : {"ou_quadratic", "lq_clamped", "double_well"})
    {
      const SweepResult s = sweep(builtin(name), radii, h, 0.0, so);
      const bool ok = detail::strictly_increasing(s, 1e-8);
      c.pass = c.pass && ok;
      Json lambdas = Json::array();
      for (const auto &r : s.rows)
        lambdas.push_back(r.lambda);
      c.detail[name] = {{"radii", radii}, {"lambda", lambdas}, {"strict", ok}};
    }
    out.push_back(std::move(c));
  }

  {
    Check c{4, "convexity and shift in the potential", false, Json::object()};
    HjbOptions ho;
    ho.eigen.tol = 1e-11;
    const Grid g = make_grid(1, 4.0, h);
    auto lambda_of = [&](std::function<double(const Point &, const Action &)> f) {
      return solve_hjb_dirichlet(detail::ou_with_potential(std::move(f)), g, ho).eigenpair.lambda;
    };
    double worst = -std::numeric_limits<double>::infinity();
    for (std::uint64_t k = 0; k < 20; ++k)
    {
      PathStream rng(opts.sim.seed, k);
      const auto f1 = detail::draw_potential(rng);
      const auto f2 = detail::draw_potential(rng);
      const double theta = 0.25 * static_cast<double>(1 + k % 3);
      const double l1 = lambda_of(f1);
      const double l2 = lambda_of(f2);
      const double lm = lambda_of(
          [f1, f2, theta](const Point &x, const Action &u) { return theta * f1(x, u) + (1.0 - theta) * f2(x, u); });
      worst = std::max(worst, lm - (theta * l1 + (1.0 - theta) * l2));
    }
    PathStream rng(opts.sim.seed, 20);
    const auto f = detail::draw_potential(rng);
    const double shift = lambda_of([f](const Point &x, const Action &u) { return f(x, u) + 0.7; }) - lambda_of(f);
    c.pass = worst <= 1e-10 && std::abs(shift - 0.7) <= 1e-12;
    c.detail = {{"max_convexity_excess", worst}, {"shift", shift}};
    out.push_back(std::move(c));
  }

  {
    Check c{5, "lq_clamped selector optimality", false, Json::object()};
    const Model lq = builtin("lq_clamped");
    const HjbSolution s = solve_hjb_dirichlet(lq, make_grid(1, 8.0, h));
    bool monotone = true;
    for (std::size_t k = 1; k < s.lambda_history.size(); ++k)
      monotone = monotone && s.lambda_history[k] <= s.lambda_history[k - 1];
    const double res = hjb_residual(lq, s);
    // per-node minimizer of u·DV + ½u²V with the central difference DV
    const double du = lq.actions[1][0] - lq.actions[0][0];
    PathStream rng(opts.sim.seed, 1000);
    std::size_t matched = 0;
    for (int k = 0; k < 20; ++k)
    {
      const long node = std::lround((rng.uniform() * 2.0 - 1.0) * 4.0 / h);
      const std::size_t i = s.grid.flat(node, 0);
      const auto &v = s.eigenpair.v;
      const double dv = (v[static_cast<Eigen::Index>(i + 1)] - v[static_cast<Eigen::Index>(i - 1)]) / (2.0 * h);
      const double ustar = std::clamp(-dv / v[static_cast<Eigen::Index>(i)], -5.0, 5.0);
      if (std::abs(lq.actions[s.policy.action[i]][0] - ustar) <= du)
        ++matched;
    }
    c.pass = monotone && res <= 1e-10 && matched == 20;
    c.detail = {{"lambda_history", s.lambda_history}, {"hjb_residual", res}, {"matched_nodes", matched}};
    out.push_back(std::move(c));
  }

  const GroundState gs = ground_state(ou, ou_sol);
  {
    Check c{6, "twisted drift", false, Json::object()};
    double err = 0.0;
    for (std::size_t i = 0; i < ou_sol.grid.size(); ++i)
    {
      const Point x = ou_sol.grid.node(i);
      if (std::abs(x[0]) <= 0.5 * ou_sol.grid.radius)
        err = std::max(err, std::abs(gs.twisted_drift[i][0] + 0.5 * x[0]));
    }
    c.pass = err <= 5e-3;
    c.detail = {{"max_error", err}, {"window", 0.5 * ou_sol.grid.radius}};
    out.push_back(std::move(c));
  }

  SimConfig sim = opts.sim;
  sim.threads = opts.threads;
  sim.kill_radius = 16.0;
  {
    Check c{7, "ergodic identity", false, Json::object()};
    const IdentityReport id = ergodic_identity(ou, ou_sol, Point{}, sim, opts.burn_in);
    const bool ou_ok = id.abs_gap < 3.0 * id.stderr_sum && std::abs(id.mu_f - 0.1875) < 3.0 * id.stderr_f &&
                       std::abs(id.half_mu_G - 0.0625) < 3.0 * id.stderr_half_G;
    const Model dw = builtin("double_well");
    const HjbSolution dws = solve_hjb_dirichlet(dw, make_grid(1, 4.0, h));
    const IdentityReport dwid = ergodic_identity(dw, dws, Point{}, sim, opts.burn_in);
    const bool dw_ok = dwid.abs_gap < 3.0 * dwid.stderr_sum;
    c.pass = ou_ok && dw_ok;
    c.detail = {{"ou_quadratic", to_json(id)}, {"double_well", to_json(dwid)}};
    out.push_back(std::move(c));
  }

  const Dynamics ou_dyn = controlled_dynamics(ou, ou_sol.grid, ou_sol.policy);
  {
    Check c{8, "feynman-kac cross-validation", false, Json::object()};
    const FkEstimate fk = fk_lambda(ou_dyn, Point{}, sim);
    bool ordered = true;
    for (const auto &r : ou_sweep.rows)
      ordered = ordered && r.lambda <= fk.value + 3.0 * fk.stderr;
    const double err = std::abs(fk.value - kOuLambda);
    c.pass = err <= 5e-2 && ordered;
    c.detail = {{"estimate", to_json(fk)}, {"abs_error", err}, {"ordering", ordered}};
    out.push_back(std::move(c));
  }

  {
    Check c{9, "exit representation", false, Json::object()};
    try
    {
      const ExitRatio ex = exit_representation_check(ou_dyn, grid_function(ou_sol.grid, ou_sol.eigenpair.v),
                                                     ou_sol.eigenpair.lambda, 1.0, Point{2.0, 0.0}, sim);
      c.pass = std::abs(ex.ratio - 1.0) <= 3.0 * ex.stderr && ex.truncated_fraction < 0.01;
      c.detail = to_json(ex);
    }
    catch (const Error &e)
    {
      c.detail = {{"error", e.what()}};
    }
    out.push_back(std::move(c));
  }

  {
    Check c{10, "strict monotonicity probe", false, Json::object()};
    const std::vector<double> radii{2.0, 4.0, 6.0, 8.0};
    Box a;
    a.lo[0] = -1.0;
    a.hi[0] = 1.0;
    const ProbeResult local = monotonicity_probe(ou, a, 0.1, radii, h, 1e-6, so);
    const ProbeResult whole = monotonicity_probe(ou, Box::cube(1e6, 1), 0.3, radii, h, 1e-6, so);
    c.pass = local.gap > 1e-3 && std::abs(whole.gap - 0.3) <= 1e-6;
    c.detail = {{"local", to_json(local)}, {"whole_domain", to_json(whole)}};
    out.push_back(std::move(c));
  }

  {
    Check c{11, "geometric ergodicity certificate", false, Json::object()};
    const Certificate cert = ergodicity_certificate(ou, ou_sol, 0.1, 1.0, ou_sweep.saturation_gap);
    const bool certified = cert.classification == Classification::geometric_certified && cert.delta > 0.0 &&
                           cert.delta > 3.0 * std::abs(ou_sweep.saturation_gap);
    const ExpMomentReport em =
        exit_exponential_moment(ou_dyn, ou_sol.eigenpair.lambda, 0.5 * cert.delta, 1.0, Point{2.0, 0.0}, sim);
    c.pass = certified && em.verdict == "finite-consistent";
    c.detail = {{"certificate", to_json(cert)}, {"exponential_moment", to_json(em)}};
    out.push_back(std::move(c));
  }

  {
    Check c{12, "gamma integral", false, Json::object()};
    const GammaReport g = gamma_integral(ou_dyn, ou_sol.eigenpair.lambda, Point{}, sim);
    const bool plateau = g.verdict == "divergent-consistent" && g.plateau > 0.0;
    const Model flat = detail::uncontrolled(
        1, [](const Point &x, const Action &) { return Point{-x[0], 0.0}; },
        [](const Point &, const Action &) { return 0.75; }, "constant");
    SimConfig small = sim;
    small.paths = std::min<std::size_t>(sim.paths, 100);
    small.horizon = 10.0;
    const GammaReport sub = gamma_integral(base_dynamics(flat), 1.75, Point{}, small);
    const bool decays = sub.verdict == "convergent-suspected" && std::abs(sub.fitted_rate - 1.0) <= 0.1;
    c.pass = plateau && decays;
    c.detail = {{"ou_quadratic", to_json(g)}, {"subcritical", to_json(sub)}};
    out.push_back(std::move(c));
  }

  {
    Check c{13, "dense eigensolver equivalence", false, Json::object()};
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 50; ++k)
    {
      PathStream rng(opts.sim.seed, 2000 + k);
      const int n = 2 + static_cast<int>(rng.uniform() * 199.0);
      const SparseMatrix a = detail::random_metzler(rng, n);
      const double lambda = principal_eigenpair(a, 0).lambda;
      worst = std::max(worst, std::abs(lambda - detail::dense_principal(a)));
    }
    c.pass = worst <= 1e-8;
    c.detail = {{"max_abs_error", worst}};
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace riskeig::golden
