// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "riskeig/eigensolve.hpp"

namespace riskeig
{
namespace
{

Model uncontrolled(std::function<Point(const Point &, const Action &)> drift,
                   std::function<double(const Point &, const Action &)> cost)
{
  Model m;
  m.dim = 1;
  m.drift = std::move(drift);
  m.diffusion = [](const Point &) { return identity_mat(1); };
  m.cost = std::move(cost);
  m.actions = {Action{}};
  return m;
}

Model laplacian()
{
  return uncontrolled([](const Point &, const Action &) { return Point{}; },
                      [](const Point &, const Action &) { return 0.0; });
}

Model ou(double kappa)
{
  return uncontrolled([](const Point &x, const Action &) { return Point{-x[0], 0.0}; },
                      [kappa](const Point &x, const Action &) { return kappa * x[0] * x[0]; });
}

// Quadratic ansatz V = exp(a x²) for b = −βx, f = κx²: 2a² − 2aβ + κ = 0.
double riccati(double beta, double kappa) { return 0.5 * (beta - std::sqrt(beta * beta - 2.0 * kappa)); }

TEST(Principal, SymmetricTwoByTwo)
{
  SparseMatrix a(2, 2);
  a.insert(0, 0) = -1.0;
  a.insert(0, 1) = 0.5;
  a.insert(1, 0) = 0.5;
  a.insert(1, 1) = -1.0;
  const EigenPair ep = principal_eigenpair(a, 0);
  EXPECT_NEAR(ep.lambda, -0.5, 1e-12);
  EXPECT_NEAR(ep.v[0], 1.0, 1e-12);
  EXPECT_NEAR(ep.v[1], 1.0, 1e-10);
  EXPECT_LE(ep.residual, 1e-10);
}

TEST(Principal, DirichletSineMode)
{
  const Grid g = make_grid(1, 1.0, 0.01);
  const OperatorMatrix op = assemble(laplacian(), g, Policy::constant(g.size()));
  const EigenPair ep = principal_eigenpair(op);
  EXPECT_NEAR(ep.lambda, -std::numbers::pi * std::numbers::pi / 8.0, 5e-3);
  EXPECT_GT(ep.v.minCoeff(), 0.0);
}

TEST(Principal, TwoDimensionalSineMode)
{
  Model m = laplacian();
  m.dim = 2;
  m.diffusion = [](const Point &) { return identity_mat(2); };
  const Grid g = make_grid(2, 1.0, 0.05);
  const EigenPair ep = principal_eigenpair(assemble(m, g, Policy::constant(g.size())));
  EXPECT_NEAR(ep.lambda, -std::numbers::pi * std::numbers::pi / 4.0, 2e-2);
  EXPECT_GT(ep.v.minCoeff(), 0.0);
}

TEST(Principal, ConstantShift)
{
  const Grid g = make_grid(1, 4.0, 0.01);
  const Model m = ou(0.375);
  const EigenPair base = principal_eigenpair(assemble(m, g, Policy::constant(g.size())));
  const EigenPair moved = principal_eigenpair(assemble(with_cost_shift(m, 0.7), g, Policy::constant(g.size())));
  EXPECT_NEAR(moved.lambda - base.lambda, 0.7, 1e-12);
  EXPECT_LE((moved.v - base.v).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(Principal, MatchesDenseSpectrum)
{
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> size(2, 120);
  for (int trial = 0; trial < 20; ++trial)
  {
    const int n = size(rng);
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i)
    {
      dense(i, i + 1) = 0.1 + u(rng);
      dense(i + 1, i) = 0.1 + u(rng);
    }
    for (int k = 0; k < 3 * n; ++k)
    {
      const int i = static_cast<int>(u(rng) * n);
      const int j = static_cast<int>(u(rng) * n);
      if (i != j)
        dense(i, j) += u(rng);
    }
    for (int i = 0; i < n; ++i)
      dense(i, i) = -3.0 * u(rng);

    SparseMatrix a = dense.sparseView();
    const EigenPair ep = principal_eigenpair(a, 0);

    const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(dense, false).eigenvalues();
    double best = -1e300;
    for (int k = 0; k < n; ++k)
      best = std::max(best, ev[k].real());
    EXPECT_NEAR(ep.lambda, best, 1e-8) << "n=" << n;
    EXPECT_GT(ep.v.minCoeff(), 0.0);
  }
}

TEST(Principal, RejectsNegativeOffDiagonal)
{
  SparseMatrix a(2, 2);
  a.insert(0, 0) = -1.0;
  a.insert(0, 1) = -0.5;
  a.insert(1, 0) = 0.5;
  a.insert(1, 1) = -1.0;
  try
  {
    principal_eigenpair(a, 0);
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::monotonicity);
  }
}

TEST(Principal, IterationCapCarriesLastIterate)
{
  const Grid g = make_grid(1, 4.0, 0.01);
  EigenOptions opts;
  opts.max_iter = 1;
  opts.tol = 1e-14;
  try
  {
    principal_eigenpair(assemble(ou(0.375), g, Policy::constant(g.size())), opts);
    FAIL();
  }
  catch (const ConvergenceError &e)
  {
    ASSERT_TRUE(e.last_iterate.has_value());
    EXPECT_EQ(e.last_iterate->iterations, 1u);
  }
}

TEST(Hjb, OuBelowRiccatiValue)
{
  const double lambda = riccati(1.0, 0.375);
  ASSERT_DOUBLE_EQ(lambda, 0.25);
  const HjbSolution sol = solve_hjb_dirichlet(ou(0.375), make_grid(1, 8.0, 0.01));
  EXPECT_LT(sol.eigenpair.lambda, lambda);
  EXPECT_NEAR(sol.eigenpair.lambda, lambda, 1e-2);
  EXPECT_EQ(sol.policy_sweeps, 1u);
}

// With ρ = 1 the exponential-quadratic ansatz gives a = κ/(2β), λ = a and
// u*(x) = −2ax, inside the action bounds for |x| < M/(2a). A finite action
// grid with step du costs ½(u − u*)² per node, about du²/24 on average, so
// the strict bound below a is checked on a fine action grid.
TEST(Hjb, LinearQuadraticRiccati)
{
  const double a = 0.375 / 2.0;
  const Grid g = make_grid(1, 8.0, 0.01);
  const HjbSolution fine = solve_hjb_dirichlet(builtin("lq_clamped", {{"count", 2001.0}}), g);
  EXPECT_LT(fine.eigenpair.lambda, a);
  EXPECT_NEAR(fine.eigenpair.lambda, a, 1e-2);

  const Model m = builtin("lq_clamped");
  const HjbSolution sol = solve_hjb_dirichlet(m, g);
  const double du = m.actions[1][0] - m.actions[0][0];
  EXPECT_LT(sol.eigenpair.lambda, a + du * du / 24.0);
  EXPECT_GT(sol.eigenpair.lambda, fine.eigenpair.lambda);
  for (double x : {-2.0, -1.0, 0.5, 1.5, 3.0})
  {
    const std::size_t i = g.flat(std::lround(x / g.spacing), 0);
    EXPECT_NEAR(m.actions[sol.policy.action[i]][0], -2.0 * a * x, 0.1 + 0.05 * std::abs(x)) << "x=" << x;
  }
}

TEST(Hjb, SelectorMatchesPointwiseQuadraticMinimizer)
{
  const Model m = builtin("lq_clamped");
  const Grid g = make_grid(1, 8.0, 0.01);
  const HjbSolution sol = solve_hjb_dirichlet(m, g);
  const Vector &v = sol.eigenpair.v;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<long> pick(-400, 400);
  for (int trial = 0; trial < 20; ++trial)
  {
    const long k = pick(rng);
    const std::size_t i = g.flat(k, 0);
    const double dv = (v[static_cast<Eigen::Index>(i + 1)] - v[static_cast<Eigen::Index>(i - 1)]) / (2.0 * g.spacing);
    // argmin of u·V' + ½u²V over [−5, 5]
    const double target = std::clamp(-dv / v[static_cast<Eigen::Index>(i)], -5.0, 5.0);
    EXPECT_LE(std::abs(m.actions[sol.policy.action[i]][0] - target), 0.1 + 1e-12) << "node " << k;
  }
}

TEST(Hjb, HistoryNonIncreasingAndPolicyFixedPoint)
{
  const Model m = builtin("lq_clamped");
  const Grid g = make_grid(1, 4.0, 0.02);
  const HjbSolution sol = solve_hjb_dirichlet(m, g);
  ASSERT_GE(sol.lambda_history.size(), 2u);
  for (std::size_t k = 1; k < sol.lambda_history.size(); ++k)
    EXPECT_LE(sol.lambda_history[k], sol.lambda_history[k - 1] + 1e-12);
  const Policy again = select_policy(m, g, std::span<const double>(sol.eigenpair.v.data(), g.size()));
  EXPECT_EQ(again, sol.policy);
  EXPECT_LE(hjb_residual(m, sol), 1e-10);
}

TEST(Hjb, CostShiftKeepsPolicy)
{
  const Model m = builtin("lq_clamped");
  const Grid g = make_grid(1, 4.0, 0.02);
  const HjbSolution a = solve_hjb_dirichlet(m, g);
  const HjbSolution b = solve_hjb_dirichlet(with_cost_shift(m, 0.7), g);
  EXPECT_EQ(a.policy, b.policy);
  EXPECT_NEAR(b.eigenpair.lambda - a.eigenpair.lambda, 0.7, 1e-10);
}

TEST(Hjb, SweepCapReportsCandidates)
{
  HjbOptions opts;
  opts.max_sweeps = 1;
  try
  {
    solve_hjb_dirichlet(builtin("lq_clamped"), make_grid(1, 4.0, 0.02), opts);
    FAIL();
  }
  catch (const ConvergenceError &e)
  {
    ASSERT_TRUE(e.candidate_policies.has_value());
    EXPECT_NE(e.candidate_policies->first, e.candidate_policies->second);
  }
}

TEST(Residual, SolutionAndPerturbedLambda)
{
  const Model m = ou(0.375);
  const HjbSolution sol = solve_hjb_dirichlet(m, make_grid(1, 6.0, 0.01));
  const double tol = 1e-10;
  EXPECT_LE(hjb_residual(m, sol), tol);
  const std::span<const double> v(sol.eigenpair.v.data(), sol.grid.size());
  EXPECT_GE(hjb_residual(m, sol.grid, v, sol.eigenpair.lambda + 0.1), 0.1 * (1.0 - tol));
}

TEST(Residual, AnalyticGroundStateOrder)
{
  const Model m = ou(0.375);
  auto residual = [&](double h) {
    const Grid g = make_grid(1, 3.0, h);
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      v[i] = std::exp(0.25 * g.node(i)[0] * g.node(i)[0]);
    return hjb_residual(m, g, v, 0.25, DriftScheme::upwind,
                        [](const Point &x) { return std::exp(0.25 * x[0] * x[0]); });
  };
  const double r1 = residual(0.02);
  const double r2 = residual(0.01);
  EXPECT_GT(r1, r2);
  EXPECT_GE(std::log2(r1 / r2), 0.9);
}

TEST(Properties, MonotoneInPotential)
{
  const Grid g = make_grid(1, 4.0, 0.02);
  auto lam = [&](const Model &m) { return principal_eigenpair(assemble(m, g, Policy::constant(g.size()))).lambda; };
  const Model base = ou(0.375);
  const double l0 = lam(base);
  EXPECT_LT(l0, lam(ou(0.4)));
  EXPECT_LT(l0, lam(with_bump(base, Box{Point{0.5, 0.0}, Point{0.5, 0.0}}, 0.01)));
  EXPECT_LE(l0, lam(with_bump(base, Box{Point{3.0, 0.0}, Point{3.5, 0.0}}, 0.5)));
}

TEST(Properties, ConvexInPotential)
{
  const Grid g = make_grid(1, 4.0, 0.02);
  auto lam = [&](std::function<double(const Point &, const Action &)> f) {
    const Model m = uncontrolled([](const Point &x, const Action &) { return Point{-x[0], 0.0}; }, std::move(f));
    return principal_eigenpair(assemble(m, g, Policy::constant(g.size()))).lambda;
  };
  auto f1 = [](const Point &x, const Action &) { return 0.375 * x[0] * x[0]; };
  auto f2 = [](const Point &x, const Action &) { return 0.6 * std::sin(2.0 * x[0]) + 0.6 + 0.1 * std::abs(x[0]); };
  const double l1 = lam(f1);
  const double l2 = lam(f2);
  for (double t : {0.25, 0.5, 0.75})
  {
    const double lt = lam([&](const Point &x, const Action &u) { return t * f1(x, u) + (1.0 - t) * f2(x, u); });
    EXPECT_LE(lt, t * l1 + (1.0 - t) * l2 + 1e-10) << "t=" << t;
  }
}

}  // namespace
}  // namespace riskeig
