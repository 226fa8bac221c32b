// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "riskeig/continuation.hpp"
#include "riskeig/groundstate.hpp"

namespace riskeig
{
namespace
{

Model scalar(std::function<Point(const Point &, const Action &)> drift, std::function<double(const Point &, const Action &)> cost,
             double sigma = 1.0)
{
  Model m;
  m.dim = 1;
  m.drift = std::move(drift);
  m.diffusion = [sigma](const Point &) {
    Mat s{};
    s[0][0] = sigma;
    return s;
  };
  m.cost = std::move(cost);
  m.actions = {Action{}};
  m.constant_diffusion = true;
  return m;
}

std::vector<double> sample(const Grid &g, double (*fn)(double))
{
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    v[i] = fn(g.node(i)[0]);
  return v;
}

TEST(LogTransform, ConstantEigenvector)
{
  const Grid g = make_grid(2, 1.0, 0.25);
  const std::vector<double> v(g.size(), 1.0);
  const LogTransform lt = log_transform(g, v);
  for (std::size_t i = 0; i < g.size(); ++i)
  {
    EXPECT_EQ(lt.psi[i], 0.0);
    EXPECT_EQ(lt.grad_psi[i][0], 0.0);
    EXPECT_EQ(lt.grad_psi[i][1], 0.0);
  }
}

TEST(LogTransform, QuadraticGroundState)
{
  const Grid g = make_grid(1, 4.0, 0.01);
  const LogTransform lt = log_transform(g, sample(g, [](double x) { return std::exp(0.25 * x * x); }));
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < g.size(); ++i)
    worst = std::max(worst, std::abs(lt.grad_psi[i][0] - 0.5 * g.node(i)[0]));
  EXPECT_LT(worst, 1e-9);
  // one-sided at the ends: error h/4
  EXPECT_NEAR(lt.grad_psi.back()[0], 0.5 * g.node(g.size() - 1)[0], 0.25 * g.spacing + 1e-9);
}

TEST(LogTransform, Exponential)
{
  const Grid g = make_grid(1, 2.0, 0.01);
  const LogTransform lt = log_transform(g, sample(g, [](double x) { return std::exp(x); }));
  for (const Point &p : lt.grad_psi)
    EXPECT_NEAR(p[0], 1.0, 1e-4);
}

TEST(LogTransform, RejectsNonPositive)
{
  const Grid g = make_grid(1, 1.0, 0.5);
  EXPECT_THROW(log_transform(g, std::vector<double>{1.0, 0.0, 1.0}), Error);
}

TEST(TwistedDrift, OuMatchesRiccati)
{
  const Model m = builtin("ou_quadratic");
  const HjbSolution sol = solve_hjb_dirichlet(m, make_grid(1, 8.0, 0.01));
  const GroundState gs = ground_state(m, sol);
  const double slope = -std::sqrt(1.0 - 2.0 * 0.375);
  double worst = 0.0;
  for (std::size_t i = 0; i < gs.grid.size(); ++i)
  {
    const double x = gs.grid.node(i)[0];
    if (std::abs(x) <= 4.0)
      worst = std::max(worst, std::abs(gs.twisted_drift[i][0] - slope * x));
  }
  EXPECT_LE(worst, 5e-3);
  EXPECT_EQ(gs.lambda, sol.eigenpair.lambda);
}

TEST(TwistedDrift, FlatGroundStateKeepsDrift)
{
  const Model m = builtin("ou_quadratic");
  const Grid g = make_grid(1, 2.0, 0.1);
  const std::vector<Point> zero(g.size(), Point{});
  const auto field = twisted_drift(m, g, Policy::constant(g.size()), zero);
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_EQ(field[i][0], -g.node(i)[0]);
}

TEST(TwistedDrift, LinearLogWithZeroDrift)
{
  const Model m = scalar([](const Point &, const Action &) { return Point{}; },
                         [](const Point &, const Action &) { return 0.0; }, 2.0);
  const Grid g = make_grid(1, 2.0, 0.05);
  const LogTransform lt = log_transform(g, sample(g, [](double x) { return std::exp(0.1 * x); }));
  const auto field = twisted_drift(m, g, Policy::constant(g.size()), lt.grad_psi);
  for (const Point &b : field)
    EXPECT_NEAR(b[0], 0.1 * 4.0, 1e-10);
  const auto energy = gradient_energy(m, g, lt.grad_psi);
  for (double e : energy)
    EXPECT_NEAR(e, 0.01 * 4.0, 1e-10);
}

TEST(Certificate, OuIsGeometric)
{
  const Model m = builtin("ou_quadratic");
  const SweepResult s = sweep(m, {2.0, 4.0, 6.0, 8.0}, 0.01, 1e-6);
  const Certificate c = ergodicity_certificate(m, *s.last_solution, 0.1, 1.0, s.saturation_gap);
  EXPECT_EQ(c.classification, Classification::geometric_certified);
  EXPECT_GT(c.delta, 0.0);
  EXPECT_GT(c.delta, 3.0 * std::abs(s.saturation_gap));
  EXPECT_LE(c.max_violation, 0.0);
  EXPECT_GT(c.checked_nodes, 0u);
  EXPECT_EQ(c.lyapunov.size(), s.last_solution->grid.size());
}

// The auxiliary eigenvalue against a dense spectral solve of the bumped operator.
TEST(Certificate, AuxiliaryEigenvalueMatchesDenseSolve)
{
  const Model m = builtin("ou_quadratic");
  const Grid g = make_grid(1, 6.0, 0.05);
  const HjbSolution sol = solve_hjb_dirichlet(m, g);
  const Certificate c = ergodicity_certificate(m, sol, 0.1, 1.0, 0.0);

  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
  const double h = g.spacing;
  for (std::size_t i = 0; i < g.size(); ++i)
  {
    const double x = g.node(i)[0];
    const auto r = static_cast<Eigen::Index>(i);
    // −x·h ≤ 1 everywhere on this grid, so the hybrid scheme is central
    dense(r, r) = -1.0 / (h * h) + 0.375 * x * x - (std::abs(x) <= 1.0 + 1e-9 ? 0.1 : 0.0);
    if (i > 0)
      dense(r, r - 1) = 0.5 / (h * h) + x / (2.0 * h);
    if (i + 1 < g.size())
      dense(r, r + 1) = 0.5 / (h * h) - x / (2.0 * h);
  }
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(dense, false).eigenvalues();
  double top = -1e300;
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    top = std::max(top, ev[k].real());
  EXPECT_NEAR(c.lambda_aux, top, 1e-8);
  EXPECT_NEAR(c.delta, sol.eigenpair.lambda - top, 1e-8);
}

TEST(Certificate, BrownianMotionIsInconclusive)
{
  const Model m = scalar([](const Point &, const Action &) { return Point{}; },
                         [](const Point &, const Action &) { return 0.0; });
  const SweepResult s = sweep(m, {2.0, 4.0, 6.0, 8.0}, 0.02, 1e-6);
  const Certificate c = ergodicity_certificate(m, *s.last_solution, 0.1, 1.0, s.saturation_gap);
  EXPECT_EQ(c.classification, Classification::inconclusive);
}

TEST(Certificate, ZeroGammaIsPreconditionError)
{
  const Model m = builtin("ou_quadratic");
  const HjbSolution sol = solve_hjb_dirichlet(m, make_grid(1, 2.0, 0.1));
  try
  {
    ergodicity_certificate(m, sol, 0.0, 1.0, 0.0);
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

TEST(Identity, OuGaussianMoments)
{
  const Model m = builtin("ou_quadratic");
  const HjbSolution sol = solve_hjb_dirichlet(m, make_grid(1, 8.0, 0.01));
  SimConfig cfg;
  cfg.dt = 2e-3;
  cfg.horizon = 30.0;
  cfg.paths = 1000;
  const IdentityReport rep = ergodic_identity(m, sol, Point{}, cfg, 5.0);
  // stationary law N(0, 1/2): μ(f) = 0.375·0.5, ½μ(G) = ½·0.25·0.5
  EXPECT_NEAR(rep.mu_f, 0.1875, 3.0 * rep.stderr_f + 2e-3);
  EXPECT_NEAR(rep.half_mu_G, 0.0625, 3.0 * rep.stderr_half_G + 1e-3);
  EXPECT_LE(rep.abs_gap, 3.0 * rep.stderr_sum + 2e-3);
  EXPECT_EQ(rep.truncated_fraction, 0.0);
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(Identity, ConstantPotential)
{
  const Model m = scalar([](const Point &x, const Action &) { return Point{-x[0], 0.0}; },
                         [](const Point &, const Action &) { return 0.3; });
  const HjbSolution sol = solve_hjb_dirichlet(m, make_grid(1, 8.0, 0.02));
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.horizon = 10.0;
  cfg.paths = 200;
  const IdentityReport rep = ergodic_identity(m, sol, Point{}, cfg, 1.0);
  EXPECT_NEAR(rep.mu_f, 0.3, 1e-12);
  EXPECT_EQ(rep.stderr_f, 0.0);
  EXPECT_LT(rep.half_mu_G, 1e-6);
  EXPECT_NEAR(rep.sum, rep.lambda, 1e-6);
}

TEST(FieldCsv, Columns)
{
  const Grid g = make_grid(2, 1.0, 0.5);
  std::vector<double> a(g.size(), 1.0), b(g.size(), 2.0);
  std::ostringstream out;
  write_field_csv(g, {"psi", "lyapunov"}, {a, b}, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x1,x2,psi,lyapunov");
  std::getline(in, line);
  EXPECT_EQ(line, "-0.5,-0.5,1,2");
  EXPECT_THROW(write_field_csv(g, {"psi"}, {}, out), Error);
}

}  // namespace
}  // namespace riskeig
