// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "riskeig/discretize.hpp"

namespace riskeig
{
namespace
{

Model linear_model(double b0, double kappa, int dim = 1, Mat sigma = identity_mat(2))
{
  Model m;
  m.dim = dim;
  m.drift = [b0, dim](const Point &, const Action &) {
    Point b{};
    for (int k = 0; k < dim; ++k)
      b[k] = b0;
    return b;
  };
  m.diffusion = [sigma](const Point &) { return sigma; };
  m.cost = [kappa, dim](const Point &x, const Action &) { return kappa * dot(x, x, dim); };
  m.actions = {Action{}};
  return m;
}

double entry(const OperatorMatrix &op, std::size_t r, std::size_t c)
{
  return op.matrix.coeff(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

TEST(Grid, ThreeNodeLine)
{
  const Grid g = make_grid(1, 1.0, 0.5);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g.origin_index(), 1u);
  EXPECT_DOUBLE_EQ(g.node(0)[0], -0.5);
  EXPECT_DOUBLE_EQ(g.node(1)[0], 0.0);
  EXPECT_DOUBLE_EQ(g.node(2)[0], 0.5);
}

TEST(Grid, NineNodeSquare)
{
  const Grid g = make_grid(2, 1.0, 0.5);
  EXPECT_EQ(g.size(), 9u);
  EXPECT_EQ(g.origin_index(), 4u);
  const Point o = g.node(g.origin_index());
  EXPECT_EQ(o[0], 0.0);
  EXPECT_EQ(o[1], 0.0);
}

TEST(Grid, SpacingNotDividingRadius)
{
  const Grid g = make_grid(1, 1.0, 0.3);
  ASSERT_EQ(g.size(), 7u);
  const double expected[] = {-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9};
  for (std::size_t i = 0; i < 7; ++i)
    EXPECT_NEAR(g.node(i)[0], expected[i], 1e-15);
  EXPECT_EQ(g.node(g.origin_index())[0], 0.0);
}

TEST(Grid, NodeCapIsResourceError)
{
  try
  {
    make_grid(2, 10.0, 0.001, 1000);
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::resource);
  }
  EXPECT_THROW(make_grid(1, 1.0, 0.0), Error);
}

TEST(Assemble, PureSecondDifferenceRow)
{
  const Grid g = make_grid(1, 0.5, 0.1);
  const OperatorMatrix op = assemble(linear_model(0.0, 0.0), g, Policy::constant(g.size()));
  const std::size_t i = g.origin_index();
  EXPECT_NEAR(entry(op, i, i - 1), 50.0, 1e-12);
  EXPECT_NEAR(entry(op, i, i), -100.0, 1e-12);
  EXPECT_NEAR(entry(op, i, i + 1), 50.0, 1e-12);
}

TEST(Assemble, UpwindRow)
{
  const Grid g = make_grid(1, 0.5, 0.1);
  const OperatorMatrix op = assemble(linear_model(2.0, 0.0), g, Policy::constant(g.size()), DriftScheme::upwind);
  const std::size_t i = g.origin_index();
  EXPECT_NEAR(entry(op, i, i - 1), 50.0, 1e-12);
  EXPECT_NEAR(entry(op, i, i), -120.0, 1e-12);
  EXPECT_NEAR(entry(op, i, i + 1), 70.0, 1e-12);
}

TEST(Assemble, HybridUsesCentralWhenMonotone)
{
  const Grid g = make_grid(1, 0.5, 0.1);
  const OperatorMatrix op = assemble(linear_model(2.0, 0.0), g, Policy::constant(g.size()));
  const std::size_t i = g.origin_index();
  EXPECT_NEAR(entry(op, i, i - 1), 40.0, 1e-12);
  EXPECT_NEAR(entry(op, i, i), -100.0, 1e-12);
  EXPECT_NEAR(entry(op, i, i + 1), 60.0, 1e-12);
}

TEST(Assemble, CostOnDiagonal)
{
  const Grid g = make_grid(1, 1.0, 0.1);
  const OperatorMatrix op = assemble(linear_model(0.0, 1.0), g, Policy::constant(g.size()));
  const std::size_t i = g.flat(5, 0);
  ASSERT_NEAR(g.node(i)[0], 0.5, 1e-15);
  EXPECT_NEAR(entry(op, i, i), -100.0 + 0.25, 1e-12);
}

TEST(Assemble, MixedDerivativeDominance)
{
  Mat ok{};
  ok[0] = {1.0, 0.0};
  ok[1] = {0.5, std::sqrt(0.75)};  // a = [[1, .5], [.5, 1]]
  const Grid g = make_grid(2, 1.0, 0.25);
  const OperatorMatrix op = assemble(linear_model(0.3, 0.0, 2, ok), g, Policy::constant(g.size()));
  EXPECT_TRUE(has_m_structure(op.matrix));

  Mat bad{};
  bad[0] = {1.0, 0.0};
  bad[1] = {2.0, 0.1};  // a12 = 2 > a11 = 1
  try
  {
    assemble(linear_model(0.0, 0.0, 2, bad), g, Policy::constant(g.size()));
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::monotonicity);
  }
}

TEST(Assemble, NanCoefficientIsInvalidModel)
{
  Model m = linear_model(0.0, 0.0);
  m.cost = [](const Point &, const Action &) { return std::nan(""); };
  const Grid g = make_grid(1, 1.0, 0.5);
  try
  {
    assemble(m, g, Policy::constant(g.size()));
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_model);
  }
}

TEST(Assemble, PolicySizeMismatch)
{
  const Grid g = make_grid(1, 1.0, 0.5);
  EXPECT_THROW(assemble(linear_model(0.0, 0.0), g, Policy::constant(2)), Error);
}

TEST(Apply, SingleNode)
{
  OperatorMatrix op;
  op.matrix.resize(1, 1);
  op.matrix.insert(0, 0) = -1.0;
  Vector v(1);
  v << 2.0;
  EXPECT_DOUBLE_EQ(apply(op, v)[0], -2.0);
}

TEST(Apply, ConstantInKernelOfSecondDifference)
{
  const Grid g = make_grid(1, 0.2, 0.1);
  const OperatorMatrix op = assemble(linear_model(0.0, 0.0), g, Policy::constant(g.size()));
  const Vector out = apply(op, Vector::Ones(3));
  EXPECT_EQ(out[1], 0.0);
}

TEST(Apply, MatchesDenseMultiply)
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution keep(0.5);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(5, 5);
  OperatorMatrix op;
  op.matrix.resize(5, 5);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c)
      if (r == c || keep(rng))
      {
        dense(r, c) = u(rng);
        op.matrix.insert(r, c) = dense(r, c);
      }
  Vector v(5);
  for (int k = 0; k < 5; ++k)
    v[k] = u(rng);
  const Vector got = apply(op, v);
  for (int r = 0; r < 5; ++r)
  {
    double ref = 0.0;
    for (int c = 0; c < 5; ++c)
      ref += dense(r, c) * v[c];
    EXPECT_NEAR(got[r], ref, 1e-14);
  }
  EXPECT_THROW(apply(op, Vector::Ones(4)), Error);
}

TEST(Properties, DiscreteMaximumPrinciple)
{
  for (int dim : {1, 2})
  {
    Model m = linear_model(0.0, 0.0, dim);
    m.drift = [dim](const Point &x, const Action &) {
      Point b{};
      for (int k = 0; k < dim; ++k)
        b[k] = std::sin(3.0 * x[k]) - 2.0 * x[k];
      return b;
    };
    const Grid g = make_grid(dim, 1.0, 0.1);
    for (DriftScheme s : {DriftScheme::hybrid, DriftScheme::upwind})
    {
      const OperatorMatrix op = assemble(m, g, Policy::constant(g.size()), s);
      EXPECT_TRUE(has_m_structure(op.matrix));
      const Vector out = apply(op, Vector::Ones(static_cast<Eigen::Index>(g.size())));
      for (std::size_t i = 0; i < g.size(); ++i)
      {
        const auto k = g.lattice(i);
        const bool inner = std::abs(k[0]) < g.half && (dim == 1 || std::abs(k[1]) < g.half);
        if (inner)
          EXPECT_NEAR(out[static_cast<Eigen::Index>(i)], 0.0, 1e-9);
        else
          EXPECT_LE(out[static_cast<Eigen::Index>(i)], 1e-9);
      }
    }
  }
}

// Max error of (Aφ)(x) against ½a·φ'' + bφ' + cφ for φ = x², over |x| ≤ 0.5.
double consistency_error(double b0, double kappa, double h, DriftScheme scheme)
{
  Model m = linear_model(0.0, kappa);
  m.drift = [b0](const Point &x, const Action &) { return Point{b0 * (1.0 + x[0]), 0.0}; };
  const Grid g = make_grid(1, 1.0, h);
  std::vector<double> phi(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    phi[i] = g.node(i)[0] * g.node(i)[0];
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
  {
    const double x = g.node(i)[0];
    if (std::abs(x) > 0.5 + 1e-12)
      continue;
    const Stencil s = node_stencil(m, g, i, Action{}, scheme);
    const double got = apply_stencil(s, g, i, phi, [](const Point &p) { return p[0] * p[0]; });
    const double exact = 1.0 + b0 * (1.0 + x) * 2.0 * x + kappa * x * x * x * x;
    worst = std::max(worst, std::abs(got - exact));
  }
  return worst;
}

TEST(Properties, ConsistencyOrderUpwind)
{
  // second differences are exact on x², so the error is the drift term
  const double e1 = consistency_error(3.0, 0.0, 0.02, DriftScheme::upwind);
  const double e2 = consistency_error(3.0, 0.0, 0.01, DriftScheme::upwind);
  ASSERT_GT(e1, 0.0);
  EXPECT_GE(std::log2(e1 / e2), 0.9);
}

TEST(Properties, ConsistencyWithoutDrift)
{
  Model m = linear_model(0.0, 0.0);
  auto err = [&](double h) {
    const Grid g = make_grid(1, 1.0, h);
    std::vector<double> phi(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      phi[i] = std::cos(g.node(i)[0]);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
    {
      const double x = g.node(i)[0];
      if (std::abs(x) > 0.5 + 1e-12)
        continue;
      const double got = apply_stencil(node_stencil(m, g, i, Action{}), g, i, phi);
      worst = std::max(worst, std::abs(got + 0.5 * std::cos(x)));
    }
    return worst;
  };
  EXPECT_NEAR(consistency_error(0.0, 0.0, 0.01, DriftScheme::upwind), 0.0, 1e-9);
  const double e1 = err(0.02);
  const double e2 = err(0.01);
  EXPECT_GE(std::log2(e1 / e2), 1.9);
}

TEST(MatrixMarket, HeaderAndEntries)
{
  const Grid g = make_grid(1, 0.2, 0.1);
  const OperatorMatrix op = assemble(linear_model(0.0, 0.0), g, Policy::constant(g.size()));
  std::ostringstream out;
  write_matrix_market(op, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "%%MatrixMarket matrix coordinate real general");
  std::getline(in, line);
  EXPECT_EQ(line[0], '%');
  int rows = 0, cols = 0, nnz = 0;
  in >> rows >> cols >> nnz;
  EXPECT_EQ(rows, 3);
  EXPECT_EQ(cols, 3);
  EXPECT_EQ(nnz, 7);
  int r = 0, c = 0;
  double v = 0.0;
  in >> r >> c >> v;
  EXPECT_EQ(r, 1);
  EXPECT_EQ(c, 1);
  EXPECT_NEAR(v, -100.0, 1e-12);
}

}  // namespace
}  // namespace riskeig
