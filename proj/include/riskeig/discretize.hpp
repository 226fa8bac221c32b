// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "riskeig/model.hpp"
#include "riskeig/types.hpp"

namespace riskeig
{

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t kDefaultNodeCap = 4'000'000;

/// Interior nodes of the lattice hℤ^dim strictly inside the box (−r, r)^dim.
///
/// Nodes sit at k·h for |k| ≤ half, so the origin is always a node. The
/// Dirichlet boundary is the next lattice shell at ±(half+1)·h, which lies
/// within one cell of r. Ordering is row-major with the first axis fastest.
struct Grid
{
  int dim = 1;
  double radius = 0.0;
  double spacing = 0.0;
  long half = 0;

  std::size_t per_axis() const { return static_cast<std::size_t>(2 * half + 1); }

  std::size_t size() const { return dim == 1 ? per_axis() : per_axis() * per_axis(); }

  /// Half-width of the box on whose boundary the Dirichlet value is imposed.
  double boundary_radius() const { return static_cast<double>(half + 1) * spacing; }

  std::size_t origin_index() const { return dim == 1 ? static_cast<std::size_t>(half) : flat(0, 0); }

  std::array<long, 2> lattice(std::size_t i) const
  {
    const long m = static_cast<long>(per_axis());
    const long li = static_cast<long>(i);
    if (dim == 1)
      return {li - half, 0};
    return {li % m - half, li / m - half};
  }

  std::size_t flat(long k1, long k2) const
  {
    const long m = static_cast<long>(per_axis());
    if (dim == 1)
      return static_cast<std::size_t>(k1 + half);
    return static_cast<std::size_t>((k2 + half) * m + (k1 + half));
  }

  bool interior(long k1, long k2) const
  {
    return std::abs(k1) <= half && (dim == 1 ? k2 == 0 : std::abs(k2) <= half);
  }

  Point at(long k1, long k2) const
  {
    return Point{static_cast<double>(k1) * spacing, dim == 1 ? 0.0 : static_cast<double>(k2) * spacing};
  }

  Point node(std::size_t i) const
  {
    const auto k = lattice(i);
    return at(k[0], k[1]);
  }

  std::vector<Point> nodes() const
  {
    std::vector<Point> out(size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = node(i);
    return out;
  }
};

inline Grid make_grid(int dim, double radius, double spacing, std::size_t node_cap = kDefaultNodeCap)
{
  require(dim == 1 || dim == 2, ErrorKind::precondition, "grid dimension must be 1 or 2");
  require(spacing > 0.0 && radius > spacing, ErrorKind::precondition, "grid requires radius > spacing > 0");
  Grid g;
  g.dim = dim;
  g.radius = radius;
  g.spacing = spacing;
  g.half = static_cast<long>(std::ceil(radius / spacing - 1e-9)) - 1;
  const double per_axis = 2.0 * static_cast<double>(g.half) + 1.0;
  const double count = dim == 1 ? per_axis : per_axis * per_axis;
  require(count <= static_cast<double>(node_cap), ErrorKind::resource, "grid node count exceeds cap");
  return g;
}

/// Action index per grid node: the discretized stationary Markov selector.
struct Policy
{
  std::vector<std::size_t> action;

  static Policy constant(std::size_t nodes, std::size_t index = 0) { return Policy{std::vector<std::size_t>(nodes, index)}; }

  bool operator==(const Policy &) const = default;
};

enum class DriftScheme
{
  /// Central differences wherever they keep off-diagonals nonnegative,
  /// first-order upwind elsewhere.
  hybrid,
  /// First-order upwind everywhere.
  upwind,
};

/// One row of the discretized L^u + c(·,u), in lattice offsets so the caller
/// can decide how neighbours on the Dirichlet boundary are treated.
struct Stencil
{
  struct Entry
  {
    int d1;
    int d2;
    double coef;
  };
  double diag = 0.0;
  std::array<Entry, 8> off{};
  int count = 0;

  void add(int d1, int d2, double c)
  {
    for (int k = 0; k < count; ++k)
      if (off[k].d1 == d1 && off[k].d2 == d2)
      {
        off[k].coef += c;
        return;
      }
    off[count++] = Entry{d1, d2, c};
  }
};

/// Stencil of node i under action u. Throws monotonicity if the mixed
/// derivative is not dominated by the diagonal of a, invalid_model on NaN.
inline Stencil node_stencil(const Model &model, const Grid &grid, std::size_t i, const Action &u,
                            DriftScheme scheme = DriftScheme::hybrid)
{
  const Point x = grid.node(i);
  const Mat a = model.a(x);
  const Point b = model.drift(x, u);
  const double c = model.cost(x, u);
  const double h = grid.spacing;
  const double h2 = h * h;
  const int d = grid.dim;

  bool finite = std::isfinite(c);
  for (int k = 0; k < d; ++k)
  {
    finite = finite && std::isfinite(b[k]);
    for (int l = 0; l < d; ++l)
      finite = finite && std::isfinite(a[k][l]);
  }
  require(finite, ErrorKind::invalid_model, "non-finite coefficient at grid node");

  Stencil s;
  double a12 = 0.0;
  if (d == 2)
  {
    a12 = 0.5 * (a[0][1] + a[1][0]);
    require(std::abs(a12) <= std::min(a[0][0], a[1][1]) * (1.0 + 1e-12), ErrorKind::monotonicity,
            "mixed-derivative dominance |a12| <= min(a11, a22) violated");
    if (a12 > 0.0)
    {
      s.add(1, 1, a12 / (2.0 * h2));
      s.add(-1, -1, a12 / (2.0 * h2));
    }
    else if (a12 < 0.0)
    {
      s.add(1, -1, -a12 / (2.0 * h2));
      s.add(-1, 1, -a12 / (2.0 * h2));
    }
    s.diag += std::abs(a12) / h2;
  }

  for (int k = 0; k < d; ++k)
  {
    const double axis = std::max(0.0, a[k][k] - std::abs(a12));
    double fwd = axis / (2.0 * h2);
    double bwd = axis / (2.0 * h2);
    s.diag -= a[k][k] / h2;
    const double bk = b[k];
    if (scheme == DriftScheme::hybrid && std::abs(bk) * h <= axis)
    {
      fwd += bk / (2.0 * h);
      bwd -= bk / (2.0 * h);
    }
    else if (bk > 0.0)
    {
      fwd += bk / h;
      s.diag -= bk / h;
    }
    else if (bk < 0.0)
    {
      bwd -= bk / h;
      s.diag += bk / h;
    }
    const int e1 = k == 0 ? 1 : 0;
    const int e2 = k == 1 ? 1 : 0;
    s.add(e1, e2, fwd);
    s.add(-e1, -e2, bwd);
  }
  s.diag += c;

  for (int k = 0; k < s.count; ++k)
    require(s.off[k].coef >= 0.0, ErrorKind::internal, "negative off-diagonal in assembled stencil");
  return s;
}

/// Applies a stencil at node i to interior values v; neighbours on the
/// Dirichlet boundary take the value boundary(x) (zero by default).
template <class Boundary>
double apply_stencil(const Stencil &s, const Grid &grid, std::size_t i, std::span<const double> v, Boundary &&boundary)
{
  const auto k = grid.lattice(i);
  double acc = s.diag * v[i];
  for (int e = 0; e < s.count; ++e)
  {
    const long n1 = k[0] + s.off[e].d1;
    const long n2 = k[1] + s.off[e].d2;
    if (grid.interior(n1, n2))
      acc += s.off[e].coef * v[grid.flat(n1, n2)];
    else
      acc += s.off[e].coef * boundary(grid.at(n1, n2));
  }
  return acc;
}

inline double apply_stencil(const Stencil &s, const Grid &grid, std::size_t i, std::span<const double> v)
{
  return apply_stencil(s, grid, i, v, [](const Point &) { return 0.0; });
}

/// Sparse discretization of L_v + diag(c_v) over the interior nodes of a grid.
struct OperatorMatrix
{
  Grid grid;
  SparseMatrix matrix;
  std::optional<Policy> policy;
  DriftScheme scheme = DriftScheme::hybrid;

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
};

inline void check_policy(const Model &model, const Grid &grid, const Policy &policy)
{
  require(policy.action.size() == grid.size(), ErrorKind::precondition, "policy size does not match grid");
  for (std::size_t a : policy.action)
    require(a < model.actions.size(), ErrorKind::precondition, "policy action index out of range");
}

inline OperatorMatrix assemble(const Model &model, const Grid &grid, const Policy &policy,
                               DriftScheme scheme = DriftScheme::hybrid)
{
  require(model.dim == grid.dim, ErrorKind::precondition, "model and grid dimensions differ");
  check_policy(model, grid, policy);
  const std::size_t n = grid.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * (grid.dim == 1 ? 3 : 9));
  for (std::size_t i = 0; i < n; ++i)
  {
    const Stencil s = node_stencil(model, grid, i, model.actions[policy.action[i]], scheme);
    const auto k = grid.lattice(i);
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), s.diag);
    for (int e = 0; e < s.count; ++e)
    {
      const long n1 = k[0] + s.off[e].d1;
      const long n2 = k[1] + s.off[e].d2;
      if (grid.interior(n1, n2) && s.off[e].coef != 0.0)
        trip.emplace_back(static_cast<int>(i), static_cast<int>(grid.flat(n1, n2)), s.off[e].coef);
    }
  }
  OperatorMatrix op;
  op.grid = grid;
  op.policy = policy;
  op.scheme = scheme;
  op.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.matrix.makeCompressed();
  return op;
}

inline Vector apply(const OperatorMatrix &op, const Vector &v)
{
  require(static_cast<std::size_t>(v.size()) == op.size(), ErrorKind::precondition, "vector length mismatch");
  return op.matrix * v;
}

/// True when every off-diagonal entry is nonnegative.
inline bool has_m_structure(const SparseMatrix &a)
{
  for (Eigen::Index r = 0; r < a.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(a, r); it; ++it)
      if (it.col() != it.row() && it.value() < 0.0)
        return false;
  return true;
}

/// Matrix Market coordinate format, 1-based indices.
inline void write_matrix_market(const OperatorMatrix &op, std::ostream &out)
{
  const auto &a = op.matrix;
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << "% grid dim=" << op.grid.dim << " r=" << op.grid.radius << " h=" << op.grid.spacing << "\n";
  out << a.rows() << " " << a.cols() << " " << a.nonZeros() << "\n";
  out.precision(17);
  for (Eigen::Index r = 0; r < a.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(a, r); it; ++it)
      out << (it.row() + 1) << " " << (it.col() + 1) << " " << it.value() << "\n";
}

}  // namespace riskeig
