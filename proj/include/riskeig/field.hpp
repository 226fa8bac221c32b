// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "riskeig/discretize.hpp"

namespace riskeig
{

/// How a node field is continued outside the interior node hull.
enum class Extension
{
  /// Zero on the Dirichlet shell and beyond (eigenfunctions).
  dirichlet_zero,
  /// Nearest interior value (drift fields, observables).
  clamp,
};

namespace detail
{
template <class T>
T lattice_value(const Grid &g, std::span<const T> values, long k1, long k2, Extension ext)
{
  if (ext == Extension::clamp)
  {
    k1 = std::clamp(k1, -g.half, g.half);
    k2 = g.dim == 1 ? 0 : std::clamp(k2, -g.half, g.half);
  }
  if (!g.interior(k1, k2))
    return T{};
  return values[g.flat(k1, k2)];
}
}  // namespace detail

/// Multilinear interpolation of node values at an arbitrary point.
template <class T>
T interpolate(const Grid &g, std::span<const T> values, const Point &x, Extension ext)
{
  const double h = g.spacing;
  std::array<long, 2> base{0, 0};
  std::array<double, 2> frac{0.0, 0.0};
  for (int k = 0; k < g.dim; ++k)
  {
    double t = x[k] / h;
    if (ext == Extension::clamp)
      t = std::clamp(t, -static_cast<double>(g.half), static_cast<double>(g.half));
    const double fl = std::floor(t);
    base[k] = static_cast<long>(fl);
    frac[k] = t - fl;
  }
  auto v = [&](long d1, long d2) { return detail::lattice_value(g, values, base[0] + d1, base[1] + d2, ext); };
  if (g.dim == 1)
    return v(0, 0) * (1.0 - frac[0]) + v(1, 0) * frac[0];
  return (v(0, 0) * (1.0 - frac[0]) + v(1, 0) * frac[0]) * (1.0 - frac[1]) +
         (v(0, 1) * (1.0 - frac[0]) + v(1, 1) * frac[0]) * frac[1];
}

inline Point interpolate_vec(const Grid &g, std::span<const Point> values, const Point &x)
{
  const double h = g.spacing;
  std::array<long, 2> base{0, 0};
  std::array<double, 2> frac{0.0, 0.0};
  for (int k = 0; k < g.dim; ++k)
  {
    const double t = std::clamp(x[k] / h, -static_cast<double>(g.half), static_cast<double>(g.half));
    const double fl = std::floor(t);
    base[k] = static_cast<long>(fl);
    frac[k] = t - fl;
  }
  auto w = [&](long d1, long d2) {
    return detail::lattice_value(g, values, base[0] + d1, base[1] + d2, Extension::clamp);
  };
  Point out{};
  const double f0 = frac[0];
  const double f1 = frac[1];
  for (int k = 0; k < g.dim; ++k)
  {
    if (g.dim == 1)
      out[k] = w(0, 0)[k] * (1.0 - f0) + w(1, 0)[k] * f0;
    else
      out[k] = (w(0, 0)[k] * (1.0 - f0) + w(1, 0)[k] * f0) * (1.0 - f1) +
               (w(0, 1)[k] * (1.0 - f0) + w(1, 1)[k] * f0) * f1;
  }
  return out;
}

/// Index of the interior node nearest to x (clamped into the grid).
inline std::size_t nearest_node(const Grid &g, const Point &x)
{
  const long k1 = std::clamp(std::lround(x[0] / g.spacing), -g.half, g.half);
  const long k2 = g.dim == 1 ? 0 : std::clamp(std::lround(x[1] / g.spacing), -g.half, g.half);
  return g.flat(k1, k2);
}

}  // namespace riskeig
