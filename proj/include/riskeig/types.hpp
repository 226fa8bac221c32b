// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace riskeig
{

/// Largest supported spatial dimension. Points carry this many components;
/// entries beyond the model dimension are zero.
inline constexpr int kMaxDim = 2;

using Point = std::array<double, kMaxDim>;
using Action = std::array<double, kMaxDim>;
using Mat = std::array<std::array<double, kMaxDim>, kMaxDim>;

inline double dot(const Point &x, const Point &y, int dim)
{
  double s = 0.0;
  for (int k = 0; k < dim; ++k)
    s += x[k] * y[k];
  return s;
}

inline double norm(const Point &x, int dim)
{
  return std::sqrt(dot(x, x, dim));
}

inline Point mat_vec(const Mat &m, const Point &x, int dim)
{
  Point y{};
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      y[i] += m[i][j] * x[j];
  return y;
}

/// a = σσᵀ
inline Mat outer_square(const Mat &sigma, int dim)
{
  Mat a{};
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k)
        a[i][j] += sigma[i][k] * sigma[j][k];
  return a;
}

inline Mat identity_mat(int dim)
{
  Mat m{};
  for (int i = 0; i < dim; ++i)
    m[i][i] = 1.0;
  return m;
}

/// Smallest eigenvalue of the leading dim×dim block of a symmetric matrix.
inline double min_eigenvalue_sym(const Mat &a, int dim)
{
  if (dim == 1)
    return a[0][0];
  const double tr = a[0][0] + a[1][1];
  const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  return 0.5 * tr - disc;
}

enum class ErrorKind
{
  invalid_model,
  catalog,
  resource,
  monotonicity,
  convergence,
  internal,
  precondition,
  estimator_undefined,
  unreliable_estimate,
  config,
};

inline const char *to_string(ErrorKind k)
{
  switch (k)
  {
    case ErrorKind::invalid_model:
      return "invalid-model";
    case ErrorKind::catalog:
      return "catalog";
    case ErrorKind::resource:
      return "resource";
    case ErrorKind::monotonicity:
      return "monotonicity";
    case ErrorKind::convergence:
      return "convergence";
    case ErrorKind::internal:
      return "internal-invariant";
    case ErrorKind::precondition:
      return "precondition";
    case ErrorKind::estimator_undefined:
      return "estimator-undefined";
    case ErrorKind::unreliable_estimate:
      return "unreliable-estimate";
    case ErrorKind::config:
      return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string &what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
  {
  }

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string &what)
{
  if (!cond)
    throw Error(kind, what);
}

}  // namespace riskeig
