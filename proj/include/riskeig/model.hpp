// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "riskeig/types.hpp"

namespace riskeig
{

/// A controlled diffusion dX = b(X,U)dt + σ(X)dW with running cost c(X,U).
///
/// The compact action set is carried as a finite ordered list; every
/// operation only needs pointwise minima over it. Uncontrolled problems use a
/// singleton action list and put the potential into `cost`.
///
/// All callables must be safe to invoke concurrently.
struct Model
{
  int dim = 1;
  std::function<Point(const Point &, const Action &)> drift;
  std::function<Mat(const Point &)> diffusion;
  std::function<double(const Point &, const Action &)> cost;
  std::vector<Action> actions;
  std::string label;
  // User assertion that the Lyapunov-type hypothesis on log-ground-states
  // holds; not checkable numerically, only carried into reports.
  bool h2_asserted = false;
  /// σ does not depend on x; lets simulators evaluate it once.
  bool constant_diffusion = false;

  Mat a(const Point &x) const { return outer_square(diffusion(x), dim); }

  /// min over the action list of c(x, ·), with the minimizing index.
  std::pair<double, std::size_t> min_cost(const Point &x) const
  {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < actions.size(); ++k)
    {
      const double c = cost(x, actions[k]);
      if (c < best)
      {
        best = c;
        arg = k;
      }
    }
    return {best, arg};
  }
};

/// Axis-aligned box [lo, hi]^dim, used for bump sets and certificate cores.
struct Box
{
  Point lo{};
  Point hi{};

  bool contains(const Point &x, int dim, double slack = 1e-9) const
  {
    for (int k = 0; k < dim; ++k)
      if (x[k] < lo[k] - slack || x[k] > hi[k] + slack)
        return false;
    return true;
  }

  double volume(int dim) const
  {
    double v = 1.0;
    for (int k = 0; k < dim; ++k)
      v *= std::max(0.0, hi[k] - lo[k]);
    return v;
  }

  static Box cube(double half_width, int dim)
  {
    Box b;
    for (int k = 0; k < dim; ++k)
    {
      b.lo[k] = -half_width;
      b.hi[k] = half_width;
    }
    return b;
  }
};

/// Uniform action grid on [lo, hi] (count points per axis, product grid in 2-D).
inline std::vector<Action> interval_actions(double lo, double hi, std::size_t count, int action_dim = 1)
{
  require(count >= 1, ErrorKind::invalid_model, "action grid needs at least one point");
  require(hi >= lo, ErrorKind::invalid_model, "action interval must satisfy lo <= hi");
  std::vector<double> axis(count);
  for (std::size_t k = 0; k < count; ++k)
    axis[k] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  std::vector<Action> out;
  if (action_dim == 1)
  {
    for (double u : axis)
      out.push_back(Action{u, 0.0});
  }
  else
  {
    for (double u2 : axis)
      for (double u1 : axis)
        out.push_back(Action{u1, u2});
  }
  return out;
}

/// Visits the lattice {k·step} ∩ {|x| ≤ radius} in dim dimensions.
template <class Fn>
void for_each_lattice_point(int dim, double radius, double step, Fn &&fn)
{
  const long n = static_cast<long>(std::floor(radius / step + 1e-9));
  if (dim == 1)
  {
    for (long i = -n; i <= n; ++i)
      fn(Point{static_cast<double>(i) * step, 0.0});
    return;
  }
  for (long j = -n; j <= n; ++j)
    for (long i = -n; i <= n; ++i)
    {
      const Point x{static_cast<double>(i) * step, static_cast<double>(j) * step};
      if (norm(x, 2) <= radius + 1e-9 * step)
        fn(x);
    }
}

struct NearMonotoneReport
{
  double lambda_ref = 0.0;
  double epsilon = 0.0;
  double scan_radius = 0.0;
  /// Largest sampled |x| with min_u c ≤ λ+ε; +∞ when the sublevel set
  /// reaches the outermost sampled shell.
  double sublevel_radius = 0.0;
  bool holds = false;

  bool unbounded() const { return std::isinf(sublevel_radius); }
};

/// Sampled near-monotonicity test: is {x : min_u c(x,u) ≤ λ+ε} compactly
/// contained in the scan window?
inline NearMonotoneReport check_near_monotone(const Model &model, double lambda_ref, double epsilon,
                                              double scan_radius, double scan_step)
{
  require(epsilon > 0.0, ErrorKind::precondition, "epsilon must be positive");
  require(scan_step > 0.0, ErrorKind::precondition, "scan_step must be positive");
  require(!model.actions.empty(), ErrorKind::invalid_model, "empty action set");

  const double level = lambda_ref + epsilon;
  double radius = 0.0;
  bool touches_edge = false;
  for_each_lattice_point(model.dim, scan_radius, scan_step, [&](const Point &x) {
    const double c = model.min_cost(x).first;
    require(std::isfinite(c), ErrorKind::invalid_model, "non-finite cost evaluation");
    if (c <= level)
    {
      const double r = norm(x, model.dim);
      radius = std::max(radius, r);
      if (r > scan_radius - scan_step * (1.0 - 1e-9))
        touches_edge = true;
    }
  });

  NearMonotoneReport rep;
  rep.lambda_ref = lambda_ref;
  rep.epsilon = epsilon;
  rep.scan_radius = scan_radius;
  rep.sublevel_radius = touches_edge ? std::numeric_limits<double>::infinity() : radius;
  rep.holds = !touches_edge;
  return rep;
}

struct AssumptionReport
{
  bool bounded_coeffs = false;
  double sup_drift = 0.0;
  double sup_sigma = 0.0;
  /// (shell radius, max over shell and actions of ⟨b,x⟩⁺/|x|)
  std::vector<std::pair<double, double>> radial_drift_decay;
  /// Outermost shell ratio is negligible against the table maximum.
  bool decays = false;

  bool holds() const { return bounded_coeffs && decays; }
};

/// Sampled check of bounded coefficients and vanishing outward radial drift.
///
/// Boundedness is judged by growth: the sup over the outer half of the window
/// may exceed the sup over the inner half by at most 10%.
inline AssumptionReport check_drift_assumption(const Model &model, double scan_radius, double scan_step)
{
  require(scan_step > 0.0, ErrorKind::precondition, "scan_step must be positive");
  const int d = model.dim;
  const std::size_t shells = static_cast<std::size_t>(std::floor(scan_radius / scan_step + 1e-9)) + 1;
  std::vector<double> shell_max(shells, 0.0);

  double inner_b = 0.0, outer_b = 0.0, inner_s = 0.0, outer_s = 0.0;
  for_each_lattice_point(d, scan_radius, scan_step, [&](const Point &x) {
    const double r = norm(x, d);
    const bool outer = r > 0.5 * scan_radius;
    const Mat s = model.diffusion(x);
    double snorm = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        snorm += s[i][j] * s[i][j];
    snorm = std::sqrt(snorm);
    require(std::isfinite(snorm), ErrorKind::invalid_model, "non-finite diffusion evaluation");
    (outer ? outer_s : inner_s) = std::max(outer ? outer_s : inner_s, snorm);

    const std::size_t shell = std::min(shells - 1, static_cast<std::size_t>(std::floor(r / scan_step + 0.5)));
    for (const Action &u : model.actions)
    {
      const Point b = model.drift(x, u);
      const double bn = norm(b, d);
      require(std::isfinite(bn), ErrorKind::invalid_model, "non-finite drift evaluation");
      (outer ? outer_b : inner_b) = std::max(outer ? outer_b : inner_b, bn);
      if (r > 0.0)
        shell_max[shell] = std::max(shell_max[shell], std::max(0.0, dot(b, x, d)) / r);
    }
  });

  AssumptionReport rep;
  rep.sup_drift = std::max(inner_b, outer_b);
  rep.sup_sigma = std::max(inner_s, outer_s);
  rep.bounded_coeffs = outer_b <= 1.1 * inner_b + 1e-12 && outer_s <= 1.1 * inner_s + 1e-12;
  double peak = 0.0;
  for (std::size_t k = 1; k < shells; ++k)
  {
    rep.radial_drift_decay.emplace_back(static_cast<double>(k) * scan_step, shell_max[k]);
    peak = std::max(peak, shell_max[k]);
  }
  const double last = rep.radial_drift_decay.empty() ? 0.0 : rep.radial_drift_decay.back().second;
  rep.decays = last <= 0.05 * peak + 1e-12;
  return rep;
}

/// Throws invalid_model unless a(x) is uniformly elliptic (≥ floor) and the
/// cost is finite and nonnegative at every supplied point and action.
inline void validate_model(const Model &model, const std::vector<Point> &points, double ellipticity_floor = 1e-12)
{
  require(model.dim == 1 || model.dim == 2, ErrorKind::invalid_model, "dimension must be 1 or 2");
  require(!model.actions.empty(), ErrorKind::invalid_model, "empty action set");
  require(static_cast<bool>(model.drift) && static_cast<bool>(model.diffusion) && static_cast<bool>(model.cost),
          ErrorKind::invalid_model, "model callables must be set");
  for (const Point &x : points)
  {
    const Mat a = model.a(x);
    if (model.dim == 2)
      require(std::abs(a[0][1] - a[1][0]) <= 1e-12 * (1.0 + std::abs(a[0][1])), ErrorKind::invalid_model,
              "a(x) not symmetric");
    require(min_eigenvalue_sym(a, model.dim) >= ellipticity_floor, ErrorKind::invalid_model,
            "a(x) below ellipticity floor");
    for (const Action &u : model.actions)
    {
      const double c = model.cost(x, u);
      require(std::isfinite(c) && c >= 0.0, ErrorKind::invalid_model, "cost must be finite and nonnegative");
    }
  }
}

/// Same model with cost c + c0.
inline Model with_cost_shift(Model m, double c0)
{
  auto base = m.cost;
  m.cost = [base, c0](const Point &x, const Action &u) { return base(x, u) + c0; };
  return m;
}

/// Same model with cost c + ε·1_A.
inline Model with_bump(Model m, const Box &set, double epsilon)
{
  auto base = m.cost;
  const int d = m.dim;
  m.cost = [base, set, epsilon, d](const Point &x, const Action &u) {
    return base(x, u) + (set.contains(x, d) ? epsilon : 0.0);
  };
  return m;
}

using Params = std::map<std::string, double>;

namespace detail
{
inline double param(const Params &p, const std::string &key, double fallback)
{
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}
}  // namespace detail

inline const std::vector<std::string> &builtin_names()
{
  static const std::vector<std::string> names{"ou_quadratic", "lq_clamped", "double_well", "bounded_nm"};
  return names;
}

/// Benchmark catalog.
///
///   ou_quadratic  b = −βx, σ = I, f = κ|x|²                 (β=1, κ=0.375)
///   lq_clamped    b = −βx + u, c = κ|x|² + ½ρ|u|², u ∈ [−M,M] (β=1, κ=0.375, ρ=1, M=5, 101 points)
///   double_well   b = −(x³ − x) componentwise, f = κ|x|²    (κ=0.5)
///   bounded_nm    b = −tanh(x) + g·u, c = |x|²/(1+|x|²) + w|u|², u ∈ [−1,1]
///                 (g=0.1, w=0.1, 21 points)
///
/// Every entry accepts `dim` (1 or 2) and `sigma` (scalar multiple of I).
inline Model builtin(const std::string &name, const Params &params = {})
{
  using detail::param;
  Model m;
  m.dim = static_cast<int>(param(params, "dim", 1.0));
  require(m.dim == 1 || m.dim == 2, ErrorKind::catalog, "builtin dim must be 1 or 2");
  const int d = m.dim;
  const double sig = param(params, "sigma", 1.0);
  m.diffusion = [d, sig](const Point &) {
    Mat s = identity_mat(d);
    for (int k = 0; k < d; ++k)
      s[k][k] = sig;
    return s;
  };
  m.label = name;
  m.constant_diffusion = true;

  if (name == "ou_quadratic")
  {
    const double beta = param(params, "beta", 1.0);
    const double kappa = param(params, "kappa", 0.375);
    m.drift = [d, beta](const Point &x, const Action &) {
      Point b{};
      for (int k = 0; k < d; ++k)
        b[k] = -beta * x[k];
      return b;
    };
    m.cost = [d, kappa](const Point &x, const Action &) { return kappa * dot(x, x, d); };
    m.actions = {Action{}};
  }
  else if (name == "lq_clamped")
  {
    const double beta = param(params, "beta", 1.0);
    const double kappa = param(params, "kappa", 0.375);
    const double rho = param(params, "rho", 1.0);
    const double bound = param(params, "M", 5.0);
    const auto count = static_cast<std::size_t>(param(params, "count", 101.0));
    m.drift = [d, beta](const Point &x, const Action &u) {
      Point b{};
      for (int k = 0; k < d; ++k)
        b[k] = -beta * x[k] + u[k];
      return b;
    };
    m.cost = [d, kappa, rho](const Point &x, const Action &u) {
      return kappa * dot(x, x, d) + 0.5 * rho * dot(u, u, d);
    };
    m.actions = interval_actions(-bound, bound, count, d);
  }
  else if (name == "double_well")
  {
    const double kappa = param(params, "kappa", 0.5);
    m.drift = [d](const Point &x, const Action &) {
      Point b{};
      for (int k = 0; k < d; ++k)
        b[k] = -(x[k] * x[k] * x[k] - x[k]);
      return b;
    };
    m.cost = [d, kappa](const Point &x, const Action &) { return kappa * dot(x, x, d); };
    m.actions = {Action{}};
  }
  else if (name == "bounded_nm")
  {
    const double gain = param(params, "gain", 0.1);
    const double weight = param(params, "weight", 0.1);
    const auto count = static_cast<std::size_t>(param(params, "count", 21.0));
    m.drift = [d, gain](const Point &x, const Action &u) {
      Point b{};
      for (int k = 0; k < d; ++k)
        b[k] = -std::tanh(x[k]) + gain * u[k];
      return b;
    };
    m.cost = [d, weight](const Point &x, const Action &u) {
      const double r2 = dot(x, x, d);
      return r2 / (1.0 + r2) + weight * dot(u, u, d);
    };
    m.actions = interval_actions(-1.0, 1.0, count, d);
  }
  else
  {
    throw Error(ErrorKind::catalog, "unknown builtin model '" + name + "'");
  }
  return m;
}

}  // namespace riskeig
