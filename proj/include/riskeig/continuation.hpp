// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "riskeig/eigensolve.hpp"
#include "riskeig/parallel.hpp"

namespace riskeig
{

struct SweepRow
{
  double radius = 0.0;
  double spacing = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
  std::size_t policy_sweeps = 0;
};

/// Three-point geometric tail fit λ_k ≈ Λ − C q^k.
struct TailFit
{
  double value = 0.0;
  double ratio = std::numeric_limits<double>::quiet_NaN();
  bool extrapolated = false;
  bool non_monotone = false;
};

struct SweepResult
{
  std::vector<SweepRow> rows;
  double lambda_star_estimate = 0.0;
  /// λ at the largest radius minus λ at the second largest; +∞ for one row.
  double saturation_gap = std::numeric_limits<double>::infinity();
  bool converged = false;
  TailFit tail;
  /// Full solution at the largest radius.
  std::optional<HjbSolution> last_solution;
};

class SweepError : public Error
{
public:
  SweepError(const Error &cause, std::vector<SweepRow> partial)
    : Error(cause.kind(), std::string("sweep aborted: ") + cause.what()), rows(std::move(partial))
  {
  }

  std::vector<SweepRow> rows;
};

/// Geometric extrapolation over the last three rows. Falls back to the last λ
/// when the fitted ratio is outside (0, 1).
inline TailFit estimate_lambda_star(const SweepResult &sweep)
{
  require(sweep.rows.size() >= 3, ErrorKind::precondition, "tail fit needs at least three rows");
  const std::size_t n = sweep.rows.size();
  const double l1 = sweep.rows[n - 3].lambda;
  const double l2 = sweep.rows[n - 2].lambda;
  const double l3 = sweep.rows[n - 1].lambda;
  TailFit fit;
  fit.value = l3;
  fit.non_monotone = l2 < l1 || l3 < l2;
  const double d1 = l2 - l1;
  const double d2 = l3 - l2;
  if (d1 != 0.0)
  {
    fit.ratio = d2 / d1;
    if (fit.ratio > 0.0 && fit.ratio < 1.0)
    {
      fit.value = std::max(l3, l3 + d2 * fit.ratio / (1.0 - fit.ratio));
      fit.extrapolated = true;
    }
  }
  return fit;
}

struct SweepOptions
{
  HjbOptions hjb;
  std::size_t threads = 1;
  std::size_t node_cap = kDefaultNodeCap;
};

/// Dirichlet HJB solves on an increasing radius schedule at fixed spacing.
/// `tol` is the saturation tolerance on the last gap.
inline SweepResult sweep(const Model &model, const std::vector<double> &radii, double spacing, double tol,
                         const SweepOptions &opts = {})
{
  require(!radii.empty(), ErrorKind::precondition, "radius schedule is empty");
  for (std::size_t k = 0; k < radii.size(); ++k)
  {
    require(radii[k] > spacing, ErrorKind::precondition, "every radius must exceed the spacing");
    if (k > 0)
      require(radii[k] > radii[k - 1], ErrorKind::precondition, "radii must be strictly increasing");
  }

  std::vector<std::optional<HjbSolution>> solutions(radii.size());
  std::vector<std::optional<Error>> errors(radii.size());
  parallel_for(radii.size(), opts.threads, [&](std::size_t k) {
    try
    {
      solutions[k] = solve_hjb_dirichlet(model, make_grid(model.dim, radii[k], spacing, opts.node_cap), opts.hjb);
    }
    catch (const Error &e)
    {
      errors[k] = e;
    }
  });

  SweepResult out;
  for (std::size_t k = 0; k < radii.size(); ++k)
  {
    if (errors[k])
      throw SweepError(*errors[k], out.rows);
    const auto &s = *solutions[k];
    out.rows.push_back(SweepRow{radii[k], spacing, s.eigenpair.lambda, s.eigenpair.residual, s.policy_sweeps});
  }
  out.last_solution = std::move(solutions.back());

  const std::size_t n = out.rows.size();
  double max_lambda = -std::numeric_limits<double>::infinity();
  for (const auto &r : out.rows)
    max_lambda = std::max(max_lambda, r.lambda);
  if (n >= 2)
    out.saturation_gap = out.rows[n - 1].lambda - out.rows[n - 2].lambda;
  out.converged = n >= 2 && std::abs(out.saturation_gap) < tol;
  if (n >= 3)
    out.tail = estimate_lambda_star(out);
  else
    out.tail.value = out.rows.back().lambda;
  out.lambda_star_estimate = std::max(out.tail.value, max_lambda);
  return out;
}

/// Doubling schedule r = start, 2·start, ... until the gap drops below tol,
/// the radius exceeds max_radius, or the node cap is reached.
inline SweepResult sweep_doubling(const Model &model, double spacing, double tol, double start = 2.0,
                                  double max_radius = 64.0, const SweepOptions &opts = {})
{
  std::vector<double> radii;
  SweepResult best;
  for (double r = start; r <= max_radius; r *= 2.0)
  {
    const double per_axis = 2.0 * std::ceil(r / spacing) - 1.0;
    if ((model.dim == 1 ? per_axis : per_axis * per_axis) > static_cast<double>(opts.node_cap))
      break;
    radii.push_back(r);
    best = sweep(model, radii, spacing, tol, opts);
    if (best.converged)
      break;
  }
  require(!radii.empty(), ErrorKind::resource, "no radius in the doubling schedule fits the node cap");
  return best;
}

/// Whether the sweep limit may be reported as the optimal value or only as
/// the Dirichlet limit.
struct Regime
{
  bool assumption_holds = false;
  std::string label;
};

inline Regime classify_regime(const Model &model, double scan_radius, double scan_step)
{
  const AssumptionReport rep = check_drift_assumption(model, scan_radius, scan_step);
  Regime r;
  r.assumption_holds = rep.holds();
  r.label = r.assumption_holds ? "Lambda*" : "Dirichlet limit lambda*";
  return r;
}

inline void write_sweep_csv(const SweepResult &s, std::ostream &out)
{
  out << "radius,spacing,lambda,residual,policy_sweeps\n";
  out.precision(17);
  for (const auto &r : s.rows)
    out << r.radius << "," << r.spacing << "," << r.lambda << "," << r.residual << "," << r.policy_sweeps << "\n";
}

}  // namespace riskeig
