// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskeig/continuation.hpp"
#include "riskeig/field.hpp"
#include "riskeig/parallel.hpp"
#include "riskeig/random.hpp"

namespace riskeig
{

struct SimConfig
{
  double dt = 1e-3;
  double horizon = 10.0;
  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  /// Paths leaving the ball of this radius are truncated at crossing time.
  double kill_radius = 16.0;
  /// 0 = one worker per core.
  std::size_t threads = 0;

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }

  void validate() const
  {
    require(dt > 0.0 && std::isfinite(dt), ErrorKind::precondition, "dt must be positive");
    require(dt < horizon, ErrorKind::precondition, "dt must be smaller than the horizon");
    require(paths >= 1, ErrorKind::precondition, "need at least one path");
    require(kill_radius > 0.0, ErrorKind::precondition, "kill_radius must be positive");
  }
};

/// Drift, noise and potential seen along a simulated path; the stationary
/// Markov control is already folded in.
struct Dynamics
{
  int dim = 1;
  std::function<Point(const Point &)> drift;
  std::function<Mat(const Point &)> sigma;
  std::function<double(const Point &)> potential;
  std::optional<Mat> constant_sigma;
};

/// Base diffusion under a grid policy. Off-grid states use the action of the
/// nearest node (piecewise-constant selector).
inline Dynamics controlled_dynamics(const Model &model, const Grid &grid, const Policy &policy)
{
  check_policy(model, grid, policy);
  Dynamics d;
  d.dim = model.dim;
  d.sigma = model.diffusion;
  if (model.constant_diffusion)
    d.constant_sigma = model.diffusion(Point{});
  if (model.actions.size() == 1)
  {
    const Action u = model.actions.front();
    d.drift = [drift = model.drift, u](const Point &x) { return drift(x, u); };
    d.potential = [cost = model.cost, u](const Point &x) { return cost(x, u); };
    return d;
  }
  auto lookup = [grid, actions = model.actions, idx = policy.action](const Point &x) -> const Action & {
    return actions[idx[nearest_node(grid, x)]];
  };
  d.drift = [drift = model.drift, lookup](const Point &x) { return drift(x, lookup(x)); };
  d.potential = [cost = model.cost, lookup](const Point &x) { return cost(x, lookup(x)); };
  return d;
}

/// Uncontrolled (singleton action) model.
inline Dynamics base_dynamics(const Model &model)
{
  require(model.actions.size() == 1, ErrorKind::precondition, "base_dynamics needs a singleton action set");
  const Grid g = make_grid(model.dim, 2.0, 1.0);
  return controlled_dynamics(model, g, Policy::constant(g.size()));
}

/// Diffusion driven by a drift field on a grid (interpolated, clamped outside)
/// with the model's noise and potential under the grid policy.
inline Dynamics field_dynamics(const Model &model, const Grid &grid, const Policy &policy, std::vector<Point> drift)
{
  Dynamics d = controlled_dynamics(model, grid, policy);
  d.drift = [grid, field = std::move(drift)](const Point &x) {
    return interpolate_vec(grid, std::span<const Point>(field), x);
  };
  return d;
}

/// Summation in a fixed binary-tree order.
inline double pairwise_sum(std::span<const double> xs)
{
  if (xs.size() <= 8)
  {
    double s = 0.0;
    for (double x : xs)
      s += x;
    return s;
  }
  const std::size_t mid = xs.size() / 2;
  return pairwise_sum(xs.subspan(0, mid)) + pairwise_sum(xs.subspan(mid));
}

struct MeanStderr
{
  double mean = 0.0;
  double stderr = 0.0;
};

inline MeanStderr mean_stderr(std::span<const double> xs)
{
  MeanStderr out;
  if (xs.empty())
    return out;
  const double n = static_cast<double>(xs.size());
  out.mean = pairwise_sum(xs) / n;
  if (xs.size() < 2)
    return out;
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    sq[i] = (xs[i] - out.mean) * (xs[i] - out.mean);
  out.stderr = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  return out;
}

/// log Σ exp(x_i), stabilized by the running maximum.
inline double log_sum_exp(std::span<const double> xs)
{
  if (xs.empty())
    return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m))
    return m;
  std::vector<double> e(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    e[i] = std::exp(xs[i] - m);
  return m + std::log(pairwise_sum(e));
}

/// log of the mean of exp(x_i).
inline double log_mean_exp(std::span<const double> xs)
{
  if (xs.empty())
    return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m))
    return m;
  std::vector<double> e(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    e[i] = std::exp(xs[i] - m);
  return m + std::log(pairwise_sum(e) / static_cast<double>(xs.size()));
}

struct PathStatus
{
  Point x{};
  std::size_t steps = 0;
  bool truncated = false;
  bool stopped = false;
};

/// Euler–Maruyama on one path. `step(k, x_k, x_{k+1})` sees each increment
/// and returns false to stop the path early; the increment that crosses the
/// kill radius is not passed to `step`.
template <class StepFn>
PathStatus integrate_path(const Dynamics &dyn, const Point &x0, const SimConfig &cfg, std::uint64_t path, StepFn &&step)
{
  PathStream rng(cfg.seed, path);
  const std::size_t n = cfg.steps();
  const double sq = std::sqrt(cfg.dt);
  const double kill2 = cfg.kill_radius * cfg.kill_radius;
  const int d = dyn.dim;
  PathStatus st;
  st.x = x0;
  for (std::size_t k = 0; k < n; ++k)
  {
    const Point b = dyn.drift(st.x);
    const Mat s = dyn.constant_sigma ? *dyn.constant_sigma : dyn.sigma(st.x);
    Point xi{};
    for (int i = 0; i < d; ++i)
      xi[i] = rng.normal();
    Point next = st.x;
    for (int i = 0; i < d; ++i)
    {
      double noise = 0.0;
      for (int j = 0; j < d; ++j)
        noise += s[i][j] * xi[j];
      next[i] += b[i] * cfg.dt + sq * noise;
    }
    if (dot(next, next, d) > kill2)
    {
      st.truncated = true;
      st.steps = k;
      return st;
    }
    const bool go_on = step(k, st.x, next);
    st.x = next;
    st.steps = k + 1;
    if (!go_on)
    {
      st.stopped = true;
      return st;
    }
  }
  return st;
}

struct PathEnsemble
{
  std::vector<Point> endpoints;
  std::vector<std::uint8_t> truncated;
  /// Time of kill-radius crossing, horizon for surviving paths.
  std::vector<double> end_time;
  /// Recorded states of the first `trace_paths` paths, every `trace_stride` steps.
  std::vector<std::vector<Point>> traces;

  double truncated_fraction() const
  {
    if (truncated.empty())
      return 0.0;
    return static_cast<double>(std::count(truncated.begin(), truncated.end(), 1)) / static_cast<double>(truncated.size());
  }
};

inline PathEnsemble simulate(const Dynamics &dyn, const Point &x0, const SimConfig &cfg, std::size_t trace_paths = 0,
                             std::size_t trace_stride = 1)
{
  cfg.validate();
  require(norm(x0, dyn.dim) < cfg.kill_radius, ErrorKind::precondition, "x0 must lie inside kill_radius");
  PathEnsemble ens;
  ens.endpoints.resize(cfg.paths);
  ens.truncated.resize(cfg.paths);
  ens.end_time.resize(cfg.paths);
  ens.traces.resize(std::min(trace_paths, cfg.paths));
  trace_stride = std::max<std::size_t>(1, trace_stride);
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
    std::vector<Point> *trace = p < ens.traces.size() ? &ens.traces[p] : nullptr;
    if (trace)
      trace->push_back(x0);
    const PathStatus st = integrate_path(dyn, x0, cfg, p, [&](std::size_t k, const Point &, const Point &next) {
      if (trace && (k + 1) % trace_stride == 0)
        trace->push_back(next);
      return true;
    });
    ens.endpoints[p] = st.x;
    ens.truncated[p] = st.truncated ? 1 : 0;
    ens.end_time[p] = static_cast<double>(st.steps) * cfg.dt;
  });
  return ens;
}

struct FkEstimate
{
  double value = 0.0;
  double stderr = 0.0;
  std::size_t paths_used = 0;
  double truncated_fraction = 0.0;
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kBatches = 20;

/// Risk-sensitive growth rate (1/T)·log E[exp ∫₀ᵀ c(X_t) dt] by left-endpoint
/// quadrature; stderr from batch means of the per-batch log estimates.
inline FkEstimate fk_lambda(const Dynamics &dyn, const Point &x0, const SimConfig &cfg)
{
  cfg.validate();
  require(norm(x0, dyn.dim) < cfg.kill_radius, ErrorKind::precondition, "x0 must lie inside kill_radius");
  const double horizon = static_cast<double>(cfg.steps()) * cfg.dt;
  std::vector<double> integral(cfg.paths, 0.0);
  std::vector<std::uint8_t> truncated(cfg.paths, 0);
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
    double acc = 0.0;
    const PathStatus st = integrate_path(dyn, x0, cfg, p, [&](std::size_t, const Point &x, const Point &) {
      acc += dyn.potential(x);
      return true;
    });
    integral[p] = acc * cfg.dt;
    truncated[p] = st.truncated ? 1 : 0;
  });

  std::vector<double> kept;
  kept.reserve(cfg.paths);
  for (std::size_t p = 0; p < cfg.paths; ++p)
    if (!truncated[p])
      kept.push_back(integral[p]);
  if (kept.empty())
    throw Error(ErrorKind::estimator_undefined, "all paths truncated");

  FkEstimate est;
  est.paths_used = kept.size();
  est.truncated_fraction = 1.0 - static_cast<double>(kept.size()) / static_cast<double>(cfg.paths);
  est.value = log_mean_exp(kept) / horizon;

  const std::size_t batches = std::min(kBatches, kept.size());
  if (batches >= 2)
  {
    std::vector<double> per_batch;
    const std::size_t per = kept.size() / batches;
    for (std::size_t b = 0; b < batches; ++b)
    {
      const std::size_t lo = b * per;
      const std::size_t hi = b + 1 == batches ? kept.size() : lo + per;
      per_batch.push_back(log_mean_exp(std::span<const double>(kept).subspan(lo, hi - lo)) / horizon);
    }
    est.stderr = mean_stderr(per_batch).stderr;
  }
  if (horizon * std::abs(est.value) < 1.0)
    est.warnings.push_back("horizon*|estimate| < 1: finite-horizon bias may dominate");
  if (est.truncated_fraction > 0.0)
    est.warnings.push_back("some paths truncated at kill_radius");
  return est;
}

/// Positive function known on grid nodes (Dirichlet zero outside).
struct GridFunction
{
  Grid grid;
  std::vector<double> values;

  double operator()(const Point &x) const
  {
    return interpolate(grid, std::span<const double>(values), x, Extension::dirichlet_zero);
  }
};

inline GridFunction grid_function(const Grid &grid, const Vector &v)
{
  return GridFunction{grid, std::vector<double>(v.data(), v.data() + v.size())};
}

namespace detail
{
/// Fraction θ ∈ [0,1] along the segment where |x| first drops to r.
inline double entry_fraction(const Point &a, const Point &b, double r, int d)
{
  Point dir{};
  for (int k = 0; k < d; ++k)
    dir[k] = b[k] - a[k];
  const double qa = dot(dir, dir, d);
  const double qb = 2.0 * dot(a, dir, d);
  const double qc = dot(a, a, d) - r * r;
  if (qa <= 0.0)
    return 1.0;
  const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
  const double theta = (-qb - std::sqrt(disc)) / (2.0 * qa);
  return std::clamp(theta, 0.0, 1.0);
}
}  // namespace detail

struct ExitRatio
{
  double ratio = 0.0;
  double stderr = 0.0;
  std::size_t paths_used = 0;
  double truncated_fraction = 0.0;
  double psi_x0 = 0.0;
};

/// Estimates E[exp(∫₀^τ (f − λ)) Ψ(X_τ)] / Ψ(x0), τ the first entry into the
/// closed ball of radius r. The crossing point is located on the last segment.
inline ExitRatio exit_representation_check(const Dynamics &dyn, const GridFunction &psi, double lambda, double r,
                                           const Point &x0, const SimConfig &cfg)
{
  cfg.validate();
  const int d = dyn.dim;
  require(norm(x0, d) > r, ErrorKind::precondition, "x0 must lie outside the ball");
  require(norm(x0, d) < cfg.kill_radius, ErrorKind::precondition, "x0 must lie inside kill_radius");
  const double psi0 = psi(x0);
  require(psi0 > 0.0, ErrorKind::precondition, "eigenfunction must be positive at x0");

  std::vector<double> value(cfg.paths, 0.0);
  std::vector<std::uint8_t> done(cfg.paths, 0);
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
    double acc = 0.0;
    Point hit{};
    const PathStatus st = integrate_path(dyn, x0, cfg, p, [&](std::size_t, const Point &x, const Point &next) {
      const double fx = dyn.potential(x) - lambda;
      if (dot(next, next, d) <= r * r)
      {
        const double theta = detail::entry_fraction(x, next, r, d);
        acc += fx * theta;
        for (int k = 0; k < d; ++k)
          hit[k] = x[k] + theta * (next[k] - x[k]);
        return false;
      }
      acc += fx;
      return true;
    });
    if (st.stopped)
    {
      done[p] = 1;
      value[p] = std::exp(acc * cfg.dt) * psi(hit) / psi0;
    }
  });

  std::vector<double> kept;
  for (std::size_t p = 0; p < cfg.paths; ++p)
    if (done[p])
      kept.push_back(value[p]);
  ExitRatio out;
  out.psi_x0 = psi0;
  out.paths_used = kept.size();
  out.truncated_fraction = 1.0 - static_cast<double>(kept.size()) / static_cast<double>(cfg.paths);
  if (out.truncated_fraction > 0.5)
    throw Error(ErrorKind::unreliable_estimate, "more than half of the paths did not reach the ball");
  const MeanStderr ms = mean_stderr(kept);
  out.ratio = ms.mean;
  out.stderr = ms.stderr;
  return out;
}

struct HorizonPoint
{
  double horizon = 0.0;
  double estimate = 0.0;
  double stderr = 0.0;
};

struct ExpMomentReport
{
  FkEstimate estimate;
  std::vector<HorizonPoint> schedule;
  /// Largest single-path share of the final sum.
  double max_share = 0.0;
  std::string verdict;
};

inline constexpr std::size_t kDoublings = 5;

/// E[exp ∫₀^τ (f − λ + δ)] for the entry time τ into the closed ball B_r,
/// tracked on the horizon schedule T/2⁵, ..., T. The verdict is a heuristic:
/// a stable last doubling with < 1% unfinished paths and no dominating path is
/// "finite-consistent"; sustained growth or a single path dominating the sum
/// is "divergence-suspected".
inline ExpMomentReport exit_exponential_moment(const Dynamics &dyn, double lambda, double delta, double r,
                                               const Point &x0, const SimConfig &cfg)
{
  cfg.validate();
  const int d = dyn.dim;
  require(delta >= 0.0, ErrorKind::precondition, "delta must be nonnegative");
  require(norm(x0, d) > r, ErrorKind::precondition, "x0 must lie outside the ball");
  require(norm(x0, d) < cfg.kill_radius, ErrorKind::precondition, "x0 must lie inside kill_radius");

  const std::size_t n = cfg.steps();
  std::vector<std::size_t> checkpoints;
  for (std::size_t k = 0; k <= kDoublings; ++k)
    checkpoints.push_back(std::max<std::size_t>(1, n >> (kDoublings - k)));
  const std::size_t m = checkpoints.size();

  // log-values per (path, checkpoint)
  std::vector<double> logv(cfg.paths * m, 0.0);
  std::vector<std::uint8_t> finished(cfg.paths, 0);
  std::vector<std::uint8_t> killed(cfg.paths, 0);
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
    double acc = 0.0;
    std::size_t next_cp = 0;
    double *row = &logv[p * m];
    const PathStatus st = integrate_path(dyn, x0, cfg, p, [&](std::size_t k, const Point &x, const Point &nx) {
      const double fx = dyn.potential(x) - lambda + delta;
      if (dot(nx, nx, d) <= r * r)
      {
        acc += fx * detail::entry_fraction(x, nx, r, d);
        return false;
      }
      acc += fx;
      while (next_cp < m && k + 1 == checkpoints[next_cp])
        row[next_cp++] = acc * cfg.dt;
      return true;
    });
    for (; next_cp < m; ++next_cp)
      row[next_cp] = acc * cfg.dt;
    finished[p] = st.stopped ? 1 : 0;
    killed[p] = st.truncated ? 1 : 0;
  });

  ExpMomentReport rep;
  std::vector<double> vals(cfg.paths);
  for (std::size_t c = 0; c < m; ++c)
  {
    for (std::size_t p = 0; p < cfg.paths; ++p)
      vals[p] = std::exp(logv[p * m + c]);
    const MeanStderr ms = mean_stderr(vals);
    rep.schedule.push_back(HorizonPoint{static_cast<double>(checkpoints[c]) * cfg.dt, ms.mean, ms.stderr});
  }
  const double total = pairwise_sum(vals);
  rep.max_share = total > 0.0 ? *std::max_element(vals.begin(), vals.end()) / total : 0.0;

  const std::size_t unfinished =
      static_cast<std::size_t>(std::count(finished.begin(), finished.end(), 0));
  rep.estimate.value = rep.schedule.back().estimate;
  rep.estimate.stderr = rep.schedule.back().stderr;
  rep.estimate.paths_used = cfg.paths;
  rep.estimate.truncated_fraction = static_cast<double>(unfinished) / static_cast<double>(cfg.paths);
  if (std::count(killed.begin(), killed.end(), 1) > 0)
    rep.estimate.warnings.push_back("some paths truncated at kill_radius");

  const auto &s = rep.schedule;
  const bool heavy_tail = cfg.paths >= 100 && rep.max_share > 0.05;
  bool growing = true;
  for (std::size_t c = m - 3; c < m; ++c)
    growing = growing && s[c].estimate - s[c - 1].estimate > 3.0 * s[c].stderr && s[c].stderr > 0.0;
  const bool stable = std::abs(s[m - 1].estimate - s[m - 2].estimate) <= 3.0 * s[m - 1].stderr + 1e-12 * s[m - 1].estimate;
  if (heavy_tail || growing)
    rep.verdict = "divergence-suspected";
  else if (stable && rep.estimate.truncated_fraction < 0.01)
    rep.verdict = "finite-consistent";
  else
    rep.verdict = "inconclusive";
  return rep;
}

struct GammaReport
{
  std::vector<double> times;
  std::vector<double> log_g;
  double fitted_rate = 0.0;
  double plateau = 0.0;
  double truncated_fraction = 0.0;
  std::string verdict;
};

/// g(t) = E[exp ∫₀ᵗ (f − λ)] on t = T/2⁵, ..., T. A fitted exponential decay
/// rate above `rate_tol` over the last four points reads as
/// "convergent-suspected"; otherwise g levels off ("divergent-consistent",
/// the time integral of g diverges).
inline GammaReport gamma_integral(const Dynamics &dyn, double lambda, const Point &x0, const SimConfig &cfg,
                                  double rate_tol = 0.03)
{
  cfg.validate();
  require(norm(x0, dyn.dim) < cfg.kill_radius, ErrorKind::precondition, "x0 must lie inside kill_radius");
  const std::size_t n = cfg.steps();
  std::vector<std::size_t> checkpoints;
  for (std::size_t k = 0; k <= kDoublings; ++k)
    checkpoints.push_back(std::max<std::size_t>(1, n >> (kDoublings - k)));
  const std::size_t m = checkpoints.size();

  std::vector<double> logv(cfg.paths * m, 0.0);
  std::vector<std::uint8_t> killed(cfg.paths, 0);
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
    double acc = 0.0;
    std::size_t next_cp = 0;
    double *row = &logv[p * m];
    const PathStatus st = integrate_path(dyn, x0, cfg, p, [&](std::size_t k, const Point &x, const Point &) {
      acc += dyn.potential(x) - lambda;
      while (next_cp < m && k + 1 == checkpoints[next_cp])
        row[next_cp++] = acc * cfg.dt;
      return true;
    });
    killed[p] = st.truncated ? 1 : 0;
  });

  GammaReport rep;
  std::vector<double> col;
  for (std::size_t c = 0; c < m; ++c)
  {
    col.clear();
    for (std::size_t p = 0; p < cfg.paths; ++p)
      if (!killed[p])
        col.push_back(logv[p * m + c]);
    require(!col.empty(), ErrorKind::estimator_undefined, "all paths truncated");
    rep.times.push_back(static_cast<double>(checkpoints[c]) * cfg.dt);
    rep.log_g.push_back(log_mean_exp(col));
  }
  rep.truncated_fraction =
      static_cast<double>(std::count(killed.begin(), killed.end(), 1)) / static_cast<double>(cfg.paths);

  // least-squares slope over the last four checkpoints
  const std::size_t first = m - 4;
  double tm = 0.0, ym = 0.0;
  for (std::size_t c = first; c < m; ++c)
  {
    tm += rep.times[c];
    ym += rep.log_g[c];
  }
  tm /= 4.0;
  ym /= 4.0;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t c = first; c < m; ++c)
  {
    sxy += (rep.times[c] - tm) * (rep.log_g[c] - ym);
    sxx += (rep.times[c] - tm) * (rep.times[c] - tm);
  }
  rep.fitted_rate = -sxy / sxx;
  rep.plateau = std::exp(rep.log_g.back());
  rep.verdict = rep.fitted_rate > rate_tol ? "convergent-suspected" : "divergent-consistent";
  return rep;
}

struct ProbeResult
{
  double lambda_base = 0.0;
  double lambda_bumped = 0.0;
  double gap = 0.0;
  double saturation_gap = 0.0;
  bool strict = false;
};

/// Reruns the radius sweep with cost c + ε·1_A and compares the limits.
/// strict = gap > max(10·saturation gap, 1e-6).
inline ProbeResult monotonicity_probe(const Model &model, const Box &set, double epsilon,
                                      const std::vector<double> &radii, double spacing, double tol,
                                      const SweepOptions &opts = {})
{
  require(epsilon >= 0.0, ErrorKind::precondition, "bump epsilon must be nonnegative");
  require(!radii.empty(), ErrorKind::precondition, "radius schedule is empty");
  const Box core = Box::cube(radii.front(), model.dim);
  Box overlap;
  for (int k = 0; k < model.dim; ++k)
  {
    overlap.lo[k] = std::max(set.lo[k], core.lo[k]);
    overlap.hi[k] = std::min(set.hi[k], core.hi[k]);
  }
  require(overlap.volume(model.dim) > 0.0, ErrorKind::precondition,
          "bump set must overlap the smallest radius with positive volume");

  const SweepResult base = sweep(model, radii, spacing, tol, opts);
  const SweepResult bumped = sweep(with_bump(model, set, epsilon), radii, spacing, tol, opts);
  ProbeResult out;
  out.lambda_base = base.lambda_star_estimate;
  out.lambda_bumped = bumped.lambda_star_estimate;
  out.gap = out.lambda_bumped - out.lambda_base;
  const double gb = std::isfinite(base.saturation_gap) ? std::abs(base.saturation_gap) : 0.0;
  const double gu = std::isfinite(bumped.saturation_gap) ? std::abs(bumped.saturation_gap) : 0.0;
  out.saturation_gap = std::max(gb, gu);
  out.strict = out.gap > std::max(10.0 * out.saturation_gap, 1e-6);
  return out;
}

struct MixingReport
{
  std::vector<double> lags;
  std::vector<double> autocorrelation;
  /// Fitted exponential decay rate; +∞ when lag-one correlation is noise.
  double rate = 0.0;
  double r_squared = 0.0;
  std::vector<std::string> warnings;
};

/// Fits ρ(τ) ≈ exp(−rate·τ) to the pooled autocorrelation of equally spaced
/// series, using lags until ρ drops under max(0.05, 3/√N).
inline MixingReport fit_autocorrelation_decay(const std::vector<std::vector<double>> &series, double sample_dt,
                                              std::size_t max_lag)
{
  MixingReport rep;
  std::vector<double> flat;
  for (const auto &s : series)
    flat.insert(flat.end(), s.begin(), s.end());
  require(flat.size() >= 4, ErrorKind::precondition, "need samples for autocorrelation");
  const double mean = pairwise_sum(flat) / static_cast<double>(flat.size());
  std::vector<double> sq(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i)
    sq[i] = (flat[i] - mean) * (flat[i] - mean);
  const double var = pairwise_sum(sq) / static_cast<double>(flat.size());
  const double floor = std::max(0.05, 3.0 / std::sqrt(static_cast<double>(flat.size())));

  for (std::size_t lag = 1; lag <= max_lag; ++lag)
  {
    std::vector<double> prod;
    for (const auto &s : series)
      for (std::size_t t = 0; t + lag < s.size(); ++t)
        prod.push_back((s[t] - mean) * (s[t + lag] - mean));
    if (prod.empty())
      break;
    const double rho = pairwise_sum(prod) / static_cast<double>(prod.size()) / var;
    if (rho < floor)
      break;
    rep.lags.push_back(static_cast<double>(lag) * sample_dt);
    rep.autocorrelation.push_back(rho);
  }
  if (rep.lags.size() < 2)
  {
    rep.rate = std::numeric_limits<double>::infinity();
    rep.r_squared = 0.0;
    return rep;
  }
  // regression of log ρ on τ through (0, 0): ρ(0) = 1
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < rep.lags.size(); ++i)
  {
    sxy += rep.lags[i] * std::log(rep.autocorrelation[i]);
    sxx += rep.lags[i] * rep.lags[i];
  }
  rep.rate = -sxy / sxx;
  double ss_res = 0.0, ss_tot = 0.0, ym = 0.0;
  for (double a : rep.autocorrelation)
    ym += std::log(a);
  ym /= static_cast<double>(rep.autocorrelation.size());
  for (std::size_t i = 0; i < rep.lags.size(); ++i)
  {
    const double y = std::log(rep.autocorrelation[i]);
    ss_res += (y + rep.rate * rep.lags[i]) * (y + rep.rate * rep.lags[i]);
    ss_tot += (y - ym) * (y - ym);
  }
  rep.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return rep;
}

struct MixingOptions
{
  double burn_in = 10.0;
  double sample_interval = 0.1;
  double max_lag = 10.0;
};

/// Autocorrelation decay of x ↦ x₁ along the supplied (twisted) dynamics.
inline MixingReport mixing_diagnostic(const Dynamics &dyn, const Point &x0, const SimConfig &cfg,
                                      const MixingOptions &mo = {})
{
  cfg.validate();
  require(mo.burn_in < cfg.horizon, ErrorKind::precondition, "burn-in must be shorter than the horizon");
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(mo.sample_interval / cfg.dt)));
  const auto burn = static_cast<std::size_t>(std::llround(mo.burn_in / cfg.dt));
  std::vector<std::vector<double>> series(cfg.paths);
  std::vector<std::uint8_t> killed(cfg.paths, 0);
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
    const PathStatus st = integrate_path(dyn, x0, cfg, p, [&](std::size_t k, const Point &, const Point &nx) {
      if (k + 1 >= burn && (k + 1 - burn) % stride == 0)
        series[p].push_back(nx[0]);
      return true;
    });
    killed[p] = st.truncated ? 1 : 0;
  });
  std::vector<std::vector<double>> kept;
  for (std::size_t p = 0; p < cfg.paths; ++p)
    if (!killed[p])
      kept.push_back(std::move(series[p]));
  require(!kept.empty(), ErrorKind::estimator_undefined, "all paths truncated");

  const double sample_dt = static_cast<double>(stride) * cfg.dt;
  MixingReport rep = fit_autocorrelation_decay(
      kept, sample_dt, static_cast<std::size_t>(std::llround(mo.max_lag / sample_dt)));

  // warm-up check: first-half vs second-half path means
  std::vector<double> diff;
  for (const auto &s : kept)
  {
    const std::size_t half = s.size() / 2;
    if (half == 0)
      continue;
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < half; ++i)
      a += s[i];
    for (std::size_t i = half; i < 2 * half; ++i)
      b += s[i];
    diff.push_back((b - a) / static_cast<double>(half));
  }
  const MeanStderr ms = mean_stderr(diff);
  if (diff.size() >= 2 && std::abs(ms.mean) > 3.0 * ms.stderr)
    rep.warnings.push_back("warm-up-insufficient: path means drift between halves");
  if (kept.size() < cfg.paths)
    rep.warnings.push_back("some paths truncated at kill_radius");
  return rep;
}

}  // namespace riskeig
