// Copyright 2026 The riskeig Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "riskeig/discretize.hpp"
#include "riskeig/model.hpp"

namespace riskeig
{

/// Principal eigenpair of a Metzler matrix: λ of maximal real part and its
/// positive eigenvector, normalized to 1 at the normalization node.
struct EigenPair
{
  double lambda = 0.0;
  Vector v;
  double residual = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
};

struct EigenOptions
{
  double tol = 1e-10;
  std::size_t max_iter = 200'000;
  /// Relative residual demanded from the inner Krylov solve (2-D grids).
  double krylov_tol = 1e-12;
};

class ConvergenceError : public Error
{
public:
  ConvergenceError(const std::string &what, std::optional<EigenPair> last = std::nullopt,
                   std::optional<std::pair<Policy, Policy>> candidates = std::nullopt)
    : Error(ErrorKind::convergence, what), last_iterate(std::move(last)), candidate_policies(std::move(candidates))
  {
  }

  std::optional<EigenPair> last_iterate;
  std::optional<std::pair<Policy, Policy>> candidate_policies;
};

namespace detail
{

inline bool is_tridiagonal(const SparseMatrix &a)
{
  for (Eigen::Index r = 0; r < a.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(a, r); it; ++it)
      if (std::abs(it.col() - it.row()) > 1)
        return false;
  return true;
}

/// Solves (sI − A)x = rhs. Tridiagonal systems use a factor-once Thomas
/// sweep (exactly positivity preserving for M-matrices); anything else goes
/// through ILUT-preconditioned BiCGSTAB.
class ShiftedSolver
{
public:
  ShiftedSolver(const SparseMatrix &a, double shift, double krylov_tol)
    : n_(a.rows()), tridiagonal_(is_tridiagonal(a))
  {
    if (tridiagonal_)
    {
      lower_.assign(static_cast<std::size_t>(n_), 0.0);
      diag_.assign(static_cast<std::size_t>(n_), shift);
      upper_.assign(static_cast<std::size_t>(n_), 0.0);
      for (Eigen::Index r = 0; r < a.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(a, r); it; ++it)
        {
          const auto i = static_cast<std::size_t>(it.row());
          if (it.col() == it.row())
            diag_[i] -= it.value();
          else if (it.col() < it.row())
            lower_[i] = -it.value();
          else
            upper_[i] = -it.value();
        }
      // forward elimination factors
      cprime_.assign(static_cast<std::size_t>(n_), 0.0);
      denom_.assign(static_cast<std::size_t>(n_), 0.0);
      for (std::size_t i = 0; i < static_cast<std::size_t>(n_); ++i)
      {
        denom_[i] = diag_[i] - (i > 0 ? lower_[i] * cprime_[i - 1] : 0.0);
        require(denom_[i] > 0.0, ErrorKind::internal, "shifted operator is not a nonsingular M-matrix");
        cprime_[i] = upper_[i] / denom_[i];
      }
    }
    else
    {
      // the Krylov solver keeps a reference, so the matrix lives in a member
      shifted_ = -a;
      Eigen::SparseMatrix<double> id(n_, n_);
      id.setIdentity();
      shifted_ += shift * id;
      shifted_.makeCompressed();
      krylov_.setTolerance(krylov_tol);
      krylov_.setMaxIterations(2000);
      krylov_.preconditioner().setDroptol(1e-6);
      krylov_.preconditioner().setFillfactor(20);
      krylov_.compute(shifted_);
      require(krylov_.info() == Eigen::Success, ErrorKind::internal, "ILUT factorization failed");
    }
  }

  ShiftedSolver(const ShiftedSolver &) = delete;
  ShiftedSolver &operator=(const ShiftedSolver &) = delete;

  void solve(const Vector &rhs, Vector &x)
  {
    if (tridiagonal_)
    {
      const auto n = static_cast<std::size_t>(n_);
      x.resize(n_);
      double prev = 0.0;
      for (std::size_t i = 0; i < n; ++i)
      {
        prev = (rhs[static_cast<Eigen::Index>(i)] - (i > 0 ? lower_[i] * prev : 0.0)) / denom_[i];
        x[static_cast<Eigen::Index>(i)] = prev;
      }
      for (std::size_t i = n - 1; i-- > 0;)
        x[static_cast<Eigen::Index>(i)] -= cprime_[i] * x[static_cast<Eigen::Index>(i + 1)];
      return;
    }
    Vector guess = x.size() == n_ ? x : Vector::Zero(n_);
    x = krylov_.solveWithGuess(rhs, guess);
    if (krylov_.info() != Eigen::Success)
      throw Error(ErrorKind::convergence, "inner BiCGSTAB solve did not reach relative residual");
  }

private:
  Eigen::Index n_;
  bool tridiagonal_;
  std::vector<double> lower_, diag_, upper_, cprime_, denom_;
  Eigen::SparseMatrix<double> shifted_;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> krylov_;
};

inline double residual_inf(const SparseMatrix &a, const Vector &v, double lambda)
{
  const Vector r = a * v - lambda * v;
  return r.lpNorm<Eigen::Infinity>() / v.lpNorm<Eigen::Infinity>();
}

}  // namespace detail

/// Gershgorin-type bound on the spectrum of a Metzler matrix plus one.
inline double conservative_shift(const SparseMatrix &a)
{
  double bound = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < a.outerSize(); ++r)
  {
    double row = 0.0;
    for (SparseMatrix::InnerIterator it(a, r); it; ++it)
      row += it.value();
    bound = std::max(bound, row);
  }
  return bound + 1.0;
}

/// Shifted inverse power iteration on an M-structured matrix.
///
/// With s above every Gershgorin disc, (sI − A)⁻¹ is entrywise nonnegative and
/// its dominant eigenvalue is 1/(s − λ). Iterates stay positive, which is
/// checked every step.
inline EigenPair principal_eigenpair(const SparseMatrix &a, std::size_t norm_index, const EigenOptions &opts = {},
                                     const Vector *warm_start = nullptr)
{
  require(opts.tol > 0.0, ErrorKind::precondition, "tolerance must be positive");
  require(a.rows() == a.cols() && a.rows() > 0, ErrorKind::precondition, "matrix must be square and non-empty");
  require(norm_index < static_cast<std::size_t>(a.rows()), ErrorKind::precondition, "normalization node out of range");
  require(has_m_structure(a), ErrorKind::monotonicity, "matrix has negative off-diagonal entries");

  const double shift = conservative_shift(a);
  detail::ShiftedSolver solver(a, shift, opts.krylov_tol);
  const auto o = static_cast<Eigen::Index>(norm_index);

  EigenPair ep;
  if (warm_start != nullptr && warm_start->size() == a.rows() && warm_start->minCoeff() > 0.0)
    ep.v = *warm_start / (*warm_start)[o];
  else
    ep.v = Vector::Ones(a.rows());

  Vector w = ep.v;
  for (std::size_t it = 1; it <= opts.max_iter; ++it)
  {
    solver.solve(ep.v, w);
    if (!(w.minCoeff() > 0.0) || !w.allFinite())
      throw Error(ErrorKind::internal, "non-positive entry in inverse-iteration iterate");
    const double growth = w[o];
    ep.lambda = shift - 1.0 / growth;
    ep.v = w / growth;
    ep.iterations = it;
    ep.residual = detail::residual_inf(a, ep.v, ep.lambda);
    if (ep.residual <= opts.tol)
      return ep;
  }
  throw ConvergenceError("principal eigenpair: max_iter exceeded with residual above tolerance", ep);
}

inline EigenPair principal_eigenpair(const OperatorMatrix &op, const EigenOptions &opts = {},
                                     const Vector *warm_start = nullptr)
{
  return principal_eigenpair(op.matrix, op.grid.origin_index(), opts, warm_start);
}

/// Nonlinear Dirichlet eigenproblem min_u [L^u V + c V] = λ V on a grid,
/// solved by policy iteration.
struct HjbSolution
{
  Grid grid;
  EigenPair eigenpair;
  Policy policy;
  std::size_t policy_sweeps = 0;
  std::vector<double> lambda_history;
};

struct HjbOptions
{
  EigenOptions eigen;
  double lambda_tol = 1e-12;
  std::size_t max_sweeps = 100;
  DriftScheme scheme = DriftScheme::hybrid;
  /// Once the selector settles, tighten the eigen residual by this factor so
  /// the nodewise HJB residual also lands below eigen.tol.
  double polish_factor = 0.1;
};

/// Pointwise minimizing selector for the current eigenvector. Ties go to the
/// lowest action index.
inline Policy select_policy(const Model &model, const Grid &grid, std::span<const double> v,
                            DriftScheme scheme = DriftScheme::hybrid)
{
  Policy p = Policy::constant(grid.size());
  if (model.actions.size() == 1)
    return p;
  for (std::size_t i = 0; i < grid.size(); ++i)
  {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < model.actions.size(); ++k)
    {
      const double val = apply_stencil(node_stencil(model, grid, i, model.actions[k], scheme), grid, i, v);
      if (val < best)
      {
        best = val;
        p.action[i] = k;
      }
    }
  }
  return p;
}

inline HjbSolution solve_hjb_dirichlet(const Model &model, const Grid &grid, const HjbOptions &opts = {})
{
  require(!model.actions.empty(), ErrorKind::invalid_model, "empty action set");
  HjbSolution sol;
  sol.grid = grid;
  sol.policy = Policy::constant(grid.size());

  for (std::size_t sweep = 1; sweep <= opts.max_sweeps; ++sweep)
  {
    const OperatorMatrix op = assemble(model, grid, sol.policy, opts.scheme);
    const Vector *warm = sweep > 1 ? &sol.eigenpair.v : nullptr;
    sol.eigenpair = principal_eigenpair(op, opts.eigen, warm);
    sol.lambda_history.push_back(sol.eigenpair.lambda);
    sol.policy_sweeps = sweep;

    Policy next = select_policy(model, grid, std::span<const double>(sol.eigenpair.v.data(), grid.size()), opts.scheme);
    const bool settled = next == sol.policy ||
                         (sweep > 1 && std::abs(sol.lambda_history[sweep - 1] - sol.lambda_history[sweep - 2]) <
                                           opts.lambda_tol);
    if (settled)
    {
      if (opts.polish_factor > 0.0 && opts.polish_factor < 1.0)
      {
        EigenOptions fine = opts.eigen;
        fine.tol *= opts.polish_factor;
        fine.max_iter = std::max<std::size_t>(1000, sol.eigenpair.iterations);
        const EigenPair coarse = sol.eigenpair;
        try
        {
          sol.eigenpair = principal_eigenpair(op, fine, &coarse.v);
          sol.eigenpair.iterations += coarse.iterations;
        }
        catch (const ConvergenceError &)
        {
          // roundoff floor reached above the tightened tolerance
          sol.eigenpair = coarse;
        }
        sol.lambda_history.back() = sol.eigenpair.lambda;
      }
      return sol;
    }
    if (sweep == opts.max_sweeps)
      throw ConvergenceError("policy iteration did not settle within max_sweeps", sol.eigenpair,
                             std::make_pair(sol.policy, next));
    sol.policy = std::move(next);
  }
  throw ConvergenceError("policy iteration requires max_sweeps >= 1");
}

/// max over nodes of |min_u[(L^u v)(x) + c(x,u)v(x)] − λ v(x)| / v(x), with
/// boundary neighbours taking boundary(x).
template <class Boundary>
double hjb_residual(const Model &model, const Grid &grid, std::span<const double> v, double lambda,
                    DriftScheme scheme, Boundary &&boundary)
{
  require(v.size() == grid.size(), ErrorKind::precondition, "vector length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
  {
    require(v[i] > 0.0, ErrorKind::precondition, "hjb_residual needs a positive function");
    double best = std::numeric_limits<double>::infinity();
    for (const Action &u : model.actions)
      best = std::min(best, apply_stencil(node_stencil(model, grid, i, u, scheme), grid, i, v, boundary));
    worst = std::max(worst, std::abs(best - lambda * v[i]) / v[i]);
  }
  return worst;
}

inline double hjb_residual(const Model &model, const Grid &grid, std::span<const double> v, double lambda,
                           DriftScheme scheme = DriftScheme::hybrid)
{
  return hjb_residual(model, grid, v, lambda, scheme, [](const Point &) { return 0.0; });
}

inline double hjb_residual(const Model &model, const HjbSolution &sol, DriftScheme scheme = DriftScheme::hybrid)
{
  return hjb_residual(model, sol.grid, std::span<const double>(sol.eigenpair.v.data(), sol.grid.size()),
                      sol.eigenpair.lambda, scheme);
}

}  // namespace riskeig
