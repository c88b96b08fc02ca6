#pragma once

// Discretized desirability PDE in separated form and its solvers.
//
// The operator is A = L - (1/lambda) diag(q) with
//
//     L(psi) = f . grad(psi) + 1/2 tr(Sigma_t hess(psi)),
//     Sigma_t = B Sigma_eps B^T,
//
// and the first-exit problem solves A psi = 0 with Dirichlet data.

#include <optional>
#include <string>
#include <vector>

#include "sephjb/als.hpp"
#include "sephjb/boundary.hpp"
#include "sephjb/problem.hpp"

namespace sephjb {

struct RankAccounting {
  Index state_cost = 0;
  Index advection = 0;
  Index diffusion = 0;
  /// Counted from the problem data alone.
  Index predicted = 0;
  /// Rank of the assembled operator.
  Index constructed = 0;
  /// After optional ALS compression of the assembled operator.
  std::optional<Index> compressed;
  /// Rank after boundary imposition, and the d + 2r reference figure.
  Index with_boundary = 0;
  Index boundary_reference = 0;
};

struct OperatorBuild {
  SepOperator op;
  RankAccounting ranks;
};

/// Assembles A. Mixed second derivatives d_k d_j and d_j d_k with the same
/// coefficient product are merged into one term. Throws
/// std::invalid_argument for inconsistent problem data.
OperatorBuild build_operator(const HjbProblem& p, int accuracy = 8);

/// Solution of one desirability solve.
struct DesirabilityField {
  SepVector psi;
  double lambda = 1.0;
  /// Floor used by the log transform: 1e-12 times the largest grid value.
  double epsilon = 0.0;
  double time = 0.0;
  AlsReport report;
  RankAccounting ranks;
  std::vector<std::string> warnings;
};

struct SolveOptions {
  AlsOptions als;
  int accuracy = 8;
  /// Solve even if the matching condition fails.
  bool ignore_matching = false;
  /// Compress the assembled operator before imposing boundaries.
  std::optional<double> compress_tolerance;
  Index compress_max_rank = 64;
};

class MatchingError : public std::invalid_argument {
 public:
  MatchingError(const std::string& what, MatchingReport report)
      : std::invalid_argument(what), report_(std::move(report)) {}
  const MatchingReport& report() const { return report_; }

 private:
  MatchingReport report_;
};

/// Builds A, imposes `bc` and solves. Throws MatchingError when the matching
/// condition fails (unless ignored), BoundaryError for a bad spec and
/// AlsError from the solver.
DesirabilityField solve_first_exit(const HjbProblem& p, const BoundarySpec& bc,
                                   const SolveOptions& opts);

/// Terminal desirability exp(-phi_T / lambda), or terminal_psi when given.
/// Throws std::invalid_argument if phi_T is not additively separable.
SepVector terminal_desirability(const HjbProblem& p);

struct HorizonOptions {
  SolveOptions solve;
  /// Rank cap applied with als_reduce between steps.
  Index carry_rank = 20;
  double carry_tolerance = 1e-8;
};

/// Backward implicit Euler from t = T to t = 0:
///     (I - dt A) psi_t = psi_{t+dt}
/// with boundaries re-imposed every step (skipped when `bc` is empty).
/// Returns fields for t = T, T - dt, ..., 0.
std::vector<DesirabilityField> step_finite_horizon(const HjbProblem& p, const BoundarySpec& bc,
                                                   const HorizonOptions& opts);

/// Largest grid value of psi: exact for small grids, otherwise the bound
/// sum_l s_l prod_i max|F_i^l|.
double max_grid_value(const SepVector& psi);

/// V(x) = -lambda log(max(psi(x), epsilon)); psi interpolated multilinearly.
class ValueFunction {
 public:
  ValueFunction(const DesirabilityField& field, const Grid& grid);

  double operator()(std::span<const double> x) const;
  double desirability(std::span<const double> x) const;
  double lambda() const { return lambda_; }
  double epsilon() const { return epsilon_; }

 private:
  const SepVector* psi_;
  const Grid* grid_;
  double lambda_;
  double epsilon_;
};

ValueFunction desirability_to_value(const DesirabilityField& field, const Grid& grid);

}  // namespace sephjb
