#pragma once

// Feedback control from a desirability field and closed-loop simulation.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sephjb/boundary.hpp"
#include "sephjb/hjb.hpp"
#include "sephjb/problem.hpp"

namespace sephjb {

/// Desirability with its grid gradient, precomputed with the same
/// finite-difference stencils as the solver.
class PolicyField {
 public:
  PolicyField(const HjbProblem& problem, const DesirabilityField& field, int accuracy = 8);

  const HjbProblem& problem() const { return *problem_; }
  const SepVector& psi() const { return psi_; }
  const SepVector& grad(int k) const { return grad_[k]; }
  double epsilon() const { return epsilon_; }

 private:
  const HjbProblem* problem_;
  SepVector psi_;
  std::vector<SepVector> grad_;
  double epsilon_;
  Matrix rinv_;
  friend Vector optimal_control(const PolicyField& pf, std::span<const double> x);
};

/// u* = lambda R^-1 G(x)^T grad psi(x) / max(psi(x), epsilon). Throws
/// DomainError outside the grid.
Vector optimal_control(const PolicyField& pf, std::span<const double> x);

enum class ExitReason { goal, domain_exit, horizon };
const char* to_string(ExitReason r);

struct TrajectoryPoint {
  double t = 0.0;
  Vector x;
  /// Control applied from this state (zero at the final state).
  Vector u;
  /// Standard normal draw used for the step leaving this state.
  Vector xi;
};

struct Trajectory {
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::vector<TrajectoryPoint> points;
  ExitReason reason = ExitReason::horizon;
};

struct SimulationOptions {
  double dt = 1e-3;
  double t_max = 10.0;
  std::uint64_t seed = 1;
  /// Stop when the state enters one of these boxes.
  std::vector<RegionCondition> goals;
};

/// Euler-Maruyama:
///     x <- x + (f + G u*) dt + B L sqrt(dt) xi,  L L^T = Sigma_eps,
/// wrapping periodic axes. Throws std::invalid_argument for dt <= 0 and
/// DomainError for x0 outside the grid.
Trajectory simulate(const PolicyField& pf, std::span<const double> x0,
                    const SimulationOptions& opts);

struct Slice {
  int dim_a = 0;
  int dim_b = 1;
  Vector coords_a;
  Vector coords_b;
  /// values(i, j) at node i of dim_a and node j of dim_b.
  Matrix values;
  std::vector<Index> fixed_nodes;
};

enum class SliceQuantity { desirability, value };

/// Dense 2D slice through the grid; other coordinates snap to the nearest
/// node. `fixed` holds one coordinate per dimension (entries of the free
/// dimensions are ignored). Throws DomainError for coordinates outside the
/// grid and std::invalid_argument for bad dimensions.
Slice export_slice(const SepVector& psi, const Grid& grid, std::span<const double> fixed,
                   int dim_a, int dim_b, SliceQuantity quantity = SliceQuantity::desirability,
                   double lambda = 1.0, double epsilon = 0.0);

}  // namespace sephjb
