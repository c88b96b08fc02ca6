#pragma once

// Problem data for the linear desirability PDE, stored in factored form:
// every scalar function of the state is a sum of products of univariate
// expressions, one per state dimension.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sephjb/expr.hpp"
#include "sephjb/grid.hpp"
#include "sephjb/sep_tensor.hpp"

namespace sephjb {

/// coef * factors[0](x_0) * ... * factors[d-1](x_{d-1}).
struct SepTerm {
  double coef = 1.0;
  std::vector<Expr> factors;

  static SepTerm constant(int dims, double value);
  double eval(std::span<const double> x) const;
  /// Samples every factor on its axis; factors that are literal constants
  /// are folded into the coefficient.
  SepVector sample(const Grid& grid) const;
  /// True when at most one factor is non-constant.
  bool is_univariate(int* dim = nullptr) const;
};

/// Sum of separated terms. An empty list is the zero function.
struct SepFunction {
  std::vector<SepTerm> terms;

  double eval(std::span<const double> x) const;
  SepVector sample(const Grid& grid) const;
  Index rank() const { return static_cast<Index>(terms.size()); }
  bool empty() const { return terms.empty(); }
};

struct FirstExit {};

struct FiniteHorizon {
  double horizon = 1.0;
  double dt = 0.01;
  /// Terminal cost phi_T; every term must depend on at most one dimension so
  /// exp(-phi_T / lambda) stays rank one.
  SepFunction terminal_cost;
  /// Alternatively, the terminal desirability given directly.
  std::optional<SepFunction> terminal_psi;
};

struct HjbProblem {
  Grid grid;
  std::vector<SepFunction> drift;                 // f_i, one per state dim
  std::vector<std::vector<SepFunction>> control;  // G, state dim x input
  std::vector<std::vector<SepFunction>> noise;    // B, state dim x input
  Matrix noise_cov;                               // Sigma_eps, m x m
  Matrix control_cost;                            // R, m x m
  double lambda = 1.0;
  SepFunction state_cost;                         // q
  bool finite_horizon = false;
  FiniteHorizon horizon;

  int dims() const { return grid.dims(); }
  int inputs() const { return static_cast<int>(control_cost.rows()); }

  /// Throws std::invalid_argument when the data are inconsistent (shapes,
  /// lambda <= 0, R or Sigma_eps not symmetric positive definite).
  void validate() const;

  Vector drift_at(std::span<const double> x) const;
  Matrix control_at(std::span<const double> x) const;
  Matrix noise_at(std::span<const double> x) const;
};

/// Result of checking lambda G R^-1 G^T == B Sigma_eps B^T at sample points.
struct MatchingReport {
  bool pass = false;
  double max_discrepancy = 0.0;  // relative Frobenius norm
  std::vector<double> worst_point;
  int samples = 0;
  static constexpr double kThreshold = 1e-8;
};

MatchingReport check_matching(const HjbProblem& p, int sample_count = 64);

/// Result of checking q >= 0 on the grid.
struct CostSignReport {
  bool pass = true;
  bool exhaustive = false;  // every node was checked or the bound was exact
  double min_value = 0.0;
  std::vector<Index> node;  // offending node when !pass
  std::vector<double> point;
};

CostSignReport check_state_cost(const HjbProblem& p);

/// Halton points mapped to grid nodes; deterministic.
std::vector<std::vector<Index>> quasi_random_nodes(const Grid& grid, int count);

}  // namespace sephjb
