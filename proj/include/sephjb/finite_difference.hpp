#pragma once

// One-dimensional finite-difference matrices and the rank-one separated
// derivative operators built from them.

#include <span>
#include <vector>

#include "sephjb/grid.hpp"
#include "sephjb/sep_tensor.hpp"

namespace sephjb {

struct StencilSpec {
  enum class Boundary { one_sided, periodic_wrap };

  int derivative = 1;  // 1 or 2
  int accuracy = 8;    // even, 2..8
  Boundary boundary = Boundary::one_sided;

  /// Spec matching the axis: periodic axes wrap, others use one-sided rows.
  static StencilSpec for_axis(const Axis& axis, int derivative, int accuracy = 8);
};

/// Weights w_j with sum_j w_j f(offset_j) ~ f^(derivative)(0) for unit
/// spacing, from the moment system sum_j w_j o_j^p = p! [p == derivative],
/// p = 0 .. n-1. Offsets are rescaled to [-1, 1] before solving.
std::vector<double> stencil_weights(std::span<const int> offsets, int derivative);

/// M x M derivative matrix for axis `dim`. Interior rows are centered; near
/// non-periodic ends the stencil window shifts inward and keeps the full
/// accuracy order. Throws std::invalid_argument if M < accuracy + 2 or the
/// spec does not match the axis.
Matrix d_matrix(const Grid& grid, int dim, const StencilSpec& spec);

/// Rank-one operator I (x) ... (x) D_k (x) ... (x) I.
SepOperator gradient_op(const Grid& grid, int k, int accuracy = 8);

/// Rank-one second derivative d^2/dx_k dx_j. Uses the dedicated
/// second-derivative stencil when k == j and D_k, D_j in their slots
/// otherwise.
SepOperator second_op(const Grid& grid, int k, int j, int accuracy = 8);

/// Rank-one diagonal operator diag(samples[0]) (x) ... (x) diag(samples[d-1]).
SepOperator diag_op_from_samples(const Grid& grid, const std::vector<Vector>& samples);

/// Rank-d sum of the pure second derivatives.
SepOperator laplacian(const Grid& grid, int accuracy = 8);

}  // namespace sephjb
