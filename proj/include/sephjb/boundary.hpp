#pragma once

// Dirichlet conditions on axis-aligned index boxes.
//
// Outer faces of non-periodic axes are handled together: the complement of
// all constrained faces is the rank-one interior mask D, so
//
//     A <- D A + (I - D)
//
// adds only two terms. Each interior box with indicator projector P adds
// 2r + 1 terms through A <- A - P A + P. The right-hand side receives P v
// on every constrained node.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sephjb/grid.hpp"
#include "sephjb/problem.hpp"
#include "sephjb/sep_tensor.hpp"

namespace sephjb {

enum class Side { lower, upper };

struct FaceCondition {
  int dim = 0;
  Side side = Side::lower;
  /// Empty: absorbing face (desirability zero).
  std::optional<SepTerm> value;
};

struct RegionCondition {
  /// Inclusive node index range per dimension.
  std::vector<std::pair<Index, Index>> nodes;
  SepTerm value;

  /// Box covering every node whose coordinate lies in [lo_i, hi_i]. Throws
  /// BoundaryError if the box holds no node along some axis.
  static RegionCondition from_box(const Grid& grid, const std::vector<std::pair<double, double>>& box,
                                  SepTerm value);
  bool contains(std::span<const double> x, const Grid& grid) const;
};

struct BoundarySpec {
  std::vector<FaceCondition> faces;
  std::vector<RegionCondition> regions;

  bool empty() const { return faces.empty() && regions.empty(); }
};

struct BoundaryImposition {
  SepOperator op;
  SepVector rhs;
  /// Operator rank after the outer faces and after each region.
  std::vector<Index> rank_history;
  /// Rank the hypercube accounting d + 2 r would assign, for reporting.
  Index reference_rank = 0;
};

class BoundaryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws BoundaryError for an empty spec, a face on a periodic axis, a
/// region outside the grid, or overlapping conditions with different values.
void validate_boundary(const BoundarySpec& bc, const Grid& grid);

BoundaryImposition impose_dirichlet(const SepOperator& A, const BoundarySpec& bc,
                                    const Grid& grid);

/// Applies the same projections to a vector: zeroes every constrained node.
SepVector mask_constrained(const SepVector& f, const BoundarySpec& bc, const Grid& grid);

/// Right-hand side alone: the boundary values on constrained nodes.
SepVector boundary_values(const BoundarySpec& bc, const Grid& grid);

}  // namespace sephjb
