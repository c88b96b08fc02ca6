#pragma once

#include <span>
#include <string>
#include <vector>

#include "sephjb/sep_tensor.hpp"

namespace sephjb {

/// Uniform 1D mesh. Periodic axes omit the duplicate endpoint, so node k sits
/// at lower + k * spacing for k < points in both cases.
struct Axis {
  std::string name;
  Index points = 0;
  double lower = 0.0;
  double upper = 1.0;
  bool periodic = false;

  double spacing() const;
  double node(Index k) const { return lower + static_cast<double>(k) * spacing(); }
  Vector nodes() const;
  double length() const { return upper - lower; }
};

class Grid {
 public:
  Grid() = default;
  /// Throws std::invalid_argument if an axis has fewer than 10 points or an
  /// empty interval.
  explicit Grid(std::vector<Axis> axes);

  int dims() const { return static_cast<int>(axes_.size()); }
  const Axis& axis(int i) const { return axes_[i]; }
  const std::vector<Axis>& axes() const { return axes_; }
  Shape shape() const;

  /// Index of the axis with this name, or -1.
  int find(const std::string& name) const;

  /// Maps x into [lower, upper) on periodic axes; leaves others untouched.
  double wrap(int dim, double x) const;
  bool contains(std::span<const double> x) const;

 private:
  std::vector<Axis> axes_;
};

/// Linear interpolation stencil on one axis: value = w0 * f[i0] + w1 * f[i1].
struct InterpStencil {
  Index i0 = 0;
  Index i1 = 0;
  double w0 = 1.0;
  double w1 = 0.0;
};

/// Throws DomainError for coordinates outside a non-periodic axis.
InterpStencil interp_stencil(const Axis& axis, double x);

/// Multilinear interpolation of a separated tensor at an off-grid point;
/// exact at grid nodes.
double evaluate(const SepVector& f, std::span<const double> x, const Grid& grid);

/// Same, on a dense tensor (dimension 0 fastest). Used as a test oracle.
double evaluate_dense(const Vector& dense, std::span<const double> x,
                      const Grid& grid);

}  // namespace sephjb
