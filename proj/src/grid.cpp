#include "sephjb/grid.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sephjb {

double Axis::spacing() const {
  const double span = upper - lower;
  return periodic ? span / static_cast<double>(points)
                  : span / static_cast<double>(points - 1);
}

Vector Axis::nodes() const {
  Vector v(points);
  for (Index k = 0; k < points; ++k) v(k) = node(k);
  return v;
}

Grid::Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw std::invalid_argument("grid: no axes");
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    Axis& a = axes_[i];
    if (a.name.empty()) a.name = "x" + std::to_string(i + 1);
    if (a.points < 10) {
      throw std::invalid_argument("grid: axis '" + a.name + "' has " +
                                  std::to_string(a.points) +
                                  " points; at least 10 are required");
    }
    if (!(a.upper > a.lower)) {
      throw std::invalid_argument("grid: axis '" + a.name +
                                  "' needs upper > lower");
    }
  }
}

Shape Grid::shape() const {
  Shape s;
  for (const Axis& a : axes_) s.push_back(a.points);
  return s;
}

int Grid::find(const std::string& name) const {
  for (int i = 0; i < dims(); ++i)
    if (axes_[i].name == name) return i;
  return -1;
}

double Grid::wrap(int dim, double x) const {
  const Axis& a = axes_[dim];
  if (!a.periodic) return x;
  const double len = a.length();
  double y = std::fmod(x - a.lower, len);
  if (y < 0) y += len;
  if (y >= len) y = 0.0;
  return a.lower + y;
}

bool Grid::contains(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dims()) return false;
  for (int i = 0; i < dims(); ++i) {
    const Axis& a = axes_[i];
    if (a.periodic) continue;
    if (!(x[i] >= a.lower && x[i] <= a.upper)) return false;
  }
  return true;
}

InterpStencil interp_stencil(const Axis& axis, double x) {
  const double h = axis.spacing();
  if (axis.periodic) {
    const double len = axis.length();
    double y = std::fmod(x - axis.lower, len);
    if (y < 0) y += len;
    double t = y / h;
    Index k = static_cast<Index>(std::floor(t));
    if (k >= axis.points) k = axis.points - 1;
    const double w1 = t - static_cast<double>(k);
    return {k, (k + 1) % axis.points, 1.0 - w1, w1};
  }
  if (!(x >= axis.lower && x <= axis.upper)) {
    std::ostringstream msg;
    msg << "coordinate " << x << " outside [" << axis.lower << ", "
        << axis.upper << "] on axis '" << axis.name << "'";
    throw DomainError(msg.str());
  }
  const double t = (x - axis.lower) / h;
  Index k = static_cast<Index>(std::floor(t));
  if (k >= axis.points - 1) k = axis.points - 2;
  if (k < 0) k = 0;
  const double w1 = t - static_cast<double>(k);
  if (w1 == 0.0) return {k, k, 1.0, 0.0};
  return {k, k + 1, 1.0 - w1, w1};
}

double evaluate(const SepVector& f, std::span<const double> x, const Grid& grid) {
  if (static_cast<int>(x.size()) != grid.dims() || f.shape() != grid.shape())
    throw ShapeError("evaluate: point or tensor does not match the grid");
  std::vector<InterpStencil> st;
  for (int i = 0; i < grid.dims(); ++i) st.push_back(interp_stencil(grid.axis(i), x[i]));
  double total = 0.0;
  for (Index l = 0; l < f.rank(); ++l) {
    double term = f.scale(l);
    for (int i = 0; i < f.dims(); ++i) {
      const auto& s = st[i];
      const auto col = f.factor(i).col(l);
      term *= s.w0 * col(s.i0) + s.w1 * col(s.i1);
    }
    total += term;
  }
  return total;
}

double evaluate_dense(const Vector& dense, std::span<const double> x,
                      const Grid& grid) {
  const int d = grid.dims();
  std::vector<InterpStencil> st;
  for (int i = 0; i < d; ++i) st.push_back(interp_stencil(grid.axis(i), x[i]));
  double total = 0.0;
  for (unsigned corner = 0; corner < (1u << d); ++corner) {
    double w = 1.0;
    Index idx = 0;
    Index stride = 1;
    for (int i = 0; i < d; ++i) {
      const bool hi = (corner >> i) & 1u;
      w *= hi ? st[i].w1 : st[i].w0;
      idx += (hi ? st[i].i1 : st[i].i0) * stride;
      stride *= grid.axis(i).points;
    }
    if (w != 0.0) total += w * dense(idx);
  }
  return total;
}

}  // namespace sephjb
