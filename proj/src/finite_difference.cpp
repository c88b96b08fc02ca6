#include "sephjb/finite_difference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace sephjb {

StencilSpec StencilSpec::for_axis(const Axis& axis, int derivative, int accuracy) {
  StencilSpec s;
  s.derivative = derivative;
  s.accuracy = accuracy;
  s.boundary = axis.periodic ? Boundary::periodic_wrap : Boundary::one_sided;
  return s;
}

std::vector<double> stencil_weights(std::span<const int> offsets, int derivative) {
  const int n = static_cast<int>(offsets.size());
  if (n <= derivative) throw std::invalid_argument("stencil_weights: too few points");
  int reach = 1;
  for (int o : offsets) reach = std::max(reach, std::abs(o));
  const long double s = reach;

  // Row p: sum_j w~_j t_j^p = p! [p == derivative], t_j = o_j / s. The
  // unscaled weights are w_j = w~_j / s^derivative.
  std::vector<long double> a(static_cast<std::size_t>(n) * n);
  std::vector<long double> rhs(n, 0.0L);
  for (int p = 0; p < n; ++p) {
    for (int j = 0; j < n; ++j) a[p * n + j] = std::pow(offsets[j] / s, p);
  }
  long double fact = 1.0L;
  for (int p = 2; p <= derivative; ++p) fact *= p;
  rhs[derivative] = fact;

  // Gaussian elimination with partial pivoting.
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::fabs(a[r * n + c]) > std::fabs(a[piv * n + c])) piv = r;
    if (a[piv * n + c] == 0.0L) throw std::invalid_argument("stencil_weights: repeated offsets");
    if (piv != c) {
      for (int k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      std::swap(rhs[c], rhs[piv]);
    }
    for (int r = c + 1; r < n; ++r) {
      const long double f = a[r * n + c] / a[c * n + c];
      if (f == 0.0L) continue;
      for (int k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      rhs[r] -= f * rhs[c];
    }
  }
  std::vector<long double> w(n);
  for (int r = n - 1; r >= 0; --r) {
    long double acc = rhs[r];
    for (int k = r + 1; k < n; ++k) acc -= a[r * n + k] * w[k];
    w[r] = acc / a[r * n + r];
  }
  std::vector<double> out(n);
  const long double scale = std::pow(s, derivative);
  for (int j = 0; j < n; ++j) out[j] = static_cast<double>(w[j] / scale);
  return out;
}

Matrix d_matrix(const Grid& grid, int dim, const StencilSpec& spec) {
  if (dim < 0 || dim >= grid.dims()) throw std::invalid_argument("d_matrix: bad dimension");
  if (spec.derivative != 1 && spec.derivative != 2)
    throw std::invalid_argument("d_matrix: derivative order must be 1 or 2");
  if (spec.accuracy < 2 || spec.accuracy > 8 || spec.accuracy % 2 != 0)
    throw std::invalid_argument("d_matrix: accuracy order must be even, 2..8");
  const Axis& axis = grid.axis(dim);
  const bool wrap = spec.boundary == StencilSpec::Boundary::periodic_wrap;
  if (wrap != axis.periodic)
    throw std::invalid_argument("d_matrix: boundary treatment does not match axis '" +
                                axis.name + "'");
  const Index m = axis.points;
  if (m < spec.accuracy + 2) {
    throw std::invalid_argument("d_matrix: axis '" + axis.name + "' has " +
                                std::to_string(m) + " points; accuracy order " +
                                std::to_string(spec.accuracy) + " needs at least " +
                                std::to_string(spec.accuracy + 2));
  }
  const double h = axis.spacing();
  const double inv = std::pow(h, -spec.derivative);
  const int half = spec.accuracy / 2;

  std::vector<int> centered;
  for (int o = -half; o <= half; ++o) centered.push_back(o);
  const std::vector<double> wc = stencil_weights(centered, spec.derivative);

  Matrix D = Matrix::Zero(m, m);
  if (wrap) {
    for (Index row = 0; row < m; ++row)
      for (int j = 0; j < static_cast<int>(centered.size()); ++j)
        D(row, ((row + centered[j]) % m + m) % m) += wc[j] * inv;
    return D;
  }

  // Boundary windows need one extra point for the second derivative, where
  // the centered stencil gains an order from symmetry.
  const int width = spec.accuracy + spec.derivative;
  for (Index row = 0; row < m; ++row) {
    if (row - half >= 0 && row + half <= m - 1) {
      for (int j = 0; j < static_cast<int>(centered.size()); ++j)
        D(row, row + centered[j]) = wc[j] * inv;
      continue;
    }
    const Index start = row - half < 0 ? 0 : m - width;
    std::vector<int> offsets;
    for (int j = 0; j < width; ++j) offsets.push_back(static_cast<int>(start + j - row));
    const std::vector<double> w = stencil_weights(offsets, spec.derivative);
    for (int j = 0; j < width; ++j) D(row, start + j) = w[j] * inv;
  }
  return D;
}

namespace {

std::vector<Matrix> identities(const Grid& grid) {
  std::vector<Matrix> out;
  for (const Axis& a : grid.axes()) out.push_back(Matrix::Identity(a.points, a.points));
  return out;
}

}  // namespace

SepOperator gradient_op(const Grid& grid, int k, int accuracy) {
  if (k < 0 || k >= grid.dims()) throw std::invalid_argument("gradient_op: bad dimension");
  auto mats = identities(grid);
  mats[k] = d_matrix(grid, k, StencilSpec::for_axis(grid.axis(k), 1, accuracy));
  return SepOperator::rank_one(1.0, std::move(mats));
}

SepOperator second_op(const Grid& grid, int k, int j, int accuracy) {
  if (k < 0 || k >= grid.dims() || j < 0 || j >= grid.dims())
    throw std::invalid_argument("second_op: bad dimension");
  auto mats = identities(grid);
  if (k == j) {
    mats[k] = d_matrix(grid, k, StencilSpec::for_axis(grid.axis(k), 2, accuracy));
  } else {
    mats[k] = d_matrix(grid, k, StencilSpec::for_axis(grid.axis(k), 1, accuracy));
    mats[j] = d_matrix(grid, j, StencilSpec::for_axis(grid.axis(j), 1, accuracy));
  }
  return SepOperator::rank_one(1.0, std::move(mats));
}

SepOperator diag_op_from_samples(const Grid& grid, const std::vector<Vector>& samples) {
  if (static_cast<int>(samples.size()) != grid.dims())
    throw ShapeError("diag_op_from_samples: need one sample vector per dimension");
  std::vector<Matrix> mats;
  for (int i = 0; i < grid.dims(); ++i) {
    if (samples[i].size() != grid.axis(i).points)
      throw ShapeError("diag_op_from_samples: sample length mismatch in dim " +
                       std::to_string(i));
    mats.push_back(samples[i].asDiagonal());
  }
  return SepOperator::rank_one(1.0, std::move(mats));
}

SepOperator laplacian(const Grid& grid, int accuracy) {
  SepOperator out(grid.shape());
  for (int k = 0; k < grid.dims(); ++k) out = add(out, second_op(grid, k, k, accuracy));
  return out;
}

}  // namespace sephjb
