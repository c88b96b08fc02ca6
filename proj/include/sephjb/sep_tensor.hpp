#pragma once

// Separated (CP-format) vectors and operators on tensor-product grids.
//
// A SepVector represents
//     F = sum_l s_l  F_1^l (x) F_2^l (x) ... (x) F_d^l
// with every factor F_i^l of unit Euclidean norm and s_l >= 0. Factors for a
// dimension are stored as the columns of one M_i x r matrix, the layout used
// by most CP codes.
//
// A SepOperator represents
//     A = sum_l s_l  A_1^l (x) ... (x) A_d^l
// with dense M_i x M_i factor matrices. Operator factors are not normalized
// and operator scales may be negative.
//
// Dense expansions order grid points with dimension 0 varying fastest.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sephjb {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Shape = std::vector<Index>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DenseCapError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Number of grid points of a shape (product of mode sizes).
Index num_points(const Shape& shape);

class SepVector {
 public:
  SepVector() = default;

  /// Rank-0 (exact zero) tensor on `shape`.
  explicit SepVector(Shape shape);

  /// Builds from per-dimension factor matrices (M_i x r, one column per
  /// term). Columns are renormalized: norms are absorbed into the scales and
  /// negative scales flip the sign of the dimension-0 column. A column of
  /// zero norm yields a zero scale with a constant unit factor.
  SepVector(std::vector<double> scales, std::vector<Matrix> factors);

  static SepVector rank_one(double scale, const std::vector<Vector>& factors);

  int dims() const { return static_cast<int>(shape_.size()); }
  const Shape& shape() const { return shape_; }
  Index mode_size(int dim) const { return shape_[dim]; }
  Index rank() const { return static_cast<Index>(scales_.size()); }

  std::span<const double> scales() const { return scales_; }
  double scale(Index term) const { return scales_[term]; }
  const Matrix& factor(int dim) const { return factors_[dim]; }
  const std::vector<Matrix>& factors() const { return factors_; }

 private:
  Shape shape_;
  std::vector<double> scales_;
  std::vector<Matrix> factors_;
};

class SepOperator {
 public:
  SepOperator() = default;

  /// Rank-0 operator on `shape`.
  explicit SepOperator(Shape shape);

  /// `terms[l][i]` is the M_i x M_i factor of term l in dimension i.
  SepOperator(Shape shape, std::vector<double> scales,
              std::vector<std::vector<Matrix>> terms);

  static SepOperator identity(const Shape& shape);
  static SepOperator rank_one(double scale, std::vector<Matrix> factors);

  int dims() const { return static_cast<int>(shape_.size()); }
  const Shape& shape() const { return shape_; }
  Index mode_size(int dim) const { return shape_[dim]; }
  Index rank() const { return static_cast<Index>(scales_.size()); }

  std::span<const double> scales() const { return scales_; }
  double scale(Index term) const { return scales_[term]; }
  const Matrix& factor(Index term, int dim) const { return terms_[term][dim]; }
  const std::vector<Matrix>& term(Index l) const { return terms_[l]; }

 private:
  Shape shape_;
  std::vector<double> scales_;
  std::vector<std::vector<Matrix>> terms_;
};

// ---- vector algebra --------------------------------------------------------

SepVector add(const SepVector& a, const SepVector& b);
SepVector scale(const SepVector& a, double alpha);
double inner(const SepVector& a, const SepVector& b);
double norm(const SepVector& a);

// ---- operator algebra ------------------------------------------------------

/// Matrix-vector product; result rank is A.rank() * f.rank().
SepVector apply(const SepOperator& A, const SepVector& f);
SepOperator add(const SepOperator& A, const SepOperator& B);
SepOperator scale(const SepOperator& A, double alpha);
/// Product A*B; result rank is A.rank() * B.rank().
SepOperator compose(const SepOperator& A, const SepOperator& B);

/// Operator viewed as a vector of vectorized (column-major) factor matrices,
/// mode sizes M_i^2. Used to compress operators with the vector routines.
SepVector vectorize(const SepOperator& A);
SepOperator unvectorize(const SepVector& v, const Shape& shape);

// ---- dense expansions (oracles, small instances only) ---------------------

struct DenseCap {
  std::int64_t max_entries = 1'000'000;
};

Vector to_dense(const SepVector& f, DenseCap cap = {});
/// Dense matrix of the operator; the cap applies to the matrix entry count.
Matrix to_dense(const SepOperator& A, DenseCap cap = {});
/// Applies every term of A to a dense tensor through mode products, without
/// forming the dense matrix.
Vector apply_dense(const SepOperator& A, const Vector& dense, DenseCap cap = {});
/// Mode-k product: multiplies the dense tensor by `m` along dimension k.
Vector mode_product(const Vector& dense, const Shape& shape, int k,
                    const Matrix& m);

// ---- construction helpers --------------------------------------------------

/// Rank-one tensor with factors drawn from U(-1, 1) and normalized;
/// deterministic for a given seed.
SepVector random_rank_one(const Shape& shape, std::uint64_t seed,
                          double scale = 1.0);

}  // namespace sephjb
