#include "sephjb/sep_tensor.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "sephjb/kernels.hpp"

namespace sephjb {

namespace {

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    std::ostringstream msg;
    msg << what << ": shape mismatch (" << a.size() << " vs " << b.size()
        << " dims";
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      if (a[i] != b[i]) {
        msg << ", dim " << i << ": " << a[i] << " vs " << b[i];
        break;
      }
    }
    msg << ")";
    throw ShapeError(msg.str());
  }
}

void check_cap(std::int64_t entries, DenseCap cap) {
  if (entries > cap.max_entries) {
    throw DenseCapError("dense expansion of " + std::to_string(entries) +
                        " entries exceeds the cap of " +
                        std::to_string(cap.max_entries));
  }
}

Shape squared_shape(const Shape& shape) {
  Shape out(shape.size());
  for (std::size_t i = 0; i < shape.size(); ++i) out[i] = shape[i] * shape[i];
  return out;
}

}  // namespace

Index num_points(const Shape& shape) {
  Index n = 1;
  for (Index m : shape) n *= m;
  return n;
}

// ---- SepVector ---------------------------------------------------------------

SepVector::SepVector(Shape shape) : shape_(std::move(shape)) {
  if (shape_.empty()) throw ShapeError("SepVector: at least one dimension required");
  factors_.reserve(shape_.size());
  for (Index m : shape_) {
    if (m < 1) throw ShapeError("SepVector: mode sizes must be positive");
    factors_.emplace_back(m, 0);
  }
}

SepVector::SepVector(std::vector<double> scales, std::vector<Matrix> factors)
    : scales_(std::move(scales)), factors_(std::move(factors)) {
  if (factors_.empty()) throw ShapeError("SepVector: at least one dimension required");
  const Index r = static_cast<Index>(scales_.size());
  shape_.reserve(factors_.size());
  for (const Matrix& f : factors_) {
    if (f.cols() != r) {
      throw ShapeError("SepVector: factor column count " +
                       std::to_string(f.cols()) + " does not match rank " +
                       std::to_string(r));
    }
    shape_.push_back(f.rows());
  }
  for (Index l = 0; l < r; ++l) {
    bool zero = false;
    for (Matrix& f : factors_) {
      const double n = f.col(l).norm();
      if (n == 0.0 || !std::isfinite(n)) {
        zero = true;
        continue;
      }
      // Columns already normalized to rounding are kept bit for bit.
      if (std::abs(n - 1.0) > 1e-14) {
        f.col(l) /= n;
        scales_[l] *= n;
      }
    }
    if (zero || scales_[l] == 0.0) {
      scales_[l] = 0.0;
      for (Matrix& f : factors_) {
        if (f.col(l).norm() == 0.0 || !std::isfinite(f.col(l).norm()))
          f.col(l).setConstant(1.0 / std::sqrt(static_cast<double>(f.rows())));
      }
    } else if (scales_[l] < 0.0) {
      scales_[l] = -scales_[l];
      factors_[0].col(l) *= -1.0;
    }
  }
}

SepVector SepVector::rank_one(double scale, const std::vector<Vector>& factors) {
  std::vector<Matrix> mats;
  mats.reserve(factors.size());
  for (const Vector& v : factors) mats.emplace_back(v);
  return SepVector({scale}, std::move(mats));
}

// ---- SepOperator -------------------------------------------------------------

SepOperator::SepOperator(Shape shape) : shape_(std::move(shape)) {
  if (shape_.empty()) throw ShapeError("SepOperator: at least one dimension required");
}

SepOperator::SepOperator(Shape shape, std::vector<double> scales,
                         std::vector<std::vector<Matrix>> terms)
    : shape_(std::move(shape)), scales_(std::move(scales)), terms_(std::move(terms)) {
  if (shape_.empty()) throw ShapeError("SepOperator: at least one dimension required");
  if (terms_.size() != scales_.size())
    throw ShapeError("SepOperator: scale count does not match term count");
  for (const auto& t : terms_) {
    if (t.size() != shape_.size())
      throw ShapeError("SepOperator: term has wrong number of dimensions");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i].rows() != shape_[i] || t[i].cols() != shape_[i])
        throw ShapeError("SepOperator: factor matrix in dim " + std::to_string(i) +
                         " is not " + std::to_string(shape_[i]) + " x " +
                         std::to_string(shape_[i]));
    }
  }
}

SepOperator SepOperator::identity(const Shape& shape) {
  std::vector<Matrix> mats;
  for (Index m : shape) mats.push_back(Matrix::Identity(m, m));
  return SepOperator(shape, {1.0}, {std::move(mats)});
}

SepOperator SepOperator::rank_one(double scale, std::vector<Matrix> factors) {
  Shape shape;
  for (const Matrix& m : factors) shape.push_back(m.rows());
  return SepOperator(std::move(shape), {scale}, {std::move(factors)});
}

// ---- vector algebra ------------------------------------------------------------

SepVector add(const SepVector& a, const SepVector& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  std::vector<double> scales(a.scales().begin(), a.scales().end());
  scales.insert(scales.end(), b.scales().begin(), b.scales().end());
  std::vector<Matrix> factors;
  for (int i = 0; i < a.dims(); ++i) {
    Matrix f(a.mode_size(i), a.rank() + b.rank());
    f << a.factor(i), b.factor(i);
    factors.push_back(std::move(f));
  }
  return SepVector(std::move(scales), std::move(factors));
}

SepVector scale(const SepVector& a, double alpha) {
  std::vector<double> scales(a.scales().begin(), a.scales().end());
  for (double& s : scales) s *= alpha;
  return SepVector(std::move(scales), a.factors());
}

double inner(const SepVector& a, const SepVector& b) {
  require_same_shape(a.shape(), b.shape(), "inner");
  if (a.rank() == 0 || b.rank() == 0) return 0.0;
  Matrix prod = Matrix::Ones(a.rank(), b.rank());
  for (int i = 0; i < a.dims(); ++i) {
    prod.array() *= (a.factor(i).transpose() * b.factor(i)).array();
  }
  Eigen::Map<const Vector> sa(a.scales().data(), a.rank());
  Eigen::Map<const Vector> sb(b.scales().data(), b.rank());
  return sa.dot(prod * sb);
}

double norm(const SepVector& a) {
  const double sq = inner(a, a);
  return sq > 0.0 ? std::sqrt(sq) : 0.0;
}

// ---- operator algebra ------------------------------------------------------------

SepVector apply(const SepOperator& A, const SepVector& f) {
  require_same_shape(A.shape(), f.shape(), "apply");
  const Index ra = A.rank();
  const Index rf = f.rank();
  std::vector<double> scales(ra * rf);
  for (Index a = 0; a < ra; ++a)
    for (Index j = 0; j < rf; ++j) scales[a * rf + j] = A.scale(a) * f.scale(j);
  std::vector<Matrix> factors;
  for (int i = 0; i < A.dims(); ++i) {
    std::vector<const Matrix*> ops;
    for (Index a = 0; a < ra; ++a) ops.push_back(&A.factor(a, i));
    factors.push_back(kernels::apply_factors(ops, f.factor(i)));
  }
  return SepVector(std::move(scales), std::move(factors));
}

SepOperator add(const SepOperator& A, const SepOperator& B) {
  require_same_shape(A.shape(), B.shape(), "add");
  std::vector<double> scales(A.scales().begin(), A.scales().end());
  scales.insert(scales.end(), B.scales().begin(), B.scales().end());
  std::vector<std::vector<Matrix>> terms;
  terms.reserve(A.rank() + B.rank());
  for (Index l = 0; l < A.rank(); ++l) terms.push_back(A.term(l));
  for (Index l = 0; l < B.rank(); ++l) terms.push_back(B.term(l));
  return SepOperator(A.shape(), std::move(scales), std::move(terms));
}

SepOperator scale(const SepOperator& A, double alpha) {
  if (alpha == 0.0) return SepOperator(A.shape());
  std::vector<double> scales(A.scales().begin(), A.scales().end());
  for (double& s : scales) s *= alpha;
  std::vector<std::vector<Matrix>> terms;
  for (Index l = 0; l < A.rank(); ++l) terms.push_back(A.term(l));
  return SepOperator(A.shape(), std::move(scales), std::move(terms));
}

SepOperator compose(const SepOperator& A, const SepOperator& B) {
  require_same_shape(A.shape(), B.shape(), "compose");
  std::vector<double> scales;
  std::vector<std::vector<Matrix>> terms;
  for (Index a = 0; a < A.rank(); ++a) {
    for (Index b = 0; b < B.rank(); ++b) {
      scales.push_back(A.scale(a) * B.scale(b));
      std::vector<Matrix> t;
      for (int i = 0; i < A.dims(); ++i) t.push_back(A.factor(a, i) * B.factor(b, i));
      terms.push_back(std::move(t));
    }
  }
  return SepOperator(A.shape(), std::move(scales), std::move(terms));
}

SepVector vectorize(const SepOperator& A) {
  std::vector<Matrix> factors;
  for (int i = 0; i < A.dims(); ++i) {
    const Index m = A.mode_size(i);
    Matrix f(m * m, A.rank());
    for (Index l = 0; l < A.rank(); ++l)
      f.col(l) = Eigen::Map<const Vector>(A.factor(l, i).data(), m * m);
    factors.push_back(std::move(f));
  }
  if (A.rank() == 0) return SepVector(squared_shape(A.shape()));
  return SepVector(std::vector<double>(A.scales().begin(), A.scales().end()),
                   std::move(factors));
}

SepOperator unvectorize(const SepVector& v, const Shape& shape) {
  require_same_shape(v.shape(), squared_shape(shape), "unvectorize");
  std::vector<double> scales(v.scales().begin(), v.scales().end());
  std::vector<std::vector<Matrix>> terms;
  for (Index l = 0; l < v.rank(); ++l) {
    std::vector<Matrix> t;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      const Index m = shape[i];
      t.push_back(Eigen::Map<const Matrix>(v.factor(static_cast<int>(i)).col(l).data(), m, m));
    }
    terms.push_back(std::move(t));
  }
  return SepOperator(shape, std::move(scales), std::move(terms));
}

// ---- dense expansions ------------------------------------------------------------

Vector to_dense(const SepVector& f, DenseCap cap) {
  const Index n = num_points(f.shape());
  check_cap(n, cap);
  Vector out = Vector::Zero(n);
  for (Index l = 0; l < f.rank(); ++l) {
    // Kronecker expansion with dimension 0 fastest.
    Vector term = Vector::Constant(1, f.scale(l));
    for (int i = 0; i < f.dims(); ++i) {
      const auto col = f.factor(i).col(l);
      Vector next(term.size() * col.size());
      for (Index k = 0; k < col.size(); ++k)
        next.segment(k * term.size(), term.size()) = col(k) * term;
      term = std::move(next);
    }
    out += term;
  }
  return out;
}

Matrix to_dense(const SepOperator& A, DenseCap cap) {
  const Index n = num_points(A.shape());
  check_cap(static_cast<std::int64_t>(n) * n, cap);
  Matrix out = Matrix::Zero(n, n);
  for (Index l = 0; l < A.rank(); ++l) {
    Matrix term = Matrix::Constant(1, 1, A.scale(l));
    for (int i = 0; i < A.dims(); ++i) {
      const Matrix& m = A.factor(l, i);
      Matrix next(term.rows() * m.rows(), term.cols() * m.cols());
      for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
          next.block(r * term.rows(), c * term.cols(), term.rows(), term.cols()) =
              m(r, c) * term;
      term = std::move(next);
    }
    out += term;
  }
  return out;
}

Vector mode_product(const Vector& dense, const Shape& shape, int k,
                    const Matrix& m) {
  Index inner_size = 1;
  for (int i = 0; i < k; ++i) inner_size *= shape[i];
  const Index mk = shape[k];
  const Index outer = dense.size() / (inner_size * mk);
  Vector out(dense.size());
  for (Index o = 0; o < outer; ++o) {
    // Slice o viewed as an inner_size x mk matrix; multiply by m^T on the right.
    Eigen::Map<const Matrix> in(dense.data() + o * inner_size * mk, inner_size, mk);
    Eigen::Map<Matrix> res(out.data() + o * inner_size * mk, inner_size, mk);
    res.noalias() = in * m.transpose();
  }
  return out;
}

Vector apply_dense(const SepOperator& A, const Vector& dense, DenseCap cap) {
  const Index n = num_points(A.shape());
  check_cap(n, cap);
  if (dense.size() != n) throw ShapeError("apply_dense: vector length mismatch");
  Vector out = Vector::Zero(n);
  for (Index l = 0; l < A.rank(); ++l) {
    Vector t = dense;
    for (int i = 0; i < A.dims(); ++i) t = mode_product(t, A.shape(), i, A.factor(l, i));
    out += A.scale(l) * t;
  }
  return out;
}

SepVector random_rank_one(const Shape& shape, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<Vector> factors;
  for (Index m : shape) {
    Vector v(m);
    for (Index k = 0; k < m; ++k) v(k) = dist(rng);
    v.normalize();
    factors.push_back(std::move(v));
  }
  return SepVector::rank_one(scale, factors);
}

}  // namespace sephjb
