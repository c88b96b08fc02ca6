#pragma once

// Data-parallel inner kernels shared by the separated algebra and ALS.
//
// Every kernel has a serial reference and an OpenMP version. The parallel
// versions partition the *outputs* across threads (each output entry is
// produced by exactly one thread in the same operation order as the serial
// code), so both versions return bit-identical results for any thread count.

#include <vector>

#include "sephjb/sep_tensor.hpp"

namespace sephjb::kernels {

enum class Exec { serial, parallel };

/// Sets the OpenMP thread cap from SEPHJB_THREADS, if present.
void configure_threads_from_env();
int max_threads();

/// Row range [first, last] of the nonzero entries of each column; empty
/// columns have first > last. Lets assembly skip the zero part of banded
/// stencil products.
struct ColumnProfile {
  std::vector<Index> first;
  std::vector<Index> last;

  static ColumnProfile of(const Matrix& m);
};

/// Products A^a F^j for all operator terms a and vector terms j in one
/// dimension. Column a * F.cols() + j of the result holds A^a F^j.
Matrix apply_factors(const std::vector<const Matrix*>& ops, const Matrix& F,
                     Exec exec = Exec::parallel);

/// Gram matrix U^T U.
Matrix gram(const Matrix& U, Exec exec = Exec::parallel);

/// Gram matrix U^T V.
Matrix cross_gram(const Matrix& U, const Matrix& V,
                  Exec exec = Exec::parallel);

/// Cached pairwise products P[a * r + b] = (A^b)^T A^a of the operator
/// factors in one dimension, with their column profiles.
struct OperatorProducts {
  Index rank = 0;
  std::vector<Matrix> products;
  std::vector<ColumnProfile> profiles;

  const Matrix& at(Index a, Index b) const { return products[a * rank + b]; }
  const ColumnProfile& profile(Index a, Index b) const {
    return profiles[a * rank + b];
  }
};

OperatorProducts operator_products(const std::vector<const Matrix*>& ops,
                                   Exec exec = Exec::parallel);

/// Assembles the normal-equation matrix of one ALS block update:
///
///   block(i, j) = sum_{a,b} s_a s_b coef((a, j), (b, i)) P[a, b]
///
/// for the n_terms x n_terms blocks of size M x M. `coef` is indexed by the
/// pair (operator term, vector term) flattened as a * n_terms + j. Only the
/// lower block triangle and the diagonal blocks are written; the result is
/// meant for a lower self-adjoint view.
Matrix normal_matrix(const OperatorProducts& P, std::span<const double> op_scales,
                     const Matrix& coef, Index n_terms,
                     Exec exec = Exec::parallel);

/// Hadamard product of all matrices in `mats` except index `skip`.
Matrix hadamard_except(const std::vector<Matrix>& mats, int skip);

}  // namespace sephjb::kernels
