#include "sephjb/kernels.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace sephjb::kernels {

void configure_threads_from_env() {
  if (const char* env = std::getenv("SEPHJB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
}

int max_threads() { return omp_get_max_threads(); }

ColumnProfile ColumnProfile::of(const Matrix& m) {
  ColumnProfile p;
  p.first.assign(m.cols(), 0);
  p.last.assign(m.cols(), -1);
  for (Index c = 0; c < m.cols(); ++c) {
    Index lo = 0;
    while (lo < m.rows() && m(lo, c) == 0.0) ++lo;
    Index hi = m.rows() - 1;
    while (hi >= lo && m(hi, c) == 0.0) --hi;
    p.first[c] = lo;
    p.last[c] = hi;
  }
  return p;
}

namespace {

void apply_one(const std::vector<const Matrix*>& ops, const Matrix& F,
               Matrix& out, Index col) {
  const Index r = F.cols();
  const Index a = col / r;
  const Index j = col % r;
  out.col(col).noalias() = (*ops[a]) * F.col(j);
}

}  // namespace

Matrix apply_factors(const std::vector<const Matrix*>& ops, const Matrix& F,
                     Exec exec) {
  const Index total = static_cast<Index>(ops.size()) * F.cols();
  Matrix out(F.rows(), total);
  if (exec == Exec::serial) {
    for (Index c = 0; c < total; ++c) apply_one(ops, F, out, c);
  } else {
#pragma omp parallel for schedule(static)
    for (Index c = 0; c < total; ++c) apply_one(ops, F, out, c);
  }
  return out;
}

Matrix gram(const Matrix& U, Exec exec) { return cross_gram(U, U, exec); }

Matrix cross_gram(const Matrix& U, const Matrix& V, Exec exec) {
  Matrix out(U.cols(), V.cols());
  if (exec == Exec::serial) {
    for (Index j = 0; j < V.cols(); ++j)
      for (Index i = 0; i < U.cols(); ++i) out(i, j) = U.col(i).dot(V.col(j));
  } else {
#pragma omp parallel for schedule(static)
    for (Index j = 0; j < V.cols(); ++j)
      for (Index i = 0; i < U.cols(); ++i) out(i, j) = U.col(i).dot(V.col(j));
  }
  return out;
}

OperatorProducts operator_products(const std::vector<const Matrix*>& ops,
                                   Exec exec) {
  OperatorProducts P;
  P.rank = static_cast<Index>(ops.size());
  const Index n = P.rank * P.rank;
  P.products.resize(n);
  P.profiles.resize(n);
  auto fill = [&](Index idx) {
    const Index a = idx / P.rank;
    const Index b = idx % P.rank;
    P.products[idx].noalias() = ops[b]->transpose() * (*ops[a]);
    P.profiles[idx] = ColumnProfile::of(P.products[idx]);
  };
  if (exec == Exec::serial) {
    for (Index idx = 0; idx < n; ++idx) fill(idx);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (Index idx = 0; idx < n; ++idx) fill(idx);
  }
  return P;
}

namespace {

void assemble_block(const OperatorProducts& P, std::span<const double> sa,
                    const Matrix& coef, Index n_terms, Index i, Index j,
                    Matrix& out) {
  const Index m = P.rank > 0 ? P.products[0].rows() : 0;
  auto block = out.block(i * m, j * m, m, m);
  block.setZero();
  for (Index a = 0; a < P.rank; ++a) {
    for (Index b = 0; b < P.rank; ++b) {
      const double c = sa[a] * sa[b] * coef(a * n_terms + j, b * n_terms + i);
      if (c == 0.0) continue;
      const Matrix& prod = P.at(a, b);
      const ColumnProfile& prof = P.profile(a, b);
      for (Index col = 0; col < m; ++col) {
        const Index lo = prof.first[col];
        const Index len = prof.last[col] - lo + 1;
        if (len <= 0) continue;
        block.col(col).segment(lo, len) += c * prod.col(col).segment(lo, len);
      }
    }
  }
}

}  // namespace

Matrix normal_matrix(const OperatorProducts& P, std::span<const double> sa,
                     const Matrix& coef, Index n_terms, Exec exec) {
  const Index m = P.rank > 0 ? P.products[0].rows() : 0;
  Matrix out = Matrix::Zero(n_terms * m, n_terms * m);
  const Index pairs = n_terms * (n_terms + 1) / 2;
  auto pair_of = [n_terms](Index p, Index& i, Index& j) {
    // Enumerates (i, j) with i >= j, row-major over the lower triangle.
    i = 0;
    while ((i + 1) * (i + 2) / 2 <= p) ++i;
    j = p - i * (i + 1) / 2;
    (void)n_terms;
  };
  if (exec == Exec::serial) {
    for (Index p = 0; p < pairs; ++p) {
      Index i, j;
      pair_of(p, i, j);
      assemble_block(P, sa, coef, n_terms, i, j, out);
    }
  } else {
#pragma omp parallel for schedule(dynamic)
    for (Index p = 0; p < pairs; ++p) {
      Index i, j;
      pair_of(p, i, j);
      assemble_block(P, sa, coef, n_terms, i, j, out);
    }
  }
  return out;
}

Matrix hadamard_except(const std::vector<Matrix>& mats, int skip) {
  Matrix out;
  bool first = true;
  for (int d = 0; d < static_cast<int>(mats.size()); ++d) {
    if (d == skip) continue;
    if (first) {
      out = mats[d];
      first = false;
    } else {
      out.array() *= mats[d].array();
    }
  }
  if (first) {
    // Only one dimension: the empty product is all ones.
    const Index n = mats.empty() ? 0 : mats[0].rows();
    const Index k = mats.empty() ? 0 : mats[0].cols();
    out = Matrix::Ones(n, k);
  }
  return out;
}

}  // namespace sephjb::kernels
