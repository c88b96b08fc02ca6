#include "sephjb/als.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace sephjb {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::rank_capped: return "rank-capped";
    case Termination::sweep_capped: return "sweep-capped";
  }
  return "unknown";
}

void AlsOptions::validate() const {
  if (!(tolerance > 0.0)) throw std::invalid_argument("ALS: tolerance must be positive");
  if (!(stagnation > 0.0 && stagnation < 1.0))
    throw std::invalid_argument("ALS: stagnation threshold must lie in (0, 1)");
  if (max_rank < 1) throw std::invalid_argument("ALS: max_rank must be at least 1");
  if (initial_rank < 1 || initial_rank > max_rank)
    throw std::invalid_argument("ALS: initial_rank must lie in [1, max_rank]");
  if (max_sweeps < 1) throw std::invalid_argument("ALS: max_sweeps must be at least 1");
  if (regularization && *regularization < 0.0)
    throw std::invalid_argument("ALS: regularization must be non-negative");
}

namespace {

using Clock = std::chrono::steady_clock;

// Grids up to this size get their per-sweep residual recomputed densely once
// the inner-product expansion is too close to cancellation to be trusted.
constexpr Index kDenseResidualPoints = 65536;
constexpr double kExpansionFloor = 1e-6;

double dense_residual_sq(const SepOperator* A, const SepVector& F, const SepVector& G) {
  Vector f = to_dense(F);
  if (A) f = apply_dense(*A, f);
  return (f - to_dense(G)).squaredNorm();
}

class AlsEngine {
 public:
  AlsEngine(const SepOperator* A, const SepVector& G, const AlsOptions& opts)
      : A_(A), G_(G), opts_(opts), shape_(G.shape()), d_(G.dims()) {
    if (A_ && A_->shape() != shape_) throw ShapeError("ALS: operator and right-hand side shapes differ");
    if (A_ && A_->rank() == 0) throw std::invalid_argument("ALS: operator is zero");
    sg_.assign(G.scales().begin(), G.scales().end());
    g_norm2_ = std::max(0.0, inner(G, G));
    if (A_) {
      sa_.assign(A_->scales().begin(), A_->scales().end());
      prepare_operator_caches();
    } else {
      sa_ = {1.0};
    }
    // The penalty acts on the scales of F, so the default weight follows the
    // operator (mean squared singular value), not the data.
    double a2 = 1.0;
    if (A_) {
      const SepVector v = vectorize(*A_);
      a2 = inner(v, v) / static_cast<double>(num_points(shape_));
    }
    delta_ = opts.regularization.value_or(1e-10 * a2);
  }

  AlsResult run(const SepVector* initial) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(opts_.seed);
    init_iterate(initial, rng);

    AlsReport rep;
    rep.regularization = delta_;
    rep.absolute_residual = g_norm2_ == 0.0;
    const double denom = rep.absolute_residual ? 1.0 : std::sqrt(g_norm2_);

    Objective obj = objective();
    rep.initial_residual = std::sqrt(std::max(obj.residual2, 0.0)) / denom;
    double prev = rep.initial_residual;
    rep.termination = Termination::sweep_capped;

    for (int sweep = 1; sweep <= opts_.max_sweeps; ++sweep) {
      const Index rank_this_sweep = rank();
      for (int k = 0; k < d_; ++k) {
        update(k);
        ++rep.block_updates;
        if (opts_.check_monotone) {
          const Objective next = objective();
          const double slack = 1e-10 * (g_norm2_ + std::fabs(obj.af2) + obj.reg);
          if (next.value() > obj.value() + slack) {
            ++rep.monotonicity_violations;
            const double base = std::max(obj.value(), std::numeric_limits<double>::min());
            rep.worst_violation = std::max(rep.worst_violation, (next.value() - obj.value()) / base);
          }
          obj = next;
        }
      }
      if (!opts_.check_monotone) obj = objective();
      double res2 = std::max(obj.residual2, 0.0);
      if (!rep.absolute_residual && res2 < kExpansionFloor * kExpansionFloor * g_norm2_ &&
          num_points(shape_) <= kDenseResidualPoints) {
        res2 = dense_residual_sq(A_, current(), G_);
      }
      const double res = std::sqrt(res2) / denom;
      rep.residuals.push_back(res);
      rep.ranks.push_back(rank_this_sweep);
      const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      rep.wall_ms.push_back(ms);

      bool enriched = false;
      if (res <= opts_.tolerance) {
        rep.termination = Termination::converged;
      } else {
        const double improvement = prev > 0.0 ? (prev - res) / prev : 0.0;
        if (improvement < opts_.stagnation) {
          if (rank() >= opts_.max_rank) {
            rep.termination = Termination::rank_capped;
          } else {
            enrich(rng);
            enriched = true;
            rep.enrichment_sweeps.push_back(sweep);
            obj = objective();
          }
        }
      }
      if (opts_.on_sweep) opts_.on_sweep({sweep, res, rank_this_sweep, ms, enriched});
      prev = res;
      if (rep.termination != Termination::sweep_capped) break;
    }
    rep.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return {current(), std::move(rep)};
  }

 private:
  struct Objective {
    double residual2 = 0.0;
    double af2 = 0.0;
    double reg = 0.0;
    double value() const { return residual2 + reg; }
  };

  Index rank() const { return static_cast<Index>(sf_.size()); }
  Index op_rank() const { return static_cast<Index>(sa_.size()); }

  void prepare_operator_caches() {
    const Index ra = A_->rank();
    ops_.resize(d_);
    Q_.resize(d_);
    products_.resize(d_);
    std::size_t bytes = 0;
    for (int k = 0; k < d_; ++k) {
      bytes += static_cast<std::size_t>(ra * ra) * shape_[k] * shape_[k] * sizeof(double);
    }
    const bool cache = bytes <= opts_.product_cache_bytes;
    for (int k = 0; k < d_; ++k) {
      transposed_.emplace_back();
      transposed_.back().reserve(ra);
      for (Index a = 0; a < ra; ++a) {
        ops_[k].push_back(&A_->factor(a, k));
        transposed_.back().push_back(A_->factor(a, k).transpose());
      }
    }
    for (int k = 0; k < d_; ++k) {
      std::vector<const Matrix*> tp;
      for (const Matrix& m : transposed_[k]) tp.push_back(&m);
      Q_[k] = kernels::apply_factors(tp, G_.factor(k), opts_.exec);
      if (cache) products_[k] = kernels::operator_products(ops_[k], opts_.exec);
    }
  }

  void init_iterate(const SepVector* initial, std::mt19937_64& rng) {
    F_.assign(d_, Matrix());
    if (initial) {
      if (initial->shape() != shape_) throw ShapeError("ALS: initial guess has the wrong shape");
      if (initial->rank() < 1) throw std::invalid_argument("ALS: initial guess must have rank >= 1");
      sf_.assign(initial->scales().begin(), initial->scales().end());
      for (int k = 0; k < d_; ++k) F_[k] = initial->factor(k);
    } else {
      sf_.clear();
      for (int k = 0; k < d_; ++k) F_[k].resize(shape_[k], 0);
      for (Index l = 0; l < opts_.initial_rank; ++l) append_random(rng);
    }
    U_.assign(d_, Matrix());
    W_.assign(d_, Matrix());
    E_.assign(d_, Matrix());
    for (int k = 0; k < d_; ++k) refresh(k);
  }

  void append_random(std::mt19937_64& rng) {
    const SepVector t = random_rank_one(shape_, rng());
    for (int k = 0; k < d_; ++k) {
      F_[k].conservativeResize(Eigen::NoChange, F_[k].cols() + 1);
      F_[k].col(F_[k].cols() - 1) = t.factor(k).col(0);
    }
    sf_.push_back(0.0);
  }

  void enrich(std::mt19937_64& rng) {
    append_random(rng);
    for (int k = 0; k < d_; ++k) refresh(k);
  }

  void refresh(int k) {
    if (A_) {
      U_[k] = kernels::apply_factors(ops_[k], F_[k], opts_.exec);
      W_[k] = kernels::gram(U_[k], opts_.exec);
      E_[k] = kernels::cross_gram(U_[k], G_.factor(k), opts_.exec);
    } else {
      W_[k] = kernels::gram(F_[k], opts_.exec);
      E_[k] = kernels::cross_gram(F_[k], G_.factor(k), opts_.exec);
    }
  }

  Objective objective() const {
    const Index rf = rank();
    const Index ra = op_rank();
    Vector w(ra * rf);
    for (Index a = 0; a < ra; ++a)
      for (Index j = 0; j < rf; ++j) w(a * rf + j) = sa_[a] * sf_[j];
    const Matrix whad = kernels::hadamard_except(W_, -1);
    const Matrix ehad = kernels::hadamard_except(E_, -1);
    Eigen::Map<const Vector> sg(sg_.data(), static_cast<Index>(sg_.size()));
    Objective o;
    o.af2 = w.dot(whad * w);
    const double afg = sg.size() > 0 ? w.dot(ehad * sg) : 0.0;
    o.residual2 = o.af2 - 2.0 * afg + g_norm2_;
    for (double s : sf_) o.reg += delta_ * s * s;
    return o;
  }

  void update(int k) {
    const Index rf = rank();
    const Index m = shape_[k];
    const Index rg = G_.rank();
    const Matrix C = kernels::hadamard_except(W_, k);
    const Matrix Ek = kernels::hadamard_except(E_, k);
    Matrix X(m, rf);
    Matrix x0 = F_[k];
    for (Index i = 0; i < rf; ++i) x0.col(i) *= sf_[i];

    if (!A_) {
      // X (C + delta I) = G_k diag(s_G) Ek^T
      Matrix rhs = Matrix::Zero(m, rf);
      if (rg > 0) {
        Eigen::Map<const Vector> sg(sg_.data(), rg);
        rhs.noalias() = G_.factor(k) * (sg.asDiagonal() * Ek.transpose());
      }
      Matrix lhs = C;
      lhs.diagonal().array() += delta_;
      X = solve_spd(lhs, Matrix(rhs.transpose()), Matrix(x0.transpose()), k).transpose();
    } else {
      const Index ra = op_rank();
      kernels::OperatorProducts local;
      const kernels::OperatorProducts* P = products_[k] ? &*products_[k] : nullptr;
      if (!P) {
        local = kernels::operator_products(ops_[k], opts_.exec);
        P = &local;
      }
      Matrix lhs = kernels::normal_matrix(*P, sa_, C, rf, opts_.exec);
      lhs.diagonal().array() += delta_;
      Matrix coef(ra * rg, rf);
      for (Index b = 0; b < ra; ++b)
        for (Index g = 0; g < rg; ++g)
          for (Index i = 0; i < rf; ++i)
            coef(b * rg + g, i) = sa_[b] * sg_[g] * Ek(b * rf + i, g);
      Matrix rhs = Matrix::Zero(m, rf);
      if (rg > 0) rhs.noalias() = Q_[k] * coef;
      const Matrix x = solve_spd(lhs, Eigen::Map<const Matrix>(rhs.data(), m * rf, 1),
                                 Eigen::Map<const Matrix>(x0.data(), m * rf, 1), k);
      X = Eigen::Map<const Matrix>(x.data(), m, rf);
    }

    for (Index i = 0; i < rf; ++i) {
      const double n = X.col(i).norm();
      if (n > 0.0 && std::isfinite(n)) {
        F_[k].col(i) = X.col(i) / n;
        sf_[i] = n;
      } else {
        sf_[i] = 0.0;
      }
    }
    refresh(k);
  }

  // Solves lhs x = rhs. If the factorization fails, falls back to proximal
  // steps (lhs + mu I) x = rhs + mu x0 with growing mu; each such step still
  // decreases the objective.
  Matrix solve_spd(const Matrix& lhs, const Matrix& rhs, const Matrix& x0, int k) const {
    Eigen::LLT<Matrix, Eigen::Lower> llt(lhs);
    if (llt.info() == Eigen::Success) {
      Matrix x = llt.solve(rhs);
      if (x.allFinite()) return x;
    }
    const double diag = std::max(lhs.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    for (double mu = 1e-12 * diag; mu <= 1e-2 * diag; mu *= 100.0) {
      Matrix shifted = lhs;
      shifted.diagonal().array() += mu;
      Eigen::LLT<Matrix, Eigen::Lower> prox(shifted);
      if (prox.info() != Eigen::Success) continue;
      Matrix x = prox.solve(rhs + mu * x0);
      if (x.allFinite()) return x;
    }
    std::ostringstream msg;
    msg << "ALS: singular normal equations in dimension " << k << " at rank " << rank()
        << " (regularization " << delta_ << ")";
    throw AlsError(msg.str());
  }

  SepVector current() const { return SepVector(sf_, F_); }

  const SepOperator* A_;
  const SepVector& G_;
  const AlsOptions& opts_;
  Shape shape_;
  int d_;
  std::vector<double> sa_;
  std::vector<double> sg_;
  double g_norm2_ = 0.0;
  double delta_ = 0.0;

  std::vector<std::vector<const Matrix*>> ops_;
  std::vector<std::vector<Matrix>> transposed_;
  std::vector<Matrix> Q_;
  std::vector<std::optional<kernels::OperatorProducts>> products_;

  std::vector<double> sf_;
  std::vector<Matrix> F_;
  std::vector<Matrix> U_;
  std::vector<Matrix> W_;
  std::vector<Matrix> E_;
};

}  // namespace

AlsResult als_reduce(const SepVector& G, const AlsOptions& opts, const SepVector* initial) {
  opts.validate();
  if (G.rank() < 1) throw std::invalid_argument("als_reduce: input has rank 0");
  return AlsEngine(nullptr, G, opts).run(initial);
}

AlsResult als_solve(const SepOperator& A, const SepVector& G, const AlsOptions& opts,
                    const SepVector* initial) {
  opts.validate();
  return AlsEngine(&A, G, opts).run(initial);
}

OperatorCompression compress_operator(const SepOperator& A, const AlsOptions& opts) {
  const SepVector v = vectorize(A);
  AlsResult r = als_reduce(v, opts);
  return {unvectorize(r.solution, A.shape()), std::move(r.report)};
}

ResidualValue residual(const SepOperator& A, const SepVector& F, const SepVector& G,
                       DenseCap dense_fallback) {
  if (A.shape() != F.shape() || F.shape() != G.shape())
    throw ShapeError("residual: shape mismatch");
  const int d = G.dims();
  const Index ra = A.rank();
  const Index rf = F.rank();
  std::vector<Matrix> W(d), E(d);
  for (int k = 0; k < d; ++k) {
    std::vector<const Matrix*> ops;
    for (Index a = 0; a < ra; ++a) ops.push_back(&A.factor(a, k));
    const Matrix U = kernels::apply_factors(ops, F.factor(k));
    W[k] = kernels::gram(U);
    E[k] = kernels::cross_gram(U, G.factor(k));
  }
  Vector w(ra * rf);
  for (Index a = 0; a < ra; ++a)
    for (Index j = 0; j < rf; ++j) w(a * rf + j) = A.scale(a) * F.scale(j);
  double af2 = 0.0, afg = 0.0;
  if (ra * rf > 0) {
    af2 = w.dot(kernels::hadamard_except(W, -1) * w);
    if (G.rank() > 0) {
      Eigen::Map<const Vector> sg(G.scales().data(), G.rank());
      afg = w.dot(kernels::hadamard_except(E, -1) * sg);
    }
  }
  const double g2 = std::max(0.0, inner(G, G));
  double r2 = std::max(0.0, af2 - 2.0 * afg + g2);
  ResidualValue out;
  out.absolute = g2 == 0.0;
  const double denom2 = out.absolute ? 1.0 : g2;
  if (r2 < kExpansionFloor * kExpansionFloor * denom2 &&
      num_points(G.shape()) <= dense_fallback.max_entries) {
    r2 = dense_residual_sq(&A, F, G);
  }
  out.value = std::sqrt(r2 / denom2);
  return out;
}

}  // namespace sephjb
