#pragma once

// Alternating least squares in separated form.
//
// Both entry points minimize, over SepVectors F of a given rank,
//
//     J(F) = ||A F - G||^2 + delta * sum_l s_l^2
//
// one dimension at a time. With every factor except dimension k fixed, J is
// a quadratic in the unnormalized dimension-k factors x_l = s_l F_k^l, and the
// block update solves its normal equations exactly. When a sweep improves the
// relative residual by less than the stagnation threshold, a random rank-one
// term (with zero weight) is appended and the sweeps continue.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sephjb/kernels.hpp"
#include "sephjb/sep_tensor.hpp"

namespace sephjb {

class AlsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Termination { converged, rank_capped, sweep_capped };

const char* to_string(Termination t);

struct SweepInfo {
  int sweep = 0;
  double residual = 0.0;
  Index rank = 0;
  double wall_ms = 0.0;
  bool enriched = false;
};

struct AlsOptions {
  double tolerance = 1e-6;         // target relative residual
  Index max_rank = 20;
  int max_sweeps = 200;
  double stagnation = 1e-3;        // minimum relative improvement per sweep
  std::optional<double> regularization;  // default 1e-10 * ||A||_F^2 / N
  std::uint64_t seed = 1;
  Index initial_rank = 1;
  /// Evaluate J after every block update and count increases.
  bool check_monotone = false;
  kernels::Exec exec = kernels::Exec::parallel;
  /// Cache (A_k^b)^T A_k^a for every dimension when it fits in this many bytes.
  std::size_t product_cache_bytes = std::size_t{2} << 30;
  std::function<void(const SweepInfo&)> on_sweep;

  /// Throws std::invalid_argument if a field is out of range.
  void validate() const;
};

struct AlsReport {
  std::vector<double> residuals;  // relative residual after each sweep
  std::vector<Index> ranks;       // rank during each sweep
  std::vector<double> wall_ms;    // elapsed time at the end of each sweep
  std::vector<int> enrichment_sweeps;  // sweeps after which a term was added
  double initial_residual = 1.0;
  double wall_seconds = 0.0;
  Termination termination = Termination::sweep_capped;
  bool absolute_residual = false;  // ||G|| == 0: residuals are absolute
  double regularization = 0.0;
  int block_updates = 0;
  int monotonicity_violations = 0;
  double worst_violation = 0.0;    // largest relative increase of J seen

  double final_residual() const {
    return residuals.empty() ? initial_residual : residuals.back();
  }
};

struct AlsResult {
  SepVector solution;
  AlsReport report;
};

/// min ||F - G||, exploiting the identity operator (the normal matrix is
/// the r_F x r_F Hadamard product of factor Gram matrices).
AlsResult als_reduce(const SepVector& G, const AlsOptions& opts,
                     const SepVector* initial = nullptr);

/// min ||A F - G||.
AlsResult als_solve(const SepOperator& A, const SepVector& G,
                    const AlsOptions& opts, const SepVector* initial = nullptr);

/// Compresses an operator through its vectorized factors.
struct OperatorCompression {
  SepOperator op;
  AlsReport report;
};
OperatorCompression compress_operator(const SepOperator& A, const AlsOptions& opts);

struct ResidualValue {
  double value = 0.0;
  bool absolute = false;  // true when ||G|| == 0
};

/// ||A F - G|| / ||G|| from the inner-product expansion. When the expansion
/// loses its significant digits (relative value below 1e-6) and the grid is
/// small enough, the value is recomputed from dense mode products.
ResidualValue residual(const SepOperator& A, const SepVector& F, const SepVector& G,
                       DenseCap dense_fallback = {});

}  // namespace sephjb
