#include "sephjb/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sephjb {

SepTerm SepTerm::constant(int dims, double value) {
  SepTerm t;
  t.coef = value;
  t.factors.assign(dims, Expr());
  return t;
}

double SepTerm::eval(std::span<const double> x) const {
  double v = coef;
  for (std::size_t i = 0; i < factors.size(); ++i) v *= factors[i].eval(x[i]);
  return v;
}

SepVector SepTerm::sample(const Grid& grid) const {
  if (static_cast<int>(factors.size()) != grid.dims())
    throw ShapeError("term has " + std::to_string(factors.size()) + " factors for a " +
                     std::to_string(grid.dims()) + "-dimensional grid");
  std::vector<Vector> vs;
  for (int i = 0; i < grid.dims(); ++i) vs.push_back(sephjb::sample(factors[i], grid, i));
  return SepVector::rank_one(coef, vs);
}

bool SepTerm::is_univariate(int* dim) const {
  int found = -1;
  for (int i = 0; i < static_cast<int>(factors.size()); ++i) {
    if (factors[i].is_constant()) continue;
    if (found >= 0) return false;
    found = i;
  }
  if (dim) *dim = found;
  return true;
}

double SepFunction::eval(std::span<const double> x) const {
  double v = 0.0;
  for (const SepTerm& t : terms) v += t.eval(x);
  return v;
}

SepVector SepFunction::sample(const Grid& grid) const {
  SepVector out(grid.shape());
  for (const SepTerm& t : terms) out = add(out, t.sample(grid));
  return out;
}

namespace {

bool is_spd(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

Matrix eval_matrix(const std::vector<std::vector<SepFunction>>& m, std::span<const double> x,
                   int cols) {
  Matrix out = Matrix::Zero(static_cast<Index>(m.size()), cols);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (int c = 0; c < cols; ++c) out(i, c) = m[i][c].eval(x);
  return out;
}

double radical_inverse(int base, std::uint64_t k) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (k > 0) {
    r += f * static_cast<double>(k % base);
    k /= base;
    f *= inv;
  }
  return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                           59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113};

}  // namespace

void HjbProblem::validate() const {
  const int d = dims();
  const int m = inputs();
  if (!(lambda > 0.0)) throw std::invalid_argument("problem: lambda must be positive");
  if (static_cast<int>(drift.size()) != d)
    throw std::invalid_argument("problem: dynamics needs one entry per state dimension");
  if (static_cast<int>(control.size()) != d || static_cast<int>(noise.size()) != d)
    throw std::invalid_argument("problem: control and noise need one row per state dimension");
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(control[i].size()) != m || static_cast<int>(noise[i].size()) != m)
      throw std::invalid_argument("problem: control/noise row " + std::to_string(i) +
                                  " must have " + std::to_string(m) + " columns");
  }
  if (!is_spd(control_cost)) throw std::invalid_argument("problem: R must be symmetric positive definite");
  if (noise_cov.rows() != m || !is_spd(noise_cov))
    throw std::invalid_argument("problem: noise covariance must be an m x m SPD matrix");
  auto check_fn = [d](const SepFunction& f, const std::string& what) {
    for (const SepTerm& t : f.terms)
      if (static_cast<int>(t.factors.size()) != d)
        throw std::invalid_argument(what + ": every term needs exactly " + std::to_string(d) +
                                    " factors");
  };
  for (int i = 0; i < d; ++i) {
    check_fn(drift[i], "dynamics");
    for (int c = 0; c < m; ++c) {
      check_fn(control[i][c], "control");
      check_fn(noise[i][c], "noise");
    }
  }
  check_fn(state_cost, "state cost");
  if (finite_horizon) {
    if (!(horizon.dt > 0.0)) throw std::invalid_argument("problem: time step must be positive");
    if (!(horizon.horizon > 0.0)) throw std::invalid_argument("problem: horizon must be positive");
    check_fn(horizon.terminal_cost, "terminal cost");
    if (horizon.terminal_psi) check_fn(*horizon.terminal_psi, "terminal desirability");
  }
}

Vector HjbProblem::drift_at(std::span<const double> x) const {
  Vector f(dims());
  for (int i = 0; i < dims(); ++i) f(i) = drift[i].eval(x);
  return f;
}

Matrix HjbProblem::control_at(std::span<const double> x) const {
  return eval_matrix(control, x, inputs());
}

Matrix HjbProblem::noise_at(std::span<const double> x) const {
  return eval_matrix(noise, x, inputs());
}

std::vector<std::vector<Index>> quasi_random_nodes(const Grid& grid, int count) {
  std::vector<std::vector<Index>> out;
  for (int k = 0; k < count; ++k) {
    std::vector<Index> node(grid.dims());
    for (int i = 0; i < grid.dims(); ++i) {
      const double u = radical_inverse(kPrimes[i % 30], static_cast<std::uint64_t>(k) + 1);
      node[i] = std::min<Index>(grid.axis(i).points - 1,
                                static_cast<Index>(u * static_cast<double>(grid.axis(i).points)));
    }
    out.push_back(std::move(node));
  }
  return out;
}

MatchingReport check_matching(const HjbProblem& p, int sample_count) {
  MatchingReport rep;
  const Matrix rinv = p.control_cost.inverse();
  for (const auto& node : quasi_random_nodes(p.grid, sample_count)) {
    std::vector<double> x(p.dims());
    for (int i = 0; i < p.dims(); ++i) x[i] = p.grid.axis(i).node(node[i]);
    const Matrix G = p.control_at(x);
    const Matrix B = p.noise_at(x);
    const Matrix lhs = p.lambda * G * rinv * G.transpose();
    const Matrix rhs = B * p.noise_cov * B.transpose();
    const double scale = std::max(lhs.norm(), rhs.norm());
    const double disc = scale > 0.0 ? (lhs - rhs).norm() / scale : 0.0;
    if (disc > rep.max_discrepancy || rep.worst_point.empty()) {
      if (disc >= rep.max_discrepancy) {
        rep.max_discrepancy = disc;
        rep.worst_point = x;
      }
    }
    ++rep.samples;
  }
  rep.pass = rep.max_discrepancy <= MatchingReport::kThreshold;
  return rep;
}

CostSignReport check_state_cost(const HjbProblem& p) {
  CostSignReport rep;
  const Grid& grid = p.grid;
  std::vector<std::vector<Vector>> samples;
  double lower = 0.0;
  for (const SepTerm& t : p.state_cost.terms) {
    std::vector<Vector> s;
    double lo = t.coef, hi = t.coef;
    for (int i = 0; i < grid.dims(); ++i) {
      s.push_back(sample(t.factors[i], grid, i));
      const double a = s.back().minCoeff(), b = s.back().maxCoeff();
      const double c[4] = {lo * a, lo * b, hi * a, hi * b};
      lo = *std::min_element(c, c + 4);
      hi = *std::max_element(c, c + 4);
    }
    lower += lo;
    samples.push_back(std::move(s));
  }
  rep.min_value = lower;
  if (lower >= 0.0) {
    rep.exhaustive = true;
    return rep;
  }
  auto value_at = [&](const std::vector<Index>& node) {
    double v = 0.0;
    for (std::size_t l = 0; l < samples.size(); ++l) {
      double term = p.state_cost.terms[l].coef;
      for (int i = 0; i < grid.dims(); ++i) term *= samples[l][i](node[i]);
      v += term;
    }
    return v;
  };
  rep.min_value = std::numeric_limits<double>::infinity();
  auto visit = [&](const std::vector<Index>& node) {
    const double v = value_at(node);
    if (v < rep.min_value) {
      rep.min_value = v;
      if (v < 0.0) {
        rep.node = node;
        rep.point.clear();
        for (int i = 0; i < grid.dims(); ++i) rep.point.push_back(grid.axis(i).node(node[i]));
      }
    }
  };
  const Index n = num_points(grid.shape());
  if (n <= 1'000'000) {
    rep.exhaustive = true;
    std::vector<Index> node(grid.dims());
    for (Index flat = 0; flat < n; ++flat) {
      Index rest = flat;
      for (int i = 0; i < grid.dims(); ++i) {
        node[i] = rest % grid.axis(i).points;
        rest /= grid.axis(i).points;
      }
      visit(node);
    }
  } else {
    for (const auto& node : quasi_random_nodes(grid, 4096)) visit(node);
  }
  rep.pass = rep.min_value >= 0.0;
  return rep;
}

}  // namespace sephjb
