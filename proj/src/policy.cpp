#include "sephjb/policy.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "sephjb/finite_difference.hpp"

namespace sephjb {

PolicyField::PolicyField(const HjbProblem& problem, const DesirabilityField& field, int accuracy)
    : problem_(&problem), psi_(field.psi), epsilon_(field.epsilon) {
  if (psi_.shape() != problem.grid.shape()) throw ShapeError("policy: field does not match the grid");
  for (int k = 0; k < problem.dims(); ++k)
    grad_.push_back(apply(gradient_op(problem.grid, k, accuracy), psi_));
  if (!(epsilon_ > 0.0)) epsilon_ = std::max(1e-12 * max_grid_value(psi_), std::numeric_limits<double>::min());
  rinv_ = problem.control_cost.inverse();
}

Vector optimal_control(const PolicyField& pf, std::span<const double> x) {
  const HjbProblem& p = *pf.problem_;
  if (static_cast<int>(x.size()) != p.dims()) throw ShapeError("control: state has the wrong dimension");
  const double psi = evaluate(pf.psi_, x, p.grid);
  Vector grad(p.dims());
  for (int k = 0; k < p.dims(); ++k) grad(k) = evaluate(pf.grad_[k], x, p.grid);
  const Matrix G = p.control_at(x);
  return p.lambda * pf.rinv_ * (G.transpose() * grad) / std::max(psi, pf.epsilon_);
}

const char* to_string(ExitReason r) {
  switch (r) {
    case ExitReason::goal: return "goal";
    case ExitReason::domain_exit: return "domain-exit";
    case ExitReason::horizon: return "horizon";
  }
  return "unknown";
}

Trajectory simulate(const PolicyField& pf, std::span<const double> x0, const SimulationOptions& opts) {
  const HjbProblem& p = pf.problem();
  const Grid& grid = p.grid;
  if (!(opts.dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
  if (!(opts.t_max >= 0.0)) throw std::invalid_argument("simulate: t_max must be non-negative");
  if (static_cast<int>(x0.size()) != p.dims()) throw ShapeError("simulate: x0 has the wrong dimension");
  if (!grid.contains(x0)) throw DomainError("simulate: initial state outside the domain");

  const Eigen::LLT<Matrix> chol(p.noise_cov);
  const Matrix L = chol.matrixL();
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sqdt = std::sqrt(opts.dt);
  const int m = p.inputs();

  Trajectory tr;
  tr.dt = opts.dt;
  tr.seed = opts.seed;
  Vector x(p.dims());
  for (int i = 0; i < p.dims(); ++i) x(i) = grid.wrap(i, x0[i]);

  auto in_goal = [&](const Vector& s) {
    for (const RegionCondition& g : opts.goals)
      if (g.contains(std::span<const double>(s.data(), s.size()), grid)) return true;
    return false;
  };

  const long steps = static_cast<long>(std::floor(opts.t_max / opts.dt + 1e-9));
  double t = 0.0;
  for (long n = 0;; ++n) {
    const std::span<const double> xs(x.data(), x.size());
    if (in_goal(x)) {
      tr.reason = ExitReason::goal;
      tr.points.push_back({t, x, Vector::Zero(m), Vector::Zero(m)});
      break;
    }
    if (n >= steps) {
      tr.reason = ExitReason::horizon;
      tr.points.push_back({t, x, Vector::Zero(m), Vector::Zero(m)});
      break;
    }
    const Vector u = optimal_control(pf, xs);
    Vector xi(m);
    for (int c = 0; c < m; ++c) xi(c) = normal(rng);
    const Vector drift = p.drift_at(xs) + p.control_at(xs) * u;
    const Vector next = x + drift * opts.dt + p.noise_at(xs) * (L * xi) * sqdt;
    tr.points.push_back({t, x, u, xi});
    t = static_cast<double>(n + 1) * opts.dt;
    Vector wrapped(p.dims());
    for (int i = 0; i < p.dims(); ++i) wrapped(i) = grid.wrap(i, next(i));
    x = wrapped;
    if (!grid.contains(std::span<const double>(x.data(), x.size()))) {
      tr.reason = ExitReason::domain_exit;
      tr.points.push_back({t, x, Vector::Zero(m), Vector::Zero(m)});
      break;
    }
  }
  return tr;
}

Slice export_slice(const SepVector& psi, const Grid& grid, std::span<const double> fixed,
                   int dim_a, int dim_b, SliceQuantity quantity, double lambda, double epsilon) {
  const int d = grid.dims();
  if (psi.shape() != grid.shape()) throw ShapeError("slice: field does not match the grid");
  if (dim_a < 0 || dim_a >= d || dim_b < 0 || dim_b >= d || dim_a == dim_b)
    throw std::invalid_argument("slice: need two distinct free dimensions");
  if (static_cast<int>(fixed.size()) != d)
    throw std::invalid_argument("slice: need one fixed coordinate per dimension");
  Slice s;
  s.dim_a = dim_a;
  s.dim_b = dim_b;
  s.coords_a = grid.axis(dim_a).nodes();
  s.coords_b = grid.axis(dim_b).nodes();
  s.fixed_nodes.assign(d, 0);
  for (int i = 0; i < d; ++i) {
    if (i == dim_a || i == dim_b) continue;
    const Axis& a = grid.axis(i);
    double x = fixed[i];
    if (a.periodic) {
      x = grid.wrap(i, x);
    } else if (!(x >= a.lower && x <= a.upper)) {
      std::ostringstream msg;
      msg << "slice: coordinate " << fixed[i] << " outside axis '" << a.name << "'";
      throw DomainError(msg.str());
    }
    Index k = static_cast<Index>(std::llround((x - a.lower) / a.spacing()));
    if (a.periodic) k %= a.points;
    s.fixed_nodes[i] = std::clamp<Index>(k, 0, a.points - 1);
  }
  Vector w(psi.rank());
  for (Index l = 0; l < psi.rank(); ++l) {
    double t = psi.scale(l);
    for (int i = 0; i < d; ++i)
      if (i != dim_a && i != dim_b) t *= psi.factor(i)(s.fixed_nodes[i], l);
    w(l) = t;
  }
  s.values = psi.rank() == 0 ? Matrix::Zero(grid.axis(dim_a).points, grid.axis(dim_b).points)
                             : Matrix(psi.factor(dim_a) * w.asDiagonal() * psi.factor(dim_b).transpose());
  if (quantity == SliceQuantity::value) {
    const double floor = epsilon > 0.0 ? epsilon : std::numeric_limits<double>::min();
    s.values = s.values.unaryExpr([&](double v) { return -lambda * std::log(std::max(v, floor)); });
  }
  return s;
}

}  // namespace sephjb
