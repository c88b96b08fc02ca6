#include "sephjb/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sephjb/finite_difference.hpp"

namespace sephjb {

namespace {

struct Slot {
  int dim;
  int column;
  const SepTerm* term;
};

std::vector<Slot> noise_slots(const HjbProblem& p) {
  std::vector<Slot> slots;
  for (int k = 0; k < p.dims(); ++k)
    for (int c = 0; c < p.inputs(); ++c)
      for (const SepTerm& t : p.noise[k][c].terms) slots.push_back({k, c, &t});
  return slots;
}

std::vector<std::vector<Vector>> sample_terms(const SepFunction& f, const Grid& grid) {
  std::vector<std::vector<Vector>> out;
  for (const SepTerm& t : f.terms) {
    std::vector<Vector> s;
    for (int i = 0; i < grid.dims(); ++i) s.push_back(sample(t.factors[i], grid, i));
    out.push_back(std::move(s));
  }
  return out;
}

double value_at_node(const SepVector& f, const std::vector<Index>& node) {
  double v = 0.0;
  for (Index l = 0; l < f.rank(); ++l) {
    double t = f.scale(l);
    for (int i = 0; i < f.dims(); ++i) t *= f.factor(i)(node[i], l);
    v += t;
  }
  return v;
}

double min_grid_value(const SepVector& psi, const Grid& grid) {
  if (num_points(psi.shape()) <= 1'000'000) return to_dense(psi).minCoeff();
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& node : quasi_random_nodes(grid, 4096)) lo = std::min(lo, value_at_node(psi, node));
  return lo;
}

void check_problem(const HjbProblem& p, bool ignore_matching) {
  p.validate();
  if (!ignore_matching) {
    MatchingReport m = check_matching(p);
    if (!m.pass) {
      std::ostringstream msg;
      msg << "matching condition fails: relative discrepancy " << m.max_discrepancy;
      throw MatchingError(msg.str(), std::move(m));
    }
  }
  const CostSignReport q = check_state_cost(p);
  if (!q.pass) {
    std::ostringstream msg;
    msg << "state cost is negative (" << q.min_value << ") at node (";
    for (std::size_t i = 0; i < q.node.size(); ++i) msg << (i ? ", " : "") << q.node[i];
    msg << ")";
    throw std::invalid_argument(msg.str());
  }
}

SepOperator prepare_operator(const HjbProblem& p, const SolveOptions& opts, RankAccounting& ranks) {
  OperatorBuild b = build_operator(p, opts.accuracy);
  ranks = b.ranks;
  if (opts.compress_tolerance) {
    AlsOptions c = opts.als;
    c.tolerance = *opts.compress_tolerance;
    c.max_rank = std::max<Index>(opts.compress_max_rank, 1);
    c.initial_rank = 1;
    c.max_sweeps = std::max(c.max_sweeps, 3000);
    c.on_sweep = nullptr;
    c.regularization = std::min(1e-10, 1e-2 * c.tolerance * c.tolerance);
    OperatorCompression oc = compress_operator(b.op, c);
    ranks.compressed = oc.op.rank();
    return oc.op;
  }
  return b.op;
}

double floor_for(const SepVector& psi) { return 1e-12 * max_grid_value(psi); }

void warn_negative(DesirabilityField& f, const Grid& grid, double tol) {
  const double lo = min_grid_value(f.psi, grid);
  const double hi = max_grid_value(f.psi);
  if (lo < -10.0 * tol * hi) {
    std::ostringstream msg;
    msg << "desirability has negative grid values (min " << lo << ")";
    f.warnings.push_back(msg.str());
  }
}

}  // namespace

OperatorBuild build_operator(const HjbProblem& p, int accuracy) {
  p.validate();
  const Grid& grid = p.grid;
  const int d = p.dims();
  const Shape shape = grid.shape();

  std::vector<Matrix> d1(d), d2(d);
  for (int i = 0; i < d; ++i) {
    d1[i] = d_matrix(grid, i, StencilSpec::for_axis(grid.axis(i), 1, accuracy));
    d2[i] = d_matrix(grid, i, StencilSpec::for_axis(grid.axis(i), 2, accuracy));
  }

  std::vector<double> scales;
  std::vector<std::vector<Matrix>> terms;
  RankAccounting ranks;

  // -(1/lambda) q
  const auto q = sample_terms(p.state_cost, grid);
  for (std::size_t l = 0; l < q.size(); ++l) {
    std::vector<Matrix> t;
    for (int i = 0; i < d; ++i) t.push_back(q[l][i].asDiagonal());
    terms.push_back(std::move(t));
    scales.push_back(-p.state_cost.terms[l].coef / p.lambda);
  }

  // f_i d_i
  for (int i = 0; i < d; ++i) {
    const auto f = sample_terms(p.drift[i], grid);
    for (std::size_t l = 0; l < f.size(); ++l) {
      std::vector<Matrix> t;
      for (int j = 0; j < d; ++j) {
        if (j == i) t.push_back(f[l][j].asDiagonal() * d1[j]);
        else t.push_back(f[l][j].asDiagonal());
      }
      terms.push_back(std::move(t));
      scales.push_back(p.drift[i].terms[l].coef);
    }
  }

  // 1/2 sum over noise-term pairs: Sigma_eps[c, c'] b_s b_t d_k d_j. The pair
  // (s, t) and its mirror give the same term, so only s <= t is emitted.
  const std::vector<Slot> slots = noise_slots(p);
  std::vector<std::vector<Vector>> slot_samples;
  for (const Slot& s : slots) {
    std::vector<Vector> v;
    for (int i = 0; i < d; ++i) v.push_back(sample(s.term->factors[i], grid, i));
    slot_samples.push_back(std::move(v));
  }
  for (std::size_t s = 0; s < slots.size(); ++s) {
    for (std::size_t t = s; t < slots.size(); ++t) {
      const double sig = p.noise_cov(slots[s].column, slots[t].column);
      if (sig == 0.0) continue;
      const double weight = (s == t ? 0.5 : 1.0) * sig * slots[s].term->coef * slots[t].term->coef;
      const int k = slots[s].dim;
      const int j = slots[t].dim;
      std::vector<Matrix> f;
      for (int i = 0; i < d; ++i) {
        const Vector c = slot_samples[s][i].cwiseProduct(slot_samples[t][i]);
        if (k == j && i == k) f.push_back(c.asDiagonal() * d2[i]);
        else if (i == k || i == j) f.push_back(c.asDiagonal() * d1[i]);
        else f.push_back(c.asDiagonal());
      }
      terms.push_back(std::move(f));
      scales.push_back(weight);
    }
  }

  ranks.state_cost = p.state_cost.rank();
  for (int i = 0; i < d; ++i) ranks.advection += p.drift[i].rank();
  for (std::size_t s = 0; s < slots.size(); ++s)
    for (std::size_t t = s; t < slots.size(); ++t)
      if (p.noise_cov(slots[s].column, slots[t].column) != 0.0) ++ranks.diffusion;
  ranks.predicted = ranks.state_cost + ranks.advection + ranks.diffusion;

  OperatorBuild out{SepOperator(shape, std::move(scales), std::move(terms)), ranks};
  out.ranks.constructed = out.op.rank();
  return out;
}

DesirabilityField solve_first_exit(const HjbProblem& p, const BoundarySpec& bc,
                                   const SolveOptions& opts) {
  if (p.finite_horizon) throw std::invalid_argument("solve_first_exit: problem is finite-horizon");
  check_problem(p, opts.ignore_matching);
  DesirabilityField field;
  const SepOperator A = prepare_operator(p, opts, field.ranks);
  const BoundaryImposition bi = impose_dirichlet(A, bc, p.grid);
  field.ranks.with_boundary = bi.op.rank();
  field.ranks.boundary_reference = bi.reference_rank;
  if (bi.rhs.rank() == 0) {
    // Only absorbing data: the solution is exactly zero.
    field.psi = SepVector(p.grid.shape());
    field.warnings.push_back("all boundary values are zero; desirability vanishes");
    field.lambda = p.lambda;
    return field;
  }
  AlsResult r = als_solve(bi.op, bi.rhs, opts.als);
  field.psi = std::move(r.solution);
  field.report = std::move(r.report);
  field.lambda = p.lambda;
  field.epsilon = floor_for(field.psi);
  warn_negative(field, p.grid, opts.als.tolerance);
  return field;
}

SepVector terminal_desirability(const HjbProblem& p) {
  const Grid& grid = p.grid;
  if (p.horizon.terminal_psi) return p.horizon.terminal_psi->sample(grid);
  double scale = 1.0;
  std::vector<Vector> exponent;
  for (int i = 0; i < grid.dims(); ++i) exponent.push_back(Vector::Zero(grid.axis(i).points));
  for (const SepTerm& t : p.horizon.terminal_cost.terms) {
    int dim = -1;
    if (!t.is_univariate(&dim))
      throw std::invalid_argument("terminal cost: every term must depend on at most one dimension");
    double c = t.coef;
    for (int i = 0; i < grid.dims(); ++i) {
      double v = 1.0;
      if (i != dim && t.factors[i].is_constant(&v)) c *= v;
    }
    if (dim < 0) {
      scale *= std::exp(-c / p.lambda);
    } else {
      exponent[dim] += c * sample(t.factors[dim], grid, dim);
    }
  }
  std::vector<Vector> factors;
  for (int i = 0; i < grid.dims(); ++i)
    factors.push_back((-exponent[i].array() / p.lambda).exp().matrix());
  return SepVector::rank_one(scale, factors);
}

std::vector<DesirabilityField> step_finite_horizon(const HjbProblem& p, const BoundarySpec& bc,
                                                   const HorizonOptions& opts) {
  if (!p.finite_horizon) throw std::invalid_argument("step_finite_horizon: problem is first-exit");
  if (!(p.horizon.dt > 0.0)) throw std::invalid_argument("step_finite_horizon: dt must be positive");
  check_problem(p, opts.solve.ignore_matching);
  const Grid& grid = p.grid;
  const int steps = std::max(1, static_cast<int>(std::ceil(p.horizon.horizon / p.horizon.dt - 1e-9)));
  const double dt = p.horizon.horizon / steps;

  RankAccounting ranks;
  const SepOperator A = prepare_operator(p, opts.solve, ranks);
  SepOperator step_op = add(SepOperator::identity(grid.shape()), scale(A, -dt));
  SepVector bvals(grid.shape());
  if (!bc.empty()) {
    BoundaryImposition bi = impose_dirichlet(step_op, bc, grid);
    step_op = std::move(bi.op);
    bvals = std::move(bi.rhs);
    ranks.boundary_reference = bi.reference_rank;
  }
  ranks.with_boundary = step_op.rank();

  std::vector<DesirabilityField> out;
  DesirabilityField last;
  last.psi = terminal_desirability(p);
  last.lambda = p.lambda;
  last.time = p.horizon.horizon;
  last.epsilon = floor_for(last.psi);
  last.ranks = ranks;
  out.push_back(last);

  for (int n = steps - 1; n >= 0; --n) {
    const SepVector& prev = out.back().psi;
    SepVector rhs = bc.empty() ? prev : add(mask_constrained(prev, bc, grid), bvals);
    DesirabilityField f;
    f.lambda = p.lambda;
    f.time = dt * n;
    f.ranks = ranks;
    AlsResult r = als_solve(step_op, rhs, opts.solve.als, prev.rank() > 0 ? &prev : nullptr);
    f.report = std::move(r.report);
    f.psi = std::move(r.solution);
    if (f.psi.rank() > opts.carry_rank) {
      AlsOptions red = opts.solve.als;
      red.max_rank = opts.carry_rank;
      red.initial_rank = 1;
      red.tolerance = opts.carry_tolerance;
      red.on_sweep = nullptr;
      f.psi = als_reduce(f.psi, red).solution;
    }
    f.epsilon = floor_for(f.psi);
    warn_negative(f, grid, opts.solve.als.tolerance);
    out.push_back(std::move(f));
  }
  return out;
}

double max_grid_value(const SepVector& psi) {
  if (psi.rank() == 0) return 0.0;
  if (num_points(psi.shape()) <= 1'000'000) return to_dense(psi).maxCoeff();
  double bound = 0.0;
  for (Index l = 0; l < psi.rank(); ++l) {
    double t = psi.scale(l);
    for (int i = 0; i < psi.dims(); ++i) t *= psi.factor(i).col(l).cwiseAbs().maxCoeff();
    bound += t;
  }
  return bound;
}

ValueFunction::ValueFunction(const DesirabilityField& field, const Grid& grid)
    : psi_(&field.psi), grid_(&grid), lambda_(field.lambda), epsilon_(field.epsilon) {
  if (field.psi.shape() != grid.shape()) throw ShapeError("value function: field does not match the grid");
  if (!(epsilon_ > 0.0)) epsilon_ = std::numeric_limits<double>::min();
}

double ValueFunction::desirability(std::span<const double> x) const {
  return evaluate(*psi_, x, *grid_);
}

double ValueFunction::operator()(std::span<const double> x) const {
  return -lambda_ * std::log(std::max(desirability(x), epsilon_));
}

ValueFunction desirability_to_value(const DesirabilityField& field, const Grid& grid) {
  return ValueFunction(field, grid);
}

}  // namespace sephjb
