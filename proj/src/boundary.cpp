#include "sephjb/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sephjb {

namespace {

using Box = std::vector<std::pair<Index, Index>>;

Vector indicator(Index m, Index lo, Index hi) {
  Vector v = Vector::Zero(m);
  v.segment(lo, hi - lo + 1).setOnes();
  return v;
}

Box full_box(const Grid& grid) {
  Box b;
  for (const Axis& a : grid.axes()) b.emplace_back(0, a.points - 1);
  return b;
}

Box face_box(const FaceCondition& f, const Grid& grid) {
  Box b = full_box(grid);
  const Index node = f.side == Side::lower ? 0 : grid.axis(f.dim).points - 1;
  b[f.dim] = {node, node};
  return b;
}

std::optional<Box> intersect(const Box& a, const Box& b) {
  Box out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Index lo = std::max(a[i].first, b[i].first);
    const Index hi = std::min(a[i].second, b[i].second);
    if (lo > hi) return std::nullopt;
    out.emplace_back(lo, hi);
  }
  return out;
}

std::vector<Vector> sampled(const SepTerm& t, const Grid& grid) {
  std::vector<Vector> out;
  for (int i = 0; i < grid.dims(); ++i) out.push_back(sample(t.factors[i], grid, i));
  return out;
}

/// Rank-one value restricted to `box`; zero when `value` is absent.
SepVector restricted(const std::optional<SepTerm>& value, const Box& box, const Grid& grid) {
  if (!value) return SepVector(grid.shape());
  std::vector<Vector> f = sampled(*value, grid);
  for (int i = 0; i < grid.dims(); ++i)
    f[i] = f[i].cwiseProduct(indicator(grid.axis(i).points, box[i].first, box[i].second));
  return SepVector::rank_one(value->coef, f);
}

std::vector<Vector> frame_masks(const BoundarySpec& bc, const Grid& grid) {
  std::vector<Vector> masks;
  for (const Axis& a : grid.axes()) masks.push_back(Vector::Ones(a.points));
  for (const FaceCondition& f : bc.faces) {
    const Index node = f.side == Side::lower ? 0 : grid.axis(f.dim).points - 1;
    masks[f.dim](node) = 0.0;
  }
  return masks;
}

SepOperator left_multiply(const std::vector<Vector>& diag, const SepOperator& A, double factor) {
  std::vector<double> scales;
  std::vector<std::vector<Matrix>> terms;
  for (Index l = 0; l < A.rank(); ++l) {
    std::vector<Matrix> t;
    for (int i = 0; i < A.dims(); ++i) t.push_back(diag[i].asDiagonal() * A.factor(l, i));
    terms.push_back(std::move(t));
    scales.push_back(factor * A.scale(l));
  }
  return SepOperator(A.shape(), std::move(scales), std::move(terms));
}

SepVector left_multiply(const std::vector<Vector>& diag, const SepVector& f) {
  std::vector<Matrix> factors;
  for (int i = 0; i < f.dims(); ++i) factors.push_back(diag[i].asDiagonal() * f.factor(i));
  return SepVector(std::vector<double>(f.scales().begin(), f.scales().end()), std::move(factors));
}

SepOperator diagonal(const std::vector<Vector>& diag, const Shape& shape, double s) {
  std::vector<Matrix> mats;
  for (const Vector& v : diag) mats.push_back(v.asDiagonal());
  return SepOperator(shape, {s}, {std::move(mats)});
}

std::vector<Vector> region_indicators(const RegionCondition& r, const Grid& grid) {
  std::vector<Vector> p;
  for (int i = 0; i < grid.dims(); ++i)
    p.push_back(indicator(grid.axis(i).points, r.nodes[i].first, r.nodes[i].second));
  return p;
}

SepVector drop_zero_terms(const SepVector& f) {
  std::vector<double> scales;
  std::vector<Matrix> factors(f.dims());
  std::vector<Index> keep;
  for (Index l = 0; l < f.rank(); ++l)
    if (f.scale(l) != 0.0) keep.push_back(l);
  for (int i = 0; i < f.dims(); ++i) {
    factors[i].resize(f.mode_size(i), static_cast<Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) factors[i].col(c) = f.factor(i).col(keep[c]);
  }
  for (Index l : keep) scales.push_back(f.scale(l));
  if (keep.empty()) return SepVector(f.shape());
  return SepVector(std::move(scales), std::move(factors));
}

std::string describe_face(const FaceCondition& f, const Grid& grid) {
  return "face " + grid.axis(f.dim).name + (f.side == Side::lower ? " (lower)" : " (upper)");
}

}  // namespace

RegionCondition RegionCondition::from_box(const Grid& grid,
                                          const std::vector<std::pair<double, double>>& box,
                                          SepTerm value) {
  if (static_cast<int>(box.size()) != grid.dims())
    throw BoundaryError("region: box needs one interval per dimension");
  RegionCondition r;
  for (int i = 0; i < grid.dims(); ++i) {
    const Axis& a = grid.axis(i);
    const double h = a.spacing();
    const double tol = 1e-9 * h;
    Index lo = static_cast<Index>(std::ceil((box[i].first - a.lower - tol) / h));
    Index hi = static_cast<Index>(std::floor((box[i].second - a.lower + tol) / h));
    lo = std::max<Index>(lo, 0);
    hi = std::min<Index>(hi, a.points - 1);
    if (lo > hi) {
      std::ostringstream msg;
      msg << "region: interval [" << box[i].first << ", " << box[i].second
          << "] contains no node of axis '" << a.name << "'";
      throw BoundaryError(msg.str());
    }
    r.nodes.emplace_back(lo, hi);
  }
  r.value = std::move(value);
  return r;
}

bool RegionCondition::contains(std::span<const double> x, const Grid& grid) const {
  for (int i = 0; i < grid.dims(); ++i) {
    const Axis& a = grid.axis(i);
    const double h = a.spacing();
    const double lo = a.node(nodes[i].first) - 0.5 * h;
    const double hi = a.node(nodes[i].second) + 0.5 * h;
    const double xi = grid.wrap(i, x[i]);
    if (xi < lo || xi > hi) return false;
  }
  return true;
}

void validate_boundary(const BoundarySpec& bc, const Grid& grid) {
  if (bc.empty()) throw BoundaryError("boundary: no boundary condition given");
  struct Cond {
    Box box;
    std::optional<SepTerm> value;
    std::string what;
  };
  std::vector<Cond> conds;
  for (const FaceCondition& f : bc.faces) {
    if (f.dim < 0 || f.dim >= grid.dims()) throw BoundaryError("boundary: face dimension out of range");
    if (grid.axis(f.dim).periodic)
      throw BoundaryError("boundary: " + describe_face(f, grid) + " lies on a periodic axis");
    if (f.value && static_cast<int>(f.value->factors.size()) != grid.dims())
      throw BoundaryError("boundary: " + describe_face(f, grid) + " value has the wrong number of factors");
    conds.push_back({face_box(f, grid), f.value, describe_face(f, grid)});
  }
  for (std::size_t k = 0; k < bc.regions.size(); ++k) {
    const RegionCondition& r = bc.regions[k];
    if (static_cast<int>(r.nodes.size()) != grid.dims())
      throw BoundaryError("boundary: region needs one index range per dimension");
    for (int i = 0; i < grid.dims(); ++i) {
      if (r.nodes[i].first < 0 || r.nodes[i].second >= grid.axis(i).points ||
          r.nodes[i].first > r.nodes[i].second)
        throw BoundaryError("boundary: region " + std::to_string(k) + " lies outside the grid");
    }
    if (static_cast<int>(r.value.factors.size()) != grid.dims())
      throw BoundaryError("boundary: region value has the wrong number of factors");
    conds.push_back({r.nodes, r.value, "region " + std::to_string(k)});
  }
  for (const Cond& c : conds) {
    // Values must be finite on their own nodes.
    if (c.value) {
      const SepVector v = restricted(c.value, c.box, grid);
      if (!std::isfinite(norm(v))) throw BoundaryError("boundary: " + c.what + " has non-finite values");
    }
  }
  for (std::size_t a = 0; a < conds.size(); ++a) {
    for (std::size_t b = a + 1; b < conds.size(); ++b) {
      const auto common = intersect(conds[a].box, conds[b].box);
      if (!common) continue;
      const SepVector va = restricted(conds[a].value, *common, grid);
      const SepVector vb = restricted(conds[b].value, *common, grid);
      const double diff = norm(add(va, scale(vb, -1.0)));
      const double ref = norm(restricted(conds[a].value, conds[a].box, grid)) +
                         norm(restricted(conds[b].value, conds[b].box, grid));
      if (diff > 1e-8 * ref + 1e-300 && diff > 1e-12) {
        std::ostringstream msg;
        msg << "boundary: " << conds[a].what << " and " << conds[b].what
            << " overlap with conflicting values (difference " << diff << ")";
        throw BoundaryError(msg.str());
      }
    }
  }
}

SepVector boundary_values(const BoundarySpec& bc, const Grid& grid) {
  SepVector rhs(grid.shape());
  // Outer faces: node sets are made disjoint by giving shared edges to the
  // face of the lowest dimension.
  const std::vector<Vector> masks = frame_masks(bc, grid);
  for (const FaceCondition& f : bc.faces) {
    if (!f.value) continue;
    std::vector<Vector> v = sampled(*f.value, grid);
    const Index node = f.side == Side::lower ? 0 : grid.axis(f.dim).points - 1;
    for (int j = 0; j < f.dim; ++j) v[j] = v[j].cwiseProduct(masks[j]);
    v[f.dim] = v[f.dim].cwiseProduct(indicator(grid.axis(f.dim).points, node, node));
    rhs = add(rhs, SepVector::rank_one(f.value->coef, v));
  }
  for (const RegionCondition& r : bc.regions) {
    const std::vector<Vector> p = region_indicators(r, grid);
    std::vector<Vector> v = sampled(r.value, grid);
    for (int i = 0; i < grid.dims(); ++i) v[i] = v[i].cwiseProduct(p[i]);
    rhs = add(add(rhs, scale(left_multiply(p, rhs), -1.0)), SepVector::rank_one(r.value.coef, v));
    rhs = drop_zero_terms(rhs);
  }
  return drop_zero_terms(rhs);
}

SepVector mask_constrained(const SepVector& f, const BoundarySpec& bc, const Grid& grid) {
  SepVector out = f;
  if (!bc.faces.empty()) out = left_multiply(frame_masks(bc, grid), out);
  for (const RegionCondition& r : bc.regions) {
    const std::vector<Vector> p = region_indicators(r, grid);
    out = drop_zero_terms(add(out, scale(left_multiply(p, out), -1.0)));
  }
  return drop_zero_terms(out);
}

BoundaryImposition impose_dirichlet(const SepOperator& A, const BoundarySpec& bc,
                                    const Grid& grid) {
  validate_boundary(bc, grid);
  if (A.shape() != grid.shape()) throw ShapeError("impose_dirichlet: operator does not match the grid");
  BoundaryImposition out;
  out.reference_rank = grid.dims() + 2 * A.rank();
  SepOperator op = A;
  if (!bc.faces.empty()) {
    const std::vector<Vector> masks = frame_masks(bc, grid);
    op = add(left_multiply(masks, op, 1.0), SepOperator::identity(grid.shape()));
    op = add(op, diagonal(masks, grid.shape(), -1.0));
    out.rank_history.push_back(op.rank());
  }
  for (const RegionCondition& r : bc.regions) {
    const std::vector<Vector> p = region_indicators(r, grid);
    op = add(add(op, left_multiply(p, op, -1.0)), diagonal(p, grid.shape(), 1.0));
    out.rank_history.push_back(op.rank());
  }
  out.op = std::move(op);
  out.rhs = boundary_values(bc, grid);
  return out;
}

}  // namespace sephjb
