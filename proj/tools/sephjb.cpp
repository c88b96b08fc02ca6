// sephjb: command-line driver.
//
//   sephjb check    --config FILE
//   sephjb solve    --config FILE --out DIR
//   sephjb compress (--config FILE | --input FILE) --out FILE --tol T
//   sephjb slice    --config FILE --field FILE --dims a,b [--at name=value,...] --out FILE
//   sephjb simulate --config FILE --field FILE --x0 v,v,... --out FILE
//
// Exit codes: 0 success, 1 validation failure, 2 solver failure, 3 I/O error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sephjb/als.hpp"
#include "sephjb/config.hpp"
#include "sephjb/hjb.hpp"
#include "sephjb/kernels.hpp"
#include "sephjb/policy.hpp"
#include "sephjb/sr_io.hpp"

namespace fs = std::filesystem;
using namespace sephjb;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kSolverFailure = 2;
constexpr int kIoFailure = 3;

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  long points = 0;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<long> max_rank;
  std::optional<int> max_sweeps;
};

ProblemConfig load(const Common& c) {
  std::ifstream in(c.config);
  if (!in) throw IoError("cannot open " + c.config);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(c.config, e.what());
  }
  if (c.points > 0 && doc.contains("grid") && doc["grid"].is_array())
    for (auto& axis : doc["grid"]) axis["points"] = c.points;
  ProblemConfig cfg = parse_config(doc);
  AlsOptions& o = cfg.solve.als;
  if (c.seed) o.seed = *c.seed;
  if (c.tol) o.tolerance = *c.tol;
  if (c.max_rank) o.max_rank = *c.max_rank;
  if (c.max_sweeps) o.max_sweeps = *c.max_sweeps;
  o.initial_rank = std::min(o.initial_rank, o.max_rank);
  o.validate();
  return cfg;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

double parse_number(const std::string& s) {
  try {
    const Expr e = parse_expr(s);
    if (e.has_variable()) throw ValidationFailure("expected a number, got '" + s + "'");
    return e.eval(0.0);
  } catch (const ParseError&) {
    throw ValidationFailure("expected a number, got '" + s + "'");
  }
}

int axis_of(const Grid& grid, const std::string& name) {
  int i = grid.find(name);
  if (i < 0 && !name.empty() && name.find_first_not_of("0123456789") == std::string::npos) {
    i = std::stoi(name);
    if (i >= grid.dims()) i = -1;
  }
  if (i < 0) throw ValidationFailure("unknown axis '" + name + "'");
  return i;
}

SrFormat format_of(const std::string& s) {
  if (s == "binary") return SrFormat::binary;
  if (s == "text") return SrFormat::text;
  throw ValidationFailure("format must be 'binary' or 'text'");
}

SepVector load_field(const std::string& path, const Grid& grid) {
  SrContent c = read_sr(path);
  if (c.kind != SrKind::vector) throw ValidationFailure(path + " holds an operator, not a field");
  if (c.vector.shape() != grid.shape()) throw ValidationFailure(path + " does not match the config grid");
  return std::move(c.vector);
}

// ---- check -----------------------------------------------------------------

int cmd_check(const Common& c) {
  const ProblemConfig cfg = load(c);
  const HjbProblem& p = cfg.problem;
  bool ok = true;
  std::cout << "config: " << c.config << "\n";
  std::cout << "dimensions: " << p.dims() << ", inputs: " << p.inputs() << ", points:";
  for (Index m : p.grid.shape()) std::cout << " " << m;
  std::cout << "\n";

  const MatchingReport m = check_matching(p);
  std::cout << "matching: " << (m.pass ? "pass" : "FAIL") << " (max relative discrepancy "
            << m.max_discrepancy << " over " << m.samples << " points";
  if (!m.pass) {
    std::cout << ", worst at (";
    for (std::size_t i = 0; i < m.worst_point.size(); ++i) std::cout << (i ? ", " : "") << m.worst_point[i];
    std::cout << ")";
  }
  std::cout << ")\n";
  ok &= m.pass;

  const CostSignReport q = check_state_cost(p);
  std::cout << "state cost: " << (q.pass ? "pass" : "FAIL") << " (min " << q.min_value
            << (q.exhaustive ? "" : ", sampled") << ")";
  if (!q.pass) {
    std::cout << " negative at node (";
    for (std::size_t i = 0; i < q.node.size(); ++i) std::cout << (i ? ", " : "") << q.node[i];
    std::cout << ")";
  }
  std::cout << "\n";
  ok &= q.pass;

  if (!p.finite_horizon || !cfg.boundaries.empty()) {
    try {
      validate_boundary(cfg.boundaries, p.grid);
      std::cout << "boundaries: pass (" << cfg.boundaries.faces.size() << " faces, "
                << cfg.boundaries.regions.size() << " regions)\n";
    } catch (const BoundaryError& e) {
      std::cout << "boundaries: FAIL (" << e.what() << ")\n";
      ok = false;
    }
  }
  const OperatorBuild b = build_operator(p, cfg.solve.accuracy);
  std::cout << "operator rank: predicted " << b.ranks.predicted << ", constructed " << b.ranks.constructed
            << " (state cost " << b.ranks.state_cost << ", advection " << b.ranks.advection
            << ", diffusion " << b.ranks.diffusion << ")\n";
  std::cout << (ok ? "OK" : "FAILED") << "\n";
  return ok ? kOk : kInvalid;
}

// ---- solve -----------------------------------------------------------------

std::string ranks_text(const RankAccounting& r) {
  std::ostringstream o;
  o << "predicted " << r.predicted << "\n";
  o << "constructed " << r.constructed << "\n";
  o << "compressed " << (r.compressed ? std::to_string(*r.compressed) : std::string("none")) << "\n";
  o << "with_boundary " << r.with_boundary << "\n";
  o << "boundary_reference " << r.boundary_reference << "\n";
  o << "state_cost " << r.state_cost << "\n";
  o << "advection " << r.advection << "\n";
  o << "diffusion " << r.diffusion << "\n";
  return o.str();
}

void append_report(std::string& csv, const AlsReport& r, int& sweep_offset) {
  for (std::size_t s = 0; s < r.residuals.size(); ++s)
    csv += std::to_string(sweep_offset + static_cast<int>(s) + 1) + "," + fmt(r.residuals[s]) + "," +
           std::to_string(r.ranks[s]) + "," + fmt(r.wall_ms[s]) + "\n";
  sweep_offset += static_cast<int>(r.residuals.size());
}

int cmd_solve(const Common& c, const std::string& out_dir, const std::string& format, bool quiet) {
  ProblemConfig cfg = load(c);
  const SrFormat fmt_out = format_of(format);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  if (!quiet) {
    cfg.solve.als.on_sweep = [](const SweepInfo& s) {
      std::cerr << "sweep " << s.sweep << "  residual " << s.residual << "  rank " << s.rank
                << (s.enriched ? "  +1" : "") << "\n";
    };
  }
  std::string csv = "sweep,residual,rank,wall_ms\n";
  int offset = 0;
  const HjbProblem& p = cfg.problem;
  try {
    if (p.finite_horizon) {
      HorizonOptions h;
      h.solve = cfg.solve;
      h.carry_rank = cfg.carry_rank;
      const std::vector<DesirabilityField> fields = step_finite_horizon(p, cfg.boundaries, h);
      for (std::size_t k = 1; k < fields.size(); ++k) append_report(csv, fields[k].report, offset);
      const DesirabilityField& f0 = fields.back();
      write_sr(dir / "psi.sr", f0.psi, fmt_out);
      atomic_write(dir / "report.csv", csv);
      atomic_write(dir / "operator_ranks.txt", ranks_text(f0.ranks));
      std::cout << "steps " << fields.size() - 1 << ", final rank " << f0.psi.rank() << "\n";
      for (const auto& w : f0.warnings) std::cerr << "warning: " << w << "\n";
      return kOk;
    }
    const DesirabilityField f = solve_first_exit(p, cfg.boundaries, cfg.solve);
    append_report(csv, f.report, offset);
    write_sr(dir / "psi.sr", f.psi, fmt_out);
    atomic_write(dir / "report.csv", csv);
    atomic_write(dir / "operator_ranks.txt", ranks_text(f.ranks));
    for (const auto& w : f.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "operator rank " << f.ranks.constructed << " (predicted " << f.ranks.predicted
              << ", with boundary " << f.ranks.with_boundary << ")\n";
    std::cout << "termination " << to_string(f.report.termination) << ", residual "
              << f.report.final_residual() << ", rank " << f.psi.rank() << ", "
              << f.report.wall_seconds << " s\n";
    if (f.report.termination != Termination::converged)
      throw SolverFailure(std::string("solver stopped: ") + to_string(f.report.termination) +
                          " at residual " + fmt(f.report.final_residual()));
  } catch (const MatchingError& e) {
    throw ValidationFailure(e.what());
  }
  return kOk;
}

// ---- compress --------------------------------------------------------------

int cmd_compress(const Common& c, const std::string& input, const std::string& out,
                 const std::string& format) {
  AlsOptions o;
  o.tolerance = c.tol.value_or(1e-4);
  o.max_rank = c.max_rank.value_or(64);
  o.max_sweeps = c.max_sweeps.value_or(3000);
  o.seed = c.seed.value_or(1);
  SepOperator op;
  SepVector vec;
  bool is_vector = false;
  if (!c.config.empty()) {
    Common cc = c;
    cc.tol.reset();
    cc.max_rank.reset();
    cc.max_sweeps.reset();
    const ProblemConfig cfg = load(cc);
    const OperatorBuild b = build_operator(cfg.problem, cfg.solve.accuracy);
    std::cout << "operator rank: predicted " << b.ranks.predicted << ", constructed " << b.ranks.constructed
              << "\n";
    op = b.op;
  } else {
    SrContent s = read_sr(input);
    is_vector = s.kind == SrKind::vector;
    op = std::move(s.op);
    vec = std::move(s.vector);
  }
  // Keep the ridge term well below the requested accuracy.
  o.regularization = std::min(1e-10, 1e-2 * o.tolerance * o.tolerance);
  AlsReport report;
  if (is_vector) {
    std::cout << "input rank " << vec.rank() << "\n";
    AlsResult r = als_reduce(vec, o);
    report = r.report;
    if (!out.empty()) write_sr(out, r.solution, format_of(format));
    std::cout << "compressed rank " << r.solution.rank();
  } else {
    OperatorCompression r = compress_operator(op, o);
    report = r.report;
    if (!out.empty()) write_sr(out, r.op, format_of(format));
    std::cout << "compressed rank " << r.op.rank();
  }
  std::cout << ", relative error " << report.final_residual() << ", " << report.wall_seconds << " s, "
            << to_string(report.termination) << "\n";
  if (report.termination != Termination::converged)
    throw SolverFailure(std::string("compression stopped: ") + to_string(report.termination));
  return kOk;
}

// ---- slice -----------------------------------------------------------------

std::string slice_csv(const Slice& s) {
  std::string out = "x\\y";
  for (Index j = 0; j < s.coords_b.size(); ++j) out += "," + fmt(s.coords_b(j));
  out += "\n";
  for (Index i = 0; i < s.coords_a.size(); ++i) {
    out += fmt(s.coords_a(i));
    for (Index j = 0; j < s.coords_b.size(); ++j) out += "," + fmt(s.values(i, j));
    out += "\n";
  }
  return out;
}

// Width runs along the first free dimension; row 0 is the lowest coordinate
// of the second.
std::string slice_pgm(const Slice& s) {
  const Index w = s.values.rows();
  const Index h = s.values.cols();
  const double lo = s.values.minCoeff();
  const double hi = s.values.maxCoeff();
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (Index row = 0; row < h; ++row) {
    for (Index col = 0; col < w; ++col) {
      const double v = s.values(col, row);
      const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
    }
  }
  return out;
}

int cmd_slice(const Common& c, const std::string& field, const std::string& dims, const std::string& at,
              const std::string& format, const std::string& quantity, const std::string& out) {
  const ProblemConfig cfg = load(c);
  const Grid& grid = cfg.problem.grid;
  const SepVector psi = load_field(field, grid);
  const auto names = split(dims, ',');
  if (names.size() != 2) throw ValidationFailure("--dims needs exactly two axes");
  const int a = axis_of(grid, names[0]);
  const int b = axis_of(grid, names[1]);
  std::vector<double> fixed(grid.dims());
  for (int i = 0; i < grid.dims(); ++i) fixed[i] = 0.5 * (grid.axis(i).lower + grid.axis(i).upper);
  for (const std::string& kv : split(at, ',')) {
    if (kv.empty()) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationFailure("--at entries look like name=value");
    fixed[axis_of(grid, kv.substr(0, eq))] = parse_number(kv.substr(eq + 1));
  }
  SliceQuantity q;
  if (quantity == "psi") q = SliceQuantity::desirability;
  else if (quantity == "value") q = SliceQuantity::value;
  else throw ValidationFailure("--quantity must be 'psi' or 'value'");
  const Slice s = export_slice(psi, grid, fixed, a, b, q, cfg.problem.lambda, 1e-12 * max_grid_value(psi));
  if (format == "csv") atomic_write(out, slice_csv(s));
  else if (format == "pgm") atomic_write(out, slice_pgm(s));
  else throw ValidationFailure("--format must be 'csv' or 'pgm' for slices");
  std::cout << "wrote " << s.values.rows() << " x " << s.values.cols() << " slice to " << out << "\n";
  return kOk;
}

// ---- simulate --------------------------------------------------------------

int cmd_simulate(const Common& c, const std::string& field, const std::string& x0s, double dt, double t_max,
                 int seeds, const std::string& out) {
  const ProblemConfig cfg = load(c);
  const HjbProblem& p = cfg.problem;
  DesirabilityField f;
  f.psi = load_field(field, p.grid);
  f.lambda = p.lambda;
  f.epsilon = 1e-12 * max_grid_value(f.psi);
  const PolicyField pf(p, f, cfg.solve.accuracy);

  std::vector<double> x0;
  for (const std::string& v : split(x0s, ',')) x0.push_back(parse_number(v));
  if (static_cast<int>(x0.size()) != p.dims())
    throw ValidationFailure("--x0 needs " + std::to_string(p.dims()) + " values");

  SimulationOptions so;
  so.dt = dt;
  so.t_max = t_max;
  so.goals = cfg.boundaries.regions;
  const std::uint64_t base = c.seed.value_or(1);

  std::string csv = "seed,step,t";
  for (const Axis& a : p.grid.axes()) csv += "," + a.name;
  for (int k = 0; k < p.inputs(); ++k) csv += ",u" + std::to_string(k);
  csv += ",reason\n";
  std::map<std::string, int> tally;
  for (int s = 0; s < seeds; ++s) {
    so.seed = base + static_cast<std::uint64_t>(s);
    const Trajectory tr = simulate(pf, x0, so);
    for (std::size_t n = 0; n < tr.points.size(); ++n) {
      const TrajectoryPoint& pt = tr.points[n];
      csv += std::to_string(so.seed) + "," + std::to_string(n) + "," + fmt(pt.t);
      for (Index i = 0; i < pt.x.size(); ++i) csv += "," + fmt(pt.x(i));
      for (Index k = 0; k < pt.u.size(); ++k) csv += "," + fmt(pt.u(k));
      csv += "," + std::string(n + 1 == tr.points.size() ? to_string(tr.reason) : "") + "\n";
    }
    ++tally[to_string(tr.reason)];
  }
  atomic_write(out, csv);
  std::cout << "exit reasons:";
  for (const auto& [k, v] : tally) std::cout << " " << k << "=" << v;
  std::cout << "\n";
  return kOk;
}

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "problem file (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--points", c.points, "override the point count of every axis");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--tol", c.tol, "target relative residual");
  cmd->add_option("--max-rank", c.max_rank, "rank cap");
  cmd->add_option("--max-sweeps", c.max_sweeps, "sweep cap");
}

}  // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();
  CLI::App app{"Separated-representation solver for linearly solvable optimal control"};
  app.require_subcommand(1);

  Common c;
  std::string out, format = "binary", input, field, dims, at, quantity = "value", x0;
  bool quiet = false;
  double dt = 1e-3, t_max = 10.0;
  int seeds = 1;

  auto* check = app.add_subcommand("check", "validate a problem file");
  add_common(check, c, true);

  auto* solve = app.add_subcommand("solve", "solve for the desirability");
  add_common(solve, c, true);
  solve->add_option("--out", out, "output directory")->required();
  solve->add_option("--format", format, "psi.sr format: binary or text");
  solve->add_flag("--quiet", quiet, "no per-sweep progress");

  auto* compress = app.add_subcommand("compress", "compress an operator or a field");
  add_common(compress, c, false);
  compress->add_option("--input", input, "separated file to compress");
  compress->add_option("--out", out, "output file");
  compress->add_option("--format", format, "output format: binary or text");

  auto* slice = app.add_subcommand("slice", "export a 2D slice of a field");
  add_common(slice, c, true);
  slice->add_option("--field", field, "psi.sr")->required();
  slice->add_option("--dims", dims, "two free axes, e.g. x1,x2")->required();
  slice->add_option("--at", at, "fixed coordinates, e.g. x3=0,x4=1 (default: axis centers)");
  slice->add_option("--format", format, "csv or pgm");
  slice->add_option("--quantity", quantity, "psi or value");
  slice->add_option("--out", out, "output file")->required();

  auto* sim = app.add_subcommand("simulate", "closed-loop simulation");
  add_common(sim, c, true);
  sim->add_option("--field", field, "psi.sr")->required();
  sim->add_option("--x0", x0, "initial state, comma separated")->required();
  sim->add_option("--dt", dt, "time step");
  sim->add_option("--t-max", t_max, "time limit");
  sim->add_option("--seeds", seeds, "number of runs (seeds seed, seed+1, ...)");
  sim->add_option("--out", out, "trajectories.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*check) return cmd_check(c);
    if (*solve) return cmd_solve(c, out, format, quiet);
    if (*compress) {
      if (c.config.empty() == input.empty()) throw ValidationFailure("give exactly one of --config and --input");
      return cmd_compress(c, input, out, format);
    }
    if (*slice) {
      if (format == "binary") format = "csv";
      return cmd_slice(c, field, dims, at, format, quantity, out);
    }
    if (*sim) return cmd_simulate(c, field, x0, dt, t_max, seeds, out);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const SolverFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const AlsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::exception& e) {
    // Config, boundary, matching, domain and argument errors.
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kOk;
}
