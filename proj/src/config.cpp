#include "sephjb/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace sephjb {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) { throw ConfigError(where, msg); }

const json& need(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) fail(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing key '") + key + "'");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    // Constant expressions such as "-pi" or "2*pi/3".
    try {
      const Expr e = parse_expr(v.get<std::string>());
      if (e.has_variable()) fail(where, "constant expected, found an expression in x");
      const double x = e.eval(0.0);
      if (!std::isfinite(x)) fail(where, "value is not finite");
      return x;
    } catch (const ParseError& e) {
      fail(where, std::string(e.what()) + " at offset " + std::to_string(e.offset()));
    }
  }
  fail(where, "expected a number");
}

long integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<long>();
}

bool boolean(const json& v, const std::string& where) {
  if (!v.is_boolean()) fail(where, "expected true or false");
  return v.get<bool>();
}

std::string string(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where, "expected a string");
  return v.get<std::string>();
}

Expr expression(const json& v, const std::string& where) {
  if (v.is_number()) return Expr::number(v.get<double>());
  const std::string text = string(v, where);
  try {
    return parse_expr(text);
  } catch (const ParseError& e) {
    fail(where, std::string(e.what()) + " at offset " + std::to_string(e.offset()) + " in '" +
                    text + "'");
  }
}

int axis_index(const json& key, const Grid& grid, const std::string& where) {
  if (key.is_number_integer()) {
    const long i = key.get<long>();
    if (i < 0 || i >= grid.dims()) fail(where, "axis index out of range");
    return static_cast<int>(i);
  }
  const std::string name = string(key, where);
  const int i = grid.find(name);
  if (i >= 0) return i;
  // Numeric strings address axes by position.
  if (!name.empty() && name.find_first_not_of("0123456789") == std::string::npos) {
    const long k = std::stol(name);
    if (k >= 0 && k < grid.dims()) return static_cast<int>(k);
  }
  fail(where, "unknown axis '" + name + "'");
}

void check_samples(const SepTerm& t, const Grid& grid, const std::string& where) {
  for (int i = 0; i < grid.dims(); ++i) {
    try {
      (void)sample(t.factors[i], grid, i);
    } catch (const EvalError& e) {
      std::ostringstream msg;
      msg << "factor for axis '" << grid.axis(i).name << "' is not finite at node " << e.node()
          << " (x = " << e.coordinate() << ")";
      fail(where, msg.str());
    }
  }
}

SepTerm term(const json& v, const Grid& grid, const std::string& where) {
  const int d = grid.dims();
  SepTerm t = SepTerm::constant(d, 1.0);
  if (v.is_number()) {
    t.coef = v.get<double>();
  } else if (v.is_array()) {
    if (static_cast<int>(v.size()) != d)
      fail(where, "term needs " + std::to_string(d) + " factors, got " + std::to_string(v.size()));
    for (int i = 0; i < d; ++i) t.factors[i] = expression(v[i], where + "[" + std::to_string(i) + "]");
  } else if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (it.key() != "coef" && it.key() != "factors") fail(where, "unknown key '" + it.key() + "'");
    }
    if (v.contains("coef")) t.coef = number(v["coef"], where + ".coef");
    if (v.contains("factors")) {
      const json& f = v["factors"];
      if (f.is_array()) {
        if (static_cast<int>(f.size()) != d)
          fail(where + ".factors", "needs " + std::to_string(d) + " entries");
        for (int i = 0; i < d; ++i)
          t.factors[i] = expression(f[i], where + ".factors[" + std::to_string(i) + "]");
      } else if (f.is_object()) {
        for (auto it = f.begin(); it != f.end(); ++it) {
          const int i = axis_index(json(it.key()), grid, where + ".factors");
          t.factors[i] = expression(it.value(), where + ".factors." + it.key());
        }
      } else {
        fail(where + ".factors", "expected a list or an object");
      }
    }
  } else {
    fail(where, "expected a term (list of expressions, object or number)");
  }
  check_samples(t, grid, where);
  return t;
}

SepFunction function(const json& v, const Grid& grid, const std::string& where) {
  SepFunction f;
  if (v.is_number() || v.is_object()) {
    f.terms.push_back(term(v, grid, where));
    return f;
  }
  if (!v.is_array()) fail(where, "expected a list of terms");
  for (std::size_t k = 0; k < v.size(); ++k) f.terms.push_back(term(v[k], grid, where + "[" + std::to_string(k) + "]"));
  return f;
}

Matrix matrix(const json& v, const std::string& where) {
  if (v.is_number()) return Matrix::Constant(1, 1, v.get<double>());
  if (!v.is_array() || v.empty()) fail(where, "expected a non-empty matrix");
  const Index rows = static_cast<Index>(v.size());
  if (!v[0].is_array()) {
    // A flat list is read as a diagonal.
    Matrix m = Matrix::Zero(rows, rows);
    for (Index i = 0; i < rows; ++i) m(i, i) = number(v[i], where + "[" + std::to_string(i) + "]");
    return m;
  }
  const Index cols = static_cast<Index>(v[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!v[i].is_array() || static_cast<Index>(v[i].size()) != cols) fail(where, "ragged matrix");
    for (Index j = 0; j < cols; ++j)
      m(i, j) = number(v[i][j], where + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
  }
  return m;
}

std::vector<std::vector<SepFunction>> input_matrix(const json& v, const Grid& grid, int inputs,
                                                   const std::string& where) {
  if (!v.is_array() || static_cast<int>(v.size()) != grid.dims())
    fail(where, "needs one row per state dimension");
  std::vector<std::vector<SepFunction>> out(grid.dims());
  for (int i = 0; i < grid.dims(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || static_cast<int>(v[i].size()) != inputs)
      fail(w, "needs " + std::to_string(inputs) + " columns");
    for (int c = 0; c < inputs; ++c) out[i].push_back(function(v[i][c], grid, w + "[" + std::to_string(c) + "]"));
  }
  return out;
}

Grid parse_grid(const json& v) {
  if (!v.is_array() || v.empty()) fail("grid", "expected a list of axes");
  std::vector<Axis> axes;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string w = "grid[" + std::to_string(i) + "]";
    const json& a = v[i];
    Axis ax;
    if (a.contains("name")) ax.name = string(a["name"], w + ".name");
    ax.points = integer(need(a, "points", w), w + ".points");
    ax.lower = number(need(a, "lower", w), w + ".lower");
    ax.upper = number(need(a, "upper", w), w + ".upper");
    if (a.contains("periodic")) ax.periodic = boolean(a["periodic"], w + ".periodic");
    axes.push_back(std::move(ax));
  }
  try {
    return Grid(std::move(axes));
  } catch (const std::invalid_argument& e) {
    fail("grid", e.what());
  }
}

Side parse_side(const std::string& s, const std::string& where) {
  if (s == "lower") return Side::lower;
  if (s == "upper") return Side::upper;
  fail(where, "side must be 'lower', 'upper' or 'both'");
}

std::optional<SepTerm> face_value(const json& f, const Grid& grid, double lambda, const std::string& where) {
  const bool has_value = f.contains("value");
  const bool has_cost = f.contains("cost");
  const bool absorbing = f.contains("absorbing") && boolean(f["absorbing"], where + ".absorbing");
  if (has_value + has_cost + absorbing != 1)
    fail(where, "give exactly one of 'value', 'cost' or 'absorbing': true");
  if (absorbing) return std::nullopt;
  if (has_cost) return SepTerm::constant(grid.dims(), std::exp(-number(f["cost"], where + ".cost") / lambda));
  return term(f["value"], grid, where + ".value");
}

BoundarySpec parse_boundaries(const json& v, const Grid& grid, double lambda) {
  BoundarySpec bc;
  if (!v.is_object()) fail("boundaries", "expected an object");
  for (auto it = v.begin(); it != v.end(); ++it)
    if (it.key() != "faces" && it.key() != "regions" && it.key() != "default_face")
      fail("boundaries", "unknown key '" + it.key() + "'");
  if (v.contains("faces")) {
    const json& faces = v["faces"];
    if (!faces.is_array()) fail("boundaries.faces", "expected a list");
    for (std::size_t k = 0; k < faces.size(); ++k) {
      const std::string w = "boundaries.faces[" + std::to_string(k) + "]";
      const json& f = faces[k];
      const int dim = axis_index(need(f, "axis", w), grid, w + ".axis");
      const std::string side = string(need(f, "side", w), w + ".side");
      const std::optional<SepTerm> value = face_value(f, grid, lambda, w);
      if (side == "both") {
        bc.faces.push_back({dim, Side::lower, value});
        bc.faces.push_back({dim, Side::upper, value});
      } else {
        bc.faces.push_back({dim, parse_side(side, w + ".side"), value});
      }
    }
  }
  if (v.contains("default_face")) {
    const std::string mode = string(v["default_face"], "boundaries.default_face");
    if (mode == "absorbing") {
      for (int i = 0; i < grid.dims(); ++i) {
        if (grid.axis(i).periodic) continue;
        for (Side s : {Side::lower, Side::upper}) {
          bool listed = false;
          for (const FaceCondition& f : bc.faces) listed |= f.dim == i && f.side == s;
          if (!listed) bc.faces.push_back({i, s, std::nullopt});
        }
      }
    } else if (mode != "none") {
      fail("boundaries.default_face", "expected 'absorbing' or 'none'");
    }
  }
  if (v.contains("regions")) {
    const json& regions = v["regions"];
    if (!regions.is_array()) fail("boundaries.regions", "expected a list");
    for (std::size_t k = 0; k < regions.size(); ++k) {
      const std::string w = "boundaries.regions[" + std::to_string(k) + "]";
      const json& r = regions[k];
      SepTerm value;
      if (r.contains("cost")) {
        value = SepTerm::constant(grid.dims(), std::exp(-number(r["cost"], w + ".cost") / lambda));
      } else {
        value = term(need(r, "value", w), grid, w + ".value");
      }
      if (r.contains("nodes")) {
        const json& n = r["nodes"];
        if (!n.is_array() || static_cast<int>(n.size()) != grid.dims())
          fail(w + ".nodes", "needs one [first, last] pair per dimension");
        RegionCondition rc;
        for (int i = 0; i < grid.dims(); ++i) {
          if (!n[i].is_array() || n[i].size() != 2) fail(w + ".nodes", "expected [first, last]");
          rc.nodes.emplace_back(integer(n[i][0], w + ".nodes"), integer(n[i][1], w + ".nodes"));
        }
        rc.value = std::move(value);
        bc.regions.push_back(std::move(rc));
      } else {
        const json& b = need(r, "box", w);
        std::vector<std::pair<double, double>> box;
        for (const Axis& a : grid.axes()) box.emplace_back(a.lower, a.upper);
        auto interval = [&](const json& iv, const std::string& iw) {
          if (!iv.is_array() || iv.size() != 2) fail(iw, "expected [lower, upper]");
          return std::make_pair(number(iv[0], iw), number(iv[1], iw));
        };
        if (b.is_object()) {
          for (auto it = b.begin(); it != b.end(); ++it)
            box[axis_index(json(it.key()), grid, w + ".box")] = interval(it.value(), w + ".box." + it.key());
        } else if (b.is_array() && static_cast<int>(b.size()) == grid.dims()) {
          for (int i = 0; i < grid.dims(); ++i) box[i] = interval(b[i], w + ".box[" + std::to_string(i) + "]");
        } else {
          fail(w + ".box", "expected an object keyed by axis or one interval per dimension");
        }
        try {
          bc.regions.push_back(RegionCondition::from_box(grid, box, std::move(value)));
        } catch (const BoundaryError& e) {
          fail(w, e.what());
        }
      }
    }
  }
  return bc;
}

void parse_solver(const json& v, ProblemConfig& c) {
  if (!v.is_object()) fail("solver", "expected an object");
  AlsOptions& o = c.solve.als;
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string& k = it.key();
    const std::string w = "solver." + k;
    const json& x = it.value();
    if (k == "tolerance") o.tolerance = number(x, w);
    else if (k == "max_rank") o.max_rank = integer(x, w);
    else if (k == "max_sweeps") o.max_sweeps = static_cast<int>(integer(x, w));
    else if (k == "stagnation") o.stagnation = number(x, w);
    else if (k == "regularization") o.regularization = number(x, w);
    else if (k == "seed") o.seed = static_cast<std::uint64_t>(integer(x, w));
    else if (k == "initial_rank") o.initial_rank = integer(x, w);
    else if (k == "check_monotone") o.check_monotone = boolean(x, w);
    else if (k == "accuracy") c.solve.accuracy = static_cast<int>(integer(x, w));
    else if (k == "compress_tolerance") c.solve.compress_tolerance = number(x, w);
    else if (k == "compress_max_rank") c.solve.compress_max_rank = integer(x, w);
    else if (k == "ignore_matching") c.solve.ignore_matching = boolean(x, w);
    else if (k == "carry_rank") c.carry_rank = integer(x, w);
    else fail(w, "unknown solver option");
  }
  try {
    o.validate();
  } catch (const std::invalid_argument& e) {
    fail("solver", e.what());
  }
  if (c.solve.accuracy < 2 || c.solve.accuracy > 8 || c.solve.accuracy % 2)
    fail("solver.accuracy", "must be an even number between 2 and 8");
}

json term_json(const SepTerm& t) {
  json f = json::array();
  for (const Expr& e : t.factors) f.push_back(e.to_string());
  return {{"coef", t.coef}, {"factors", f}};
}

json function_json(const SepFunction& f) {
  json out = json::array();
  for (const SepTerm& t : f.terms) out.push_back(term_json(t));
  return out;
}

json matrix_json(const Matrix& m) {
  json out = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

json input_matrix_json(const std::vector<std::vector<SepFunction>>& m) {
  json out = json::array();
  for (const auto& row : m) {
    json r = json::array();
    for (const SepFunction& f : row) r.push_back(function_json(f));
    out.push_back(r);
  }
  return out;
}

}  // namespace

ProblemConfig parse_config(const json& doc) {
  if (!doc.is_object()) fail("$", "expected a JSON object");
  static const char* kKeys[] = {"name", "comment", "grid", "dynamics", "control", "noise",
                                "cost", "setting", "boundaries", "solver"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool known = false;
    for (const char* k : kKeys) known |= it.key() == k;
    if (!known) fail("$", "unknown key '" + it.key() + "'");
  }
  ProblemConfig c;
  if (doc.contains("name")) c.name = string(doc["name"], "name");
  if (doc.contains("comment")) c.comment = string(doc["comment"], "comment");
  HjbProblem& p = c.problem;
  p.grid = parse_grid(need(doc, "grid", "$"));
  const Grid& grid = p.grid;
  const int d = grid.dims();

  const json& cost = need(doc, "cost", "$");
  for (auto it = cost.begin(); it != cost.end(); ++it)
    if (it.key() != "q_terms" && it.key() != "R" && it.key() != "lambda" && it.key() != "noise_covariance")
      fail("cost", "unknown key '" + it.key() + "'");
  p.lambda = number(need(cost, "lambda", "cost"), "cost.lambda");
  if (!(p.lambda > 0.0)) fail("cost.lambda", "must be positive");
  p.control_cost = matrix(need(cost, "R", "cost"), "cost.R");
  if (p.control_cost.rows() != p.control_cost.cols()) fail("cost.R", "must be square");
  const int m = static_cast<int>(p.control_cost.rows());
  if (cost.contains("q_terms")) p.state_cost = function(cost["q_terms"], grid, "cost.q_terms");
  if (cost.contains("noise_covariance")) {
    p.noise_cov = matrix(cost["noise_covariance"], "cost.noise_covariance");
  } else {
    // Default that satisfies the matching condition when B = G.
    p.noise_cov = p.lambda * p.control_cost.inverse();
  }

  const json& dyn = need(doc, "dynamics", "$");
  if (!dyn.is_array() || static_cast<int>(dyn.size()) != d) fail("dynamics", "needs one entry per state dimension");
  for (int i = 0; i < d; ++i) p.drift.push_back(function(dyn[i], grid, "dynamics[" + std::to_string(i) + "]"));
  p.control = input_matrix(need(doc, "control", "$"), grid, m, "control");
  const json& noise = need(doc, "noise", "$");
  if (noise.is_string()) {
    if (noise.get<std::string>() != "control") fail("noise", "expected a matrix or the string 'control'");
    p.noise = p.control;
  } else {
    p.noise = input_matrix(noise, grid, m, "noise");
  }

  if (doc.contains("setting")) {
    const json& s = doc["setting"];
    if (s.is_string()) {
      if (s.get<std::string>() != "first_exit") fail("setting", "expected 'first_exit' or {finite_horizon: ...}");
    } else {
      const json& fh = need(s, "finite_horizon", "setting");
      p.finite_horizon = true;
      p.horizon.horizon = number(need(fh, "T", "setting.finite_horizon"), "setting.finite_horizon.T");
      p.horizon.dt = number(need(fh, "dt", "setting.finite_horizon"), "setting.finite_horizon.dt");
      if (!(p.horizon.dt > 0.0)) fail("setting.finite_horizon.dt", "must be positive");
      if (!(p.horizon.horizon > 0.0)) fail("setting.finite_horizon.T", "must be positive");
      if (fh.contains("terminal"))
        p.horizon.terminal_cost = function(fh["terminal"], grid, "setting.finite_horizon.terminal");
      if (fh.contains("terminal_psi"))
        p.horizon.terminal_psi = function(fh["terminal_psi"], grid, "setting.finite_horizon.terminal_psi");
      for (const SepTerm& t : p.horizon.terminal_cost.terms)
        if (!t.is_univariate())
          fail("setting.finite_horizon.terminal", "every terminal cost term may depend on one dimension only");
    }
  }

  if (doc.contains("boundaries")) c.boundaries = parse_boundaries(doc["boundaries"], grid, p.lambda);
  if (doc.contains("solver")) parse_solver(doc["solver"], c);

  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    fail("$", e.what());
  }
  return c;
}

ProblemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), e.what());
  }
  return parse_config(doc);
}

json to_json(const ProblemConfig& c) {
  const HjbProblem& p = c.problem;
  json doc;
  doc["name"] = c.name;
  doc["comment"] = c.comment;
  json grid = json::array();
  for (const Axis& a : p.grid.axes())
    grid.push_back({{"name", a.name}, {"points", a.points}, {"lower", a.lower}, {"upper", a.upper},
                    {"periodic", a.periodic}});
  doc["grid"] = grid;
  json dyn = json::array();
  for (const SepFunction& f : p.drift) dyn.push_back(function_json(f));
  doc["dynamics"] = dyn;
  doc["control"] = input_matrix_json(p.control);
  doc["noise"] = input_matrix_json(p.noise);
  doc["cost"] = {{"q_terms", function_json(p.state_cost)},
                 {"R", matrix_json(p.control_cost)},
                 {"lambda", p.lambda},
                 {"noise_covariance", matrix_json(p.noise_cov)}};
  if (p.finite_horizon) {
    json fh = {{"T", p.horizon.horizon}, {"dt", p.horizon.dt},
               {"terminal", function_json(p.horizon.terminal_cost)}};
    if (p.horizon.terminal_psi) fh["terminal_psi"] = function_json(*p.horizon.terminal_psi);
    doc["setting"] = {{"finite_horizon", fh}};
  } else {
    doc["setting"] = "first_exit";
  }
  json faces = json::array();
  for (const FaceCondition& f : c.boundaries.faces) {
    json j = {{"axis", f.dim}, {"side", f.side == Side::lower ? "lower" : "upper"}};
    if (f.value) j["value"] = term_json(*f.value);
    else j["absorbing"] = true;
    faces.push_back(j);
  }
  json regions = json::array();
  for (const RegionCondition& r : c.boundaries.regions) {
    json nodes = json::array();
    for (const auto& [lo, hi] : r.nodes) nodes.push_back({lo, hi});
    regions.push_back({{"nodes", nodes}, {"value", term_json(r.value)}});
  }
  doc["boundaries"] = {{"faces", faces}, {"regions", regions}};
  const AlsOptions& o = c.solve.als;
  json solver = {{"tolerance", o.tolerance},
                 {"max_rank", o.max_rank},
                 {"max_sweeps", o.max_sweeps},
                 {"stagnation", o.stagnation},
                 {"seed", o.seed},
                 {"initial_rank", o.initial_rank},
                 {"check_monotone", o.check_monotone},
                 {"accuracy", c.solve.accuracy},
                 {"compress_max_rank", c.solve.compress_max_rank},
                 {"ignore_matching", c.solve.ignore_matching},
                 {"carry_rank", c.carry_rank}};
  if (o.regularization) solver["regularization"] = *o.regularization;
  if (c.solve.compress_tolerance) solver["compress_tolerance"] = *c.solve.compress_tolerance;
  doc["solver"] = solver;
  return doc;
}

}  // namespace sephjb
