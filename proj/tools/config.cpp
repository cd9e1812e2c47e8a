#include "config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace rbsde::cli {

namespace {

std::string join(const std::string& path, const std::string& key) { return path + "/" + key; }

const Json& require(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join(path, key), "required field is missing");
  return *it;
}

double number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path, "expected a finite number");
  return x;
}

double number_or(const Json& obj, const std::string& key, const std::string& path, double fallback) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, join(path, key));
}

std::size_t count(const Json& v, const std::string& path, std::size_t min_value = 0) {
  if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min_value)) {
    throw ConfigError(path, "expected an integer >= " + std::to_string(min_value));
  }
  return v.get<std::size_t>();
}

std::size_t count_or(const Json& obj, const std::string& key, const std::string& path, std::size_t fallback,
                     std::size_t min_value = 0) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : count(*it, join(path, key), min_value);
}

std::vector<double> numbers(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], join(path, std::to_string(i))));
  return out;
}

Eigen::VectorXd vector_of(const Json& v, const std::string& path, std::size_t dim) {
  const auto xs = numbers(v, path);
  if (xs.size() != dim) throw ConfigError(path, "expected " + std::to_string(dim) + " entries");
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(dim));
}

Eigen::MatrixXd matrix_of(const Json& v, const std::string& path, std::size_t rows, std::size_t cols) {
  if (!v.is_array() || v.size() != rows) throw ConfigError(path, "expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = vector_of(v[r], join(path, std::to_string(r)), cols);
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

std::string type_of(const Json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected an object with a \"type\" field");
  const auto& t = require(v, "type", path);
  if (!t.is_string()) throw ConfigError(join(path, "type"), "expected a string");
  return t.get<std::string>();
}

const std::map<std::string, std::vector<std::string>>& registry() {
  static const std::map<std::string, std::vector<std::string>> names{
      {"scalar",
       {"constant", "affine", "polynomial", "exponential", "put", "gaussian_bump", "inverted_gaussian",
        "running_sup_power", "sum"}},
      {"controlled", {"zero", "quadratic_control", "<any scalar form>"}},
      {"vector", {"constant", "linear"}},
      {"controlled_vector", {"zero", "linear_control"}},
      {"matrix", {"constant_matrix", "identity"}},
      {"rho", {"linear"}},
      {"driver", {"zero", "constant", "deterministic_exp", "linear", "hamiltonian"}},
  };
  return names;
}

[[noreturn]] void unknown_type(const std::string& path, const std::string& type, const std::string& category) {
  std::string list;
  for (const auto& n : registry().at(category)) list += (list.empty() ? "" : ", ") + n;
  throw ConfigError(join(path, "type"), "unknown " + category + " form \"" + type + "\" (known: " + list + ")");
}

std::size_t coordinate_of(const Json& v, const std::string& path, std::size_t dim) {
  const std::size_t k = count_or(v, "coordinate", path, 0);
  if (k >= dim) throw ConfigError(join(path, "coordinate"), "coordinate out of range for dimension " + std::to_string(dim));
  return k;
}

ScalarForm scalar_form(const Json& v, const std::string& path, std::size_t dim) {
  const std::string type = type_of(v, path);
  if (type == "constant") {
    const double c = number(require(v, "value", path), join(path, "value"));
    return {[c](const PathPrefix&) { return c; }, true};
  }
  if (type == "affine") {
    const double c = number_or(v, "intercept", path, 0.0);
    const double tc = number_or(v, "time", path, 0.0);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    if (v.contains("coeffs")) b = vector_of(v["coeffs"], join(path, "coeffs"), dim);
    return {[c, tc, b](const PathPrefix& p) { return c + tc * p.t + b.dot(p.x); }, true};
  }
  if (type == "polynomial") {
    const std::size_t k = coordinate_of(v, path, dim);
    const auto cs = numbers(require(v, "coeffs", path), join(path, "coeffs"));
    return {[k, cs](const PathPrefix& p) {
              const double x = p.x[static_cast<Eigen::Index>(k)];
              double acc = 0.0;
              for (auto it = cs.rbegin(); it != cs.rend(); ++it) acc = acc * x + *it;
              return acc;
            },
            true};
  }
  if (type == "exponential") {
    const double scale = number_or(v, "scale", path, 1.0);
    const double rate = number(require(v, "rate", path), join(path, "rate"));
    return {[scale, rate](const PathPrefix& p) { return scale * std::exp(rate * p.t); }, true};
  }
  if (type == "put") {
    const std::size_t k = coordinate_of(v, path, dim);
    const double strike = number(require(v, "strike", path), join(path, "strike"));
    const double r = number_or(v, "discount", path, 0.0);
    const bool log_price = v.value("log_price", false);
    return {[k, strike, r, log_price](const PathPrefix& p) {
              const double x = p.x[static_cast<Eigen::Index>(k)];
              const double s = log_price ? std::exp(x) : x;
              return std::exp(-r * p.t) * std::max(strike - s, 0.0);
            },
            true};
  }
  if (type == "gaussian_bump" || type == "inverted_gaussian") {
    const std::size_t k = coordinate_of(v, path, dim);
    const double h = number_or(v, "height", path, 1.0);
    const double c = number_or(v, "center", path, 0.0);
    const double w = number_or(v, "width", path, 1.0);
    if (!(w > 0.0)) throw ConfigError(join(path, "width"), "must be > 0");
    const bool inverted = type == "inverted_gaussian";
    return {[k, h, c, w, inverted](const PathPrefix& p) {
              const double u = (p.x[static_cast<Eigen::Index>(k)] - c) / w;
              const double bump = std::exp(-u * u);
              return h * (inverted ? 1.0 - bump : bump);
            },
            true};
  }
  if (type == "running_sup_power") {
    const double scale = number_or(v, "scale", path, 1.0);
    const double power = number(require(v, "power", path), join(path, "power"));
    const double offset = number_or(v, "offset", path, 0.0);
    return {[scale, power, offset](const PathPrefix& p) { return offset + scale * std::pow(p.running_sup, power); },
            false};
  }
  if (type == "sum") {
    const auto& terms = require(v, "terms", path);
    if (!terms.is_array() || terms.empty()) throw ConfigError(join(path, "terms"), "expected a non-empty array");
    std::vector<PathFunctional> fs;
    bool markovian = true;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      auto f = scalar_form(terms[i], join(join(path, "terms"), std::to_string(i)), dim);
      markovian = markovian && f.markovian;
      fs.push_back(std::move(f.fn));
    }
    return {[fs](const PathPrefix& p) {
              double acc = 0.0;
              for (const auto& f : fs) acc += f(p);
              return acc;
            },
            markovian};
  }
  unknown_type(path, type, "scalar");
}

std::function<double(const PathPrefix&, const Eigen::VectorXd&)> controlled_form(const Json& v, const std::string& path,
                                                                                 std::size_t dim) {
  const std::string type = type_of(v, path);
  if (type == "zero") return [](const PathPrefix&, const Eigen::VectorXd&) { return 0.0; };
  if (type == "quadratic_control") {
    const double scale = number_or(v, "scale", path, 1.0);
    return [scale](const PathPrefix&, const Eigen::VectorXd& a) { return scale * a.squaredNorm(); };
  }
  const auto f = scalar_form(v, path, dim).fn;
  return [f](const PathPrefix& p, const Eigen::VectorXd&) { return f(p); };
}

StateFunction vector_form(const Json& v, const std::string& path, std::size_t rows, std::size_t dim) {
  const std::string type = type_of(v, path);
  if (type == "constant") {
    const Eigen::VectorXd c = vector_of(require(v, "value", path), join(path, "value"), rows);
    return [c](const PathPrefix&) { return c; };
  }
  if (type == "linear") {
    const Eigen::MatrixXd a = matrix_of(require(v, "matrix", path), join(path, "matrix"), rows, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));
    if (v.contains("offset")) b = vector_of(v["offset"], join(path, "offset"), rows);
    return [a, b](const PathPrefix& p) { return (a * p.x + b).eval(); };
  }
  unknown_type(path, type, "vector");
}

ControlledFunction controlled_vector_form(const Json& v, const std::string& path, std::size_t rows,
                                          std::size_t control_dim) {
  const std::string type = type_of(v, path);
  if (type == "zero") {
    return [rows](const PathPrefix&, const Eigen::VectorXd&) {
      return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows)).eval();
    };
  }
  if (type == "linear_control") {
    if (control_dim != rows) {
      throw ConfigError(path, "linear_control needs a control set of dimension dim2 = " + std::to_string(rows));
    }
    const double scale = number_or(v, "scale", path, 1.0);
    return [scale](const PathPrefix&, const Eigen::VectorXd& a) { return (scale * a).eval(); };
  }
  unknown_type(path, type, "controlled_vector");
}

MatrixFunction matrix_form(const Json& v, const std::string& path, std::size_t rows, std::size_t cols) {
  const std::string type = type_of(v, path);
  if (type == "constant_matrix") {
    const Eigen::MatrixXd m = matrix_of(require(v, "value", path), join(path, "value"), rows, cols);
    return [m](const PathPrefix&) { return m; };
  }
  if (type == "identity") {
    if (rows != cols) throw ConfigError(path, "identity needs a square block");
    const double scale = number_or(v, "scale", path, 1.0);
    const Eigen::MatrixXd m =
        scale * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    return [m](const PathPrefix&) { return m; };
  }
  unknown_type(path, type, "matrix");
}

std::function<double(double)> rho_form(const Json& v, const std::string& path) {
  const std::string type = type_of(v, path);
  if (type == "linear") {
    const double rate = number(require(v, "rate", path), join(path, "rate"));
    return [rate](double t) { return rate * t; };
  }
  unknown_type(path, type, "rho");
}

DriverSpec driver_form(const Json& v, const std::string& path, std::size_t dim,
                       const std::optional<HamiltonianSpec>& ham, const FsdeCoefficients& coeffs,
                       const ControlSet& control_set) {
  const std::string type = type_of(v, path);
  DriverSpec d;
  d.y_independent = true;
  if (type == "zero") {
    d.f = [](const PathPrefix&, double, const Eigen::VectorXd&) { return 0.0; };
    d.description = "f = 0";
    return d;
  }
  if (type == "constant") {
    const double c = number(require(v, "value", path), join(path, "value"));
    d.f = [c](const PathPrefix&, double, const Eigen::VectorXd&) { return c; };
    d.description = "f = " + std::to_string(c);
    return d;
  }
  if (type == "deterministic_exp") {
    const double scale = number_or(v, "scale", path, 1.0);
    const double rate = number(require(v, "rate", path), join(path, "rate"));
    d.f = [scale, rate](const PathPrefix& p, double, const Eigen::VectorXd&) { return scale * std::exp(-rate * p.t); };
    d.description = "f = scale exp(-rate t)";
    return d;
  }
  if (type == "linear") {
    const double a = number_or(v, "y", path, 0.0);
    const double c = number_or(v, "c", path, 0.0);
    const double decay = number_or(v, "decay", path, 0.0);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    if (v.contains("z")) b = vector_of(v["z"], join(path, "z"), dim);
    d.f = [a, b, c, decay](const PathPrefix& p, double y, const Eigen::VectorXd& z) {
      return a * y + b.dot(z) + c * std::exp(-decay * p.t);
    };
    d.k_f = std::abs(a);
    d.u_f = [a](double) { return a; };
    d.y_independent = a == 0.0;
    const double lip = b.norm();
    d.lipschitz = [lip](const PathPrefix&) { return lip; };
    d.description = "f = a y + b.z + c exp(-decay t)";
    return d;
  }
  if (type == "hamiltonian") {
    if (!ham) throw ConfigError(path, "hamiltonian driver needs problem.phi, problem.psi and problem.rho");
    HamiltonianSpec spec = *ham;
    if (!spec.breve_a) spec.breve_a = breve_a_from(coeffs);
    return hamiltonian_driver(spec, control_set, coeffs);
  }
  unknown_type(path, type, "driver");
}

std::vector<Feature> features_of(const Json& v, const std::string& path, std::size_t dim) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty array of feature names");
  std::vector<Feature> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = join(path, std::to_string(i));
    if (!v[i].is_string()) throw ConfigError(p, "expected a feature name");
    const std::string name = v[i].get<std::string>();
    if (name == "time") {
      out.push_back(Feature::time());
    } else if (name == "running_sup") {
      out.push_back(Feature::running_sup());
    } else if (name == "state") {
      for (std::size_t k = 0; k < dim; ++k) out.push_back(Feature::state(k));
    } else if (name.rfind("state:", 0) == 0) {
      std::size_t k = 0;
      try {
        k = std::stoul(name.substr(6));
      } catch (const std::exception&) {
        throw ConfigError(p, "malformed feature \"" + name + "\"");
      }
      if (k >= dim) throw ConfigError(p, "state coordinate out of range");
      out.push_back(Feature::state(k));
    } else {
      throw ConfigError(p, "unknown feature \"" + name + "\" (known: time, state, state:<k>, running_sup)");
    }
  }
  return out;
}

const std::set<std::string>& pipelines() {
  static const std::set<std::string> names{"simulate-forward", "solve-rbsde", "solve-infinite",
                                           "robust-stop",      "validate",    "oracle-compare"};
  return names;
}

}  // namespace

std::vector<std::string> registry_names(const std::string& category) {
  auto it = registry().find(category);
  return it == registry().end() ? std::vector<std::string>{} : it->second;
}

RegressionBasis ExperimentConfig::basis() const {
  if (numerics.features.empty()) return RegressionBasis::standard(coeffs.dim(), numerics.degree, numerics.ridge);
  return RegressionBasis(numerics.features, numerics.degree, numerics.ridge);
}

RobustStoppingProblem ExperimentConfig::robust_problem() const {
  if (!ham) throw ConfigError("/problem", "phi, psi and rho are required for the robust stopping problem");
  if (!numerics.schedule) throw ConfigError("/numerics/schedule", "required field is missing");
  RobustStoppingProblem p;
  p.coeffs = coeffs;
  p.ham = *ham;
  p.control_set = control_set;
  p.schedule = *numerics.schedule;
  return p;
}

BuildOptions ExperimentConfig::build_options() const {
  BuildOptions o;
  o.validation_paths = numerics.validation_paths;
  o.driver_samples = numerics.driver_samples;
  o.validation_seed = seed ^ 0x5eedULL;
  return o;
}

ExperimentConfig parse_config(const Json& doc, const std::string& pipeline) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  ExperimentConfig cfg;
  cfg.raw = doc;
  cfg.hash = fnv1a_hex(doc.dump());

  const Json empty = Json::object();
  const Json& run = doc.contains("run") ? doc["run"] : empty;
  if (!run.is_object()) throw ConfigError("/run", "expected an object");
  cfg.pipeline = pipeline;
  if (cfg.pipeline.empty()) {
    const auto& p = require(run, "pipeline", "/run");
    if (!p.is_string()) throw ConfigError("/run/pipeline", "expected a string");
    cfg.pipeline = p.get<std::string>();
  }
  if (!pipelines().count(cfg.pipeline)) throw ConfigError("/run/pipeline", "unknown pipeline \"" + cfg.pipeline + "\"");
  if (run.contains("seed")) {
    if (!run["seed"].is_number_unsigned()) throw ConfigError("/run/seed", "expected a non-negative integer");
    cfg.seed = run["seed"].get<std::uint64_t>();
  }
  if (run.contains("output_dir")) {
    if (!run["output_dir"].is_string()) throw ConfigError("/run/output_dir", "expected a string");
    cfg.output_dir = run["output_dir"].get<std::string>();
  }

  const Json& prob = require(doc, "problem", "");
  if (!prob.is_object()) throw ConfigError("/problem", "expected an object");
  const std::string pp = "/problem";
  auto& c = cfg.coeffs;
  c.dim1 = count_or(prob, "dim1", pp, 0);
  c.dim2 = count_or(prob, "dim2", pp, 1);
  const std::size_t d = c.dim();
  if (d == 0) throw ConfigError(pp, "dim1 + dim2 must be >= 1");
  c.x0 = prob.contains("x0") ? vector_of(prob["x0"], join(pp, "x0"), d) : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));

  // control set first: a2 needs its dimension
  if (prob.contains("control_set")) {
    const Json& a = prob["control_set"];
    const std::string ap = join(pp, "control_set");
    const auto lo = numbers(require(a, "lower", ap), join(ap, "lower"));
    const auto hi = numbers(require(a, "upper", ap), join(ap, "upper"));
    if (lo.size() != hi.size() || lo.empty()) throw ConfigError(ap, "lower and upper must be non-empty and of equal length");
    for (std::size_t k = 0; k < lo.size(); ++k) {
      if (lo[k] > hi[k]) throw ConfigError(join(join(ap, "lower"), std::to_string(k)), "lower exceeds upper");
    }
    cfg.control_set = ControlSet(Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                                 Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size())),
                                 count_or(a, "points", ap, 21, 1), count_or(a, "refine", ap, 0));
  } else {
    cfg.control_set = ControlSet(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 1, 0);
  }

  if (c.dim1 > 0) {
    c.a1 = prob.contains("a1") ? vector_form(prob["a1"], join(pp, "a1"), c.dim1, d)
                               : StateFunction([n = c.dim1](const PathPrefix&) {
                                   return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)).eval();
                                 });
    c.sigma11 = matrix_form(require(prob, "sigma11", pp), join(pp, "sigma11"), c.dim1, c.dim1);
  } else {
    c.sigma11 = [](const PathPrefix&) { return Eigen::MatrixXd(0, 0); };
  }
  if (c.dim2 > 0) {
    c.a2 = prob.contains("a2") ? controlled_vector_form(prob["a2"], join(pp, "a2"), c.dim2, cfg.control_set.dim())
                               : controlled_vector_form(Json{{"type", "zero"}}, join(pp, "a2"), c.dim2, 0);
    c.sigma22 = matrix_form(require(prob, "sigma22", pp), join(pp, "sigma22"), c.dim2, c.dim2);
  } else {
    c.a2 = [](const PathPrefix&, const Eigen::VectorXd&) { return Eigen::VectorXd(0); };
    c.sigma22 = [](const PathPrefix&) { return Eigen::MatrixXd(0, 0); };
  }
  if (c.dim1 > 0 && c.dim2 > 0 && prob.contains("sigma21")) {
    c.sigma21 = matrix_form(prob["sigma21"], join(pp, "sigma21"), c.dim2, c.dim1);
  } else {
    c.sigma21 = [r = c.dim2, k = c.dim1](const PathPrefix&) {
      return Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)).eval();
    };
  }
  c.sigma22_inv_bound = number_or(prob, "sigma22_inv_bound", pp, 1.0);
  c.cg_a = number_or(prob, "cg_a", pp, 0.0);
  const double cg_sigma = number_or(prob, "cg_sigma", pp, 1.0);
  c.cg_sigma = [cg_sigma](double) { return cg_sigma; };
  c.lip_x = number_or(prob, "lip_x", pp, 0.0);
  c.k_L = number_or(prob, "k_L", pp, 0.0);
  try {
    c.check_shapes();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(pp, e.what());
  }

  const bool needs_game = cfg.pipeline == "robust-stop" || cfg.pipeline == "validate";
  const bool has_game = prob.contains("phi") || prob.contains("psi") || prob.contains("rho");
  if (needs_game || has_game) {
    HamiltonianSpec ham;
    ham.phi = controlled_form(require(prob, "phi", pp), join(pp, "phi"), d);
    ham.psi = scalar_form(require(prob, "psi", pp), join(pp, "psi"), d).fn;
    ham.rho = rho_form(require(prob, "rho", pp), join(pp, "rho"));
    ham.q = number_or(prob, "q", pp, 0.0);
    ham.cg_phi = number_or(prob, "cg_phi", pp, 0.0);
    ham.cg_psi = number_or(prob, "cg_psi", pp, 0.0);
    ham.breve_a = breve_a_from(c);
    cfg.ham = ham;
  }
  if (prob.contains("driver")) {
    cfg.driver = driver_form(prob["driver"], join(pp, "driver"), d, cfg.ham, c, cfg.control_set);
  }
  if (prob.contains("barrier")) cfg.barrier = scalar_form(prob["barrier"], join(pp, "barrier"), d);
  if (prob.contains("terminal")) cfg.terminal = scalar_form(prob["terminal"], join(pp, "terminal"), d);
  if ((cfg.pipeline == "solve-rbsde" || cfg.pipeline == "solve-infinite" || cfg.pipeline == "oracle-compare") &&
      !cfg.driver) {
    throw ConfigError(join(pp, "driver"), "required field is missing");
  }

  const Json& num = doc.contains("numerics") ? doc["numerics"] : empty;
  const std::string np = "/numerics";
  if (!num.is_object()) throw ConfigError(np, "expected an object");
  auto& n = cfg.numerics;
  n.t_max = number_or(num, "t_max", np, n.t_max);
  if (!(n.t_max > 0.0)) throw ConfigError(join(np, "t_max"), "must be > 0");
  n.n_steps = count_or(num, "n_steps", np, n.n_steps, 2);
  n.n_paths = count_or(num, "n_paths", np, n.n_paths, 1);
  n.degree = static_cast<int>(count_or(num, "basis_degree", np, 3, 1));
  n.ridge = number_or(num, "ridge", np, n.ridge);
  if (n.ridge < 0.0) throw ConfigError(join(np, "ridge"), "must be >= 0");
  if (num.contains("features")) n.features = features_of(num["features"], join(np, "features"), d);
  n.solver.hit_tolerance = number_or(num, "hit_tolerance", np, n.solver.hit_tolerance);
  n.solver.inner_sweeps = count_or(num, "inner_sweeps", np, n.solver.inner_sweeps, 1);
  if (num.contains("target")) {
    const std::string t = num["target"].is_string() ? num["target"].get<std::string>() : "";
    if (t == "realized") {
      n.solver.target = SolverConfig::Target::Realized;
    } else if (t == "fitted") {
      n.solver.target = SolverConfig::Target::Fitted;
    } else {
      throw ConfigError(join(np, "target"), "expected \"realized\" or \"fitted\"");
    }
  }
  n.eval_paths = count_or(num, "eval_paths", np, n.n_paths, 1);
  n.eval_seed = count_or(num, "eval_seed", np, 0);
  n.challenger_seed = count_or(num, "challenger_seed", np, n.challenger_seed);
  n.csv_paths = count_or(num, "csv_paths", np, n.csv_paths);
  n.lattice_substeps = count_or(num, "lattice_substeps", np, n.lattice_substeps, 1);
  n.validation_paths = count_or(num, "validation_paths", np, n.validation_paths, 1);
  n.driver_samples = count_or(num, "driver_samples", np, n.driver_samples, 1);
  n.oracle_tolerance = number_or(num, "oracle_tolerance", np, n.oracle_tolerance);
  n.tail_paths = count_or(num, "tail_paths", np, n.tail_paths);
  n.tail_probes = count_or(num, "tail_probes", np, n.tail_probes, 2);
  if (num.contains("schedule")) {
    const Json& s = num["schedule"];
    const std::string sp = join(np, "schedule");
    TruncationSchedule sched;
    sched.levels_m = numbers(require(s, "levels_m", sp), join(sp, "levels_m"));
    sched.levels_n = numbers(require(s, "levels_n", sp), join(sp, "levels_n"));
    sched.levels_l = numbers(require(s, "levels_l", sp), join(sp, "levels_l"));
    sched.t_solve = number(require(s, "t_solve", sp), join(sp, "t_solve"));
    sched.tol = number_or(s, "tol", sp, 1e-2);
    try {
      sched.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(sp, e.what());
    }
    n.schedule = sched;
  } else if (cfg.pipeline == "solve-infinite" || cfg.pipeline == "robust-stop") {
    throw ConfigError(join(np, "schedule"), "required field is missing");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::string& pipeline) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc, pipeline);
}

}  // namespace rbsde::cli
