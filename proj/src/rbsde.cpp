#include "rbsde/rbsde.hpp"

#include <algorithm>
#include <cmath>

namespace rbsde {

Eigen::VectorXd RbsdeSolution::z_surrogate(const PathPrefix& prefix) const {
  const Eigen::VectorXd raw = fits[prefix.node].evaluate(prefix);
  return raw.tail(static_cast<Eigen::Index>(dim)) / grid.dt();
}

double RbsdeSolution::min_gap() const {
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index p = 0; p < y.rows(); ++p) {
    for (Eigen::Index i = 0; i < y.cols(); ++i) {
      if (std::isfinite(barrier(p, i))) gap = std::min(gap, y(p, i) - barrier(p, i));
    }
  }
  return gap;
}

RbsdeSolution solve_reflected(const RbsdeProblem& problem, const PathBundle& bundle, const RegressionBasis& basis,
                              const SolverConfig& config) {
  if (!(bundle.grid() == problem.grid)) throw std::invalid_argument("solve: bundle was simulated on another grid");
  if (!problem.driver.f) throw std::invalid_argument("solve: driver is empty");
  if (!problem.terminal) throw std::invalid_argument("solve: terminal condition is empty");
  const auto& grid = problem.grid;
  const std::size_t n = grid.n_steps();
  const std::size_t d = bundle.dim();
  const auto m = static_cast<Eigen::Index>(bundle.n_paths());
  const auto dd = static_cast<Eigen::Index>(d);
  const double dt = grid.dt();
  const bool reflect = config.reflect && problem.has_barrier();

  RbsdeSolution sol{.grid = grid, .dim = d};
  sol.y.setZero(m, static_cast<Eigen::Index>(n + 1));
  sol.z.setZero(m, static_cast<Eigen::Index>(n * d));
  sol.k.setZero(m, static_cast<Eigen::Index>(n + 1));
  sol.dk.setZero(m, static_cast<Eigen::Index>(n));
  sol.driver_values.setZero(m, static_cast<Eigen::Index>(n));
  sol.barrier.setConstant(m, static_cast<Eigen::Index>(n + 1), kNoBarrier);
  sol.fits.resize(n);

  const auto last = static_cast<Eigen::Index>(n);
  for (Eigen::Index p = 0; p < m; ++p) {
    const auto prefix = bundle.prefix(static_cast<std::size_t>(p), n);
    const double xi = problem.terminal(prefix);
    if (!std::isfinite(xi)) throw SolverError("solve: non-finite terminal value", n);
    double y = xi;
    if (reflect) {
      const double s = problem.barrier_at(prefix);
      sol.barrier(p, last) = s;
      if (s > xi + config.terminal_tolerance) {
        throw std::invalid_argument("solve: barrier exceeds the terminal value at the horizon (path " +
                                    std::to_string(p) + ")");
      }
      y = std::max(xi, s);
    }
    sol.y(p, last) = y;
  }
  const bool realized = config.target == SolverConfig::Target::Realized;
  Eigen::VectorXd value = sol.y.col(last);

  const std::size_t sweeps = problem.driver.y_independent ? 1 : std::max<std::size_t>(1, config.inner_sweeps);
  Eigen::MatrixXd level_target(m, 1);
  Eigen::MatrixXd z_targets(m, dd);
  Eigen::MatrixXd fitted_level, fitted_z;
  Eigen::VectorXd zp(dd);
  for (std::size_t node = n; node-- > 0;) {
    const auto i = static_cast<Eigen::Index>(node);
    for (Eigen::Index p = 0; p < m; ++p) level_target(p, 0) = realized ? value[p] : sol.y(p, i + 1);
    try {
      const NodeDesign design = basis.design(bundle, node);
      const RegressionFit level_fit = design.fit(level_target, &fitted_level);
      // control variate: E[(Y_{i+1} - E[U_{i+1} | F_i]) dW_i | F_i] = E[Y_{i+1} dW_i | F_i]
      for (Eigen::Index p = 0; p < m; ++p) {
        const double centered = sol.y(p, i + 1) - fitted_level(p, 0);
        const auto dw = bundle.dw(static_cast<std::size_t>(p), node);
        for (Eigen::Index k = 0; k < dd; ++k) z_targets(p, k) = centered * dw[k];
      }
      sol.fits[node] = level_fit.joined(design.fit(z_targets, &fitted_z));
    } catch (const RegressionError& e) {
      throw SolverError(e.what(), node);
    }
    for (Eigen::Index p = 0; p < m; ++p) {
      const auto prefix = bundle.prefix(static_cast<std::size_t>(p), node);
      for (Eigen::Index k = 0; k < dd; ++k) zp[k] = fitted_z(p, k) / dt;
      const double cont = fitted_level(p, 0);
      double ytilde = cont;
      double fval = 0.0;
      for (std::size_t s = 0; s < sweeps; ++s) {
        fval = problem.driver(prefix, ytilde, zp);
        ytilde = cont + fval * dt;
      }
      if (!std::isfinite(ytilde)) {
        throw SolverError("solve: non-finite driver value at path " + std::to_string(p) + ", node " +
                              std::to_string(node),
                          node);
      }
      double y = ytilde;
      if (reflect) {
        const double s = problem.barrier_at(prefix);
        sol.barrier(p, i) = s;
        y = std::max(ytilde, s);
      }
      sol.y(p, i) = y;
      sol.dk(p, i) = y - ytilde;
      value[p] = (y > ytilde) ? y : value[p] + fval * dt;
      sol.driver_values(p, i) = fval;
      sol.z.row(p).segment(i * dd, dd) = zp.transpose();
    }
  }

  for (Eigen::Index p = 0; p < m; ++p) {
    for (Eigen::Index i = 0; i < last; ++i) sol.k(p, i + 1) = sol.k(p, i) + sol.dk(p, i);
  }
  double residual = 0.0;
  for (Eigen::Index p = 0; p < m; ++p) {
    for (Eigen::Index i = 0; i < last; ++i) {
      if (sol.dk(p, i) != 0.0) residual += sol.dk(p, i) * (sol.y(p, i) - sol.barrier(p, i));
    }
  }
  sol.skorokhod_residual = residual / static_cast<double>(m);

  Eigen::VectorXd y0_sample(m);
  for (Eigen::Index p = 0; p < m; ++p) {
    y0_sample[p] = realized ? value[p] : sol.y(p, 1) + sol.driver_values(p, 0) * dt + sol.dk(p, 0);
  }
  sol.y0 = sample_stats(y0_sample);
  sol.y0.mean = sol.y(0, 0);

  PathMatrix z_norm(m, static_cast<Eigen::Index>(n));
  for (Eigen::Index p = 0; p < m; ++p) {
    for (Eigen::Index i = 0; i < last; ++i) z_norm(p, i) = sol.z.row(p).segment(i * dd, dd).norm();
  }
  const double tail_start = 0.5 * grid.t_max();
  sol.y_norms = estimate_norms(sol.y, grid, 2.0, tail_start);
  sol.z_norms = estimate_norms(z_norm, grid, 2.0, tail_start);
  sol.k_norms = estimate_norms(sol.k, grid, 2.0, tail_start);
  return sol;
}

RbsdeSolution solve_unreflected(const RbsdeProblem& problem, const PathBundle& bundle, const RegressionBasis& basis,
                                SolverConfig config) {
  config.reflect = false;
  return solve_reflected(problem, bundle, basis, config);
}

StabilityDiff solution_difference(const RbsdeSolution& a, const RbsdeSolution& b) {
  if (!(a.grid == b.grid) || a.y.rows() != b.y.rows()) {
    throw std::invalid_argument("solution_difference: solutions live on different bundles");
  }
  const auto m = a.y.rows();
  const auto n = static_cast<Eigen::Index>(a.grid.n_steps());
  const auto dd = static_cast<Eigen::Index>(a.dim);
  PathMatrix dz(m, n);
  for (Eigen::Index p = 0; p < m; ++p) {
    for (Eigen::Index i = 0; i < n; ++i) {
      dz(p, i) = (a.z.row(p).segment(i * dd, dd) - b.z.row(p).segment(i * dd, dd)).norm();
    }
  }
  const PathMatrix dy = a.y - b.y;
  const PathMatrix dk = a.k - b.k;
  return {estimate_norms(dy, a.grid, 2.0, 0.0).sp_norm, estimate_norms(dz, a.grid, 2.0, 0.0).hp_norm,
          estimate_norms(dk, a.grid, 2.0, 0.0).sp_norm};
}

StabilityDiff stability_probe(const RbsdeProblem& problem, const RbsdeProblem& perturbed, const PathBundle& bundle,
                              const RegressionBasis& basis, const SolverConfig& config) {
  if (!(problem.grid == perturbed.grid)) throw std::invalid_argument("stability_probe: problems must share a grid");
  return solution_difference(solve_reflected(perturbed, bundle, basis, config),
                             solve_reflected(problem, bundle, basis, config));
}

std::size_t first_hitting_node(const RbsdeSolution& solution, std::size_t path, std::size_t start, std::size_t cap,
                               double hit_tolerance) {
  const auto p = static_cast<Eigen::Index>(path);
  for (std::size_t i = start; i < cap; ++i) {
    const double s = solution.barrier(p, static_cast<Eigen::Index>(i));
    if (!std::isfinite(s)) continue;
    if (std::abs(solution.y(p, static_cast<Eigen::Index>(i)) - s) <= hit_tolerance * (1.0 + std::abs(s))) return i;
  }
  return cap;
}

SnellResidual snell_residual(const RbsdeSolution& solution, std::span<const std::size_t> cap_nodes,
                             double hit_tolerance) {
  const auto m = solution.y.rows();
  const std::size_t n = solution.grid.n_steps();
  if (!cap_nodes.empty() && cap_nodes.size() != static_cast<std::size_t>(m)) {
    throw std::invalid_argument("snell_residual: one cap node per path required");
  }
  const double dt = solution.grid.dt();
  Eigen::VectorXd representation(m);
  double k_residual = 0.0;
  for (Eigen::Index p = 0; p < m; ++p) {
    const std::size_t cap = cap_nodes.empty() ? n : std::min(n, cap_nodes[static_cast<std::size_t>(p)]);
    const std::size_t hit = first_hitting_node(solution, static_cast<std::size_t>(p), 0, cap, hit_tolerance);
    double value = 0.0;
    for (std::size_t i = 0; i < hit; ++i) value += solution.driver_values(p, static_cast<Eigen::Index>(i)) * dt;
    value += (hit < cap) ? solution.barrier(p, static_cast<Eigen::Index>(hit))
                         : solution.y(p, static_cast<Eigen::Index>(cap));
    representation[p] = value;
    k_residual += solution.k(p, static_cast<Eigen::Index>(hit)) - solution.k(p, 0);
  }
  const auto stats = sample_stats(representation);
  SnellResidual out;
  out.representation_mean = stats.mean;
  out.std_error = stats.std_error;
  out.residual = std::abs(solution.y(0, 0) - stats.mean);
  out.k_residual = k_residual / static_cast<double>(m);
  return out;
}

LatticeValue lattice_oracle(const MarkovianProblem& problem) {
  if (problem.path_dependent) throw std::invalid_argument("lattice_oracle: path-dependent inputs are not supported");
  if (!problem.drift || !problem.vol || !problem.terminal) {
    throw std::invalid_argument("lattice_oracle: drift, vol and terminal are required");
  }
  if (problem.exercise_steps < 1 || problem.substeps < 1 || !(problem.t_max > 0)) {
    throw std::invalid_argument("lattice_oracle: need t_max > 0 and at least one step");
  }
  const std::size_t levels = problem.exercise_steps * problem.substeps;
  const double h = problem.t_max / static_cast<double>(levels);
  double dx = problem.dx;
  if (dx <= 0.0) dx = std::abs(problem.vol(0.0, problem.x0)) * std::sqrt(3.0 * h);
  if (!(dx > 0.0)) throw std::invalid_argument("lattice_oracle: zero state spacing; set dx explicitly");

  LatticeValue out;
  out.dx = dx;
  out.h = h;
  out.values.resize(levels + 1);
  auto x_at = [&](std::size_t level, std::size_t j) {
    return problem.x0 + (static_cast<double>(j) - static_cast<double>(level)) * dx;
  };
  auto time_at = [&](std::size_t level) {
    return level == levels ? problem.t_max : static_cast<double>(level) * h;
  };
  {
    Eigen::VectorXd& v = out.values[levels];
    v.resize(static_cast<Eigen::Index>(2 * levels + 1));
    for (std::size_t j = 0; j <= 2 * levels; ++j) {
      const double x = x_at(levels, j);
      double value = problem.terminal(x);
      if (problem.barrier) value = std::max(value, problem.barrier(problem.t_max, x));
      v[static_cast<Eigen::Index>(j)] = value;
    }
  }
  for (std::size_t level = levels; level-- > 0;) {
    const double t = time_at(level);
    const bool exercise = problem.barrier && (level % problem.substeps == 0);
    const Eigen::VectorXd& next = out.values[level + 1];
    Eigen::VectorXd& v = out.values[level];
    v.resize(static_cast<Eigen::Index>(2 * level + 1));
    for (std::size_t j = 0; j <= 2 * level; ++j) {
      const double x = x_at(level, j);
      const double mu = problem.drift(t, x) * h / dx;
      const double var = (problem.vol(t, x) * problem.vol(t, x) * h) / (dx * dx) + mu * mu;
      const double pu = 0.5 * (var + mu);
      const double pd = 0.5 * (var - mu);
      const double pm = 1.0 - pu - pd;
      if (pu < 0.0 || pd < 0.0 || pm < 0.0) {
        throw std::invalid_argument("lattice_oracle: negative branch probability; refine substeps or widen dx");
      }
      // child index in the next level: j (down), j + 1 (middle), j + 2 (up)
      const auto c = static_cast<Eigen::Index>(j);
      double cont = pd * next[c] + pm * next[c + 1] + pu * next[c + 2];
      if (problem.driver) cont += problem.driver(t, x, cont) * h;
      v[c] = exercise ? std::max(problem.barrier(t, x), cont) : cont;
    }
  }
  out.value0 = out.values[0][0];
  return out;
}

}  // namespace rbsde
