#include "rbsde/stopping.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "rbsde/random.hpp"

namespace rbsde {

HamiltonianSpec completed_hamiltonian(const RobustStoppingProblem& problem) {
  HamiltonianSpec ham = problem.ham;
  if (!ham.breve_a) ham.breve_a = breve_a_from(problem.coeffs);
  return ham;
}

InfiniteProblem build_rbsde(const RobustStoppingProblem& problem, const BuildOptions& options) {
  const HamiltonianSpec ham = completed_hamiltonian(problem);
  if (!ham.rho || !ham.phi || !ham.psi) throw std::invalid_argument("build_rbsde: rho, phi and psi are required");
  problem.coeffs.check_shapes();
  problem.schedule.validate();

  const auto probes = default_rho_probes(problem.schedule.t_solve);
  const auto rho = rho_admissible(ham.rho, ham.q, problem.coeffs.cg_a, probes);
  if (!rho.valid) {
    nlohmann::json report{{"check", "rho_admissible"}, {"epsilon", rho.epsilon}, {"reason", rho.reason}};
    throw ProblemRejected("build_rbsde: discount rate is not admissible (" + rho.reason + ")", report.dump());
  }

  const TimeGrid grid = build_grid(problem.schedule.t_solve, options.validation_steps);
  const PathBundle bundle = simulate_driftless(problem.coeffs, grid, options.validation_paths, options.validation_seed);
  const auto coeff = validate_coefficients(problem.coeffs, problem.control_set, bundle);
  if (!coeff.ok()) {
    nlohmann::json report{{"check", "coefficients"},
                          {"drift_growth_ok", coeff.drift_growth_ok},
                          {"sigma_growth_ok", coeff.sigma_growth_ok},
                          {"sigma22_inverse_ok", coeff.sigma22_inverse_ok},
                          {"lipschitz_growth_ok", coeff.lipschitz_growth_ok},
                          {"witness", {{"path", coeff.witness_path}, {"node", coeff.witness_node}}}};
    throw ProblemRejected("build_rbsde: coefficient validation failed", report.dump());
  }
  const auto rewards = validate_hamiltonian(ham, problem.control_set, bundle);
  if (!rewards.ok()) {
    nlohmann::json report{{"check", "rewards"},
                          {"phi_growth_ok", rewards.phi_growth_ok},
                          {"psi_growth_ok", rewards.psi_growth_ok},
                          {"rho_ok", rewards.rho_ok},
                          {"worst_phi_ratio", rewards.worst_phi_ratio},
                          {"worst_psi_ratio", rewards.worst_psi_ratio}};
    throw ProblemRejected("build_rbsde: reward validation failed", report.dump());
  }

  InfiniteProblem out;
  out.driver = hamiltonian_driver(ham, problem.control_set, problem.coeffs);
  const auto drv = validate_driver(out.driver, bundle, options.driver_samples, options.validation_seed + 1);
  if (!drv.ok()) {
    nlohmann::json report{{"check", "driver"},
                          {"lipschitz_ok", drv.lipschitz_ok},
                          {"growth_ok", drv.growth_ok},
                          {"worst_lipschitz_violation", drv.worst_lipschitz_violation},
                          {"worst_growth_violation", drv.worst_growth_violation}};
    throw ProblemRejected("build_rbsde: driver validation failed", report.dump());
  }
  out.barrier = [rho = ham.rho, psi = ham.psi](const PathPrefix& prefix) {
    return std::exp(-rho(prefix.t)) * psi(prefix);
  };
  return out;
}

std::shared_ptr<const TailProcesses> estimate_robust_tails(const RobustStoppingProblem& problem,
                                                           const RegressionBasis& basis, const TimeGrid& grid,
                                                           std::size_t n_paths, std::uint64_t seed,
                                                           std::size_t n_probes) {
  if (n_probes < 2) throw std::invalid_argument("estimate_robust_tails: need at least two probes");
  const auto family = standard_perturbation_family(problem.coeffs, problem.control_set);
  std::vector<PathBundle> bundles;
  bundles.reserve(family.size());
  for (const auto& member : family) bundles.push_back(simulate_perturbed(problem.coeffs, member, grid, n_paths, seed));
  std::vector<const PathBundle*> ptrs;
  for (const auto& b : bundles) ptrs.push_back(&b);
  std::vector<std::size_t> probes;
  for (std::size_t j = 0; j < n_probes; ++j) {
    const std::size_t node = (grid.n_steps() * j) / (n_probes - 1);
    if (probes.empty() || node != probes.back()) probes.push_back(node);
  }
  return std::make_shared<const TailProcesses>(
      estimate_tails(TailIntegrand::growth_form(completed_hamiltonian(problem)), family, ptrs, basis, probes));
}

PolicyPair extract_pair(const InfiniteSolution& solution, const RobustStoppingProblem& problem, double hit_tolerance) {
  if (!solution.report.converged) {
    std::string why;
    for (const auto& f : solution.report.failures) why += (why.empty() ? "" : "; ") + f;
    throw std::invalid_argument("extract_pair: infinite-horizon solve did not converge: " + why);
  }
  const HamiltonianSpec ham = completed_hamiltonian(problem);
  auto sol = std::make_shared<const RbsdeSolution>(solution.limit);
  const ControlSet cs = problem.control_set;
  PolicyPair pair;
  pair.solution = sol;
  pair.grid = sol->grid;
  pair.hit_tolerance = hit_tolerance;
  pair.control_map = [ham, cs](const PathPrefix& prefix, const Eigen::VectorXd& z) {
    return cs.project(min_hamiltonian(ham, cs, prefix, z).argmin);
  };
  pair.control = [sol, map = pair.control_map](const PathPrefix& prefix) {
    return map(prefix, sol->z_surrogate(prefix));
  };
  pair.stop_rule = [sol, ham, cs, hit_tolerance](const PathPrefix& prefix) {
    const double s = std::exp(-ham.rho(prefix.t)) * ham.psi(prefix);
    if (prefix.node >= sol->grid.n_steps()) return s >= 0.0;
    const double y = sol->continuation(prefix) +
                     min_hamiltonian(ham, cs, prefix, sol->z_surrogate(prefix)).value * sol->grid.dt();
    return hits_barrier(std::max(y, s), s, hit_tolerance);
  };
  return pair;
}

ValueEstimate evaluate_J(const RobustStoppingProblem& problem, const StoppingRule& stop, const ControlPolicy& control,
                         const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) {
  if (!stop || !control) throw std::invalid_argument("evaluate_J: stopping rule and control are required");
  const HamiltonianSpec ham = completed_hamiltonian(problem);
  PathMatrix controls;
  const PathBundle bundle =
      simulate_controlled(problem.coeffs, problem.control_set, control, grid, n_paths, seed, &controls);
  const auto k = static_cast<Eigen::Index>(problem.control_set.dim());
  const std::size_t n = grid.n_steps();
  const double dt = grid.dt();
  Eigen::VectorXd reward(static_cast<Eigen::Index>(n_paths));
  std::size_t unstopped = 0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    double acc = 0.0;
    bool stopped = false;
    for (std::size_t i = 0; i <= n; ++i) {
      const auto prefix = bundle.prefix(p, i);
      if (stop(prefix)) {
        acc += std::exp(-ham.rho(prefix.t)) * ham.psi(prefix);
        stopped = true;
        break;
      }
      if (i == n) break;
      const Eigen::VectorXd alpha =
          controls.row(static_cast<Eigen::Index>(p)).segment(static_cast<Eigen::Index>(i) * k, k).transpose();
      acc += std::exp(-ham.rho(prefix.t)) * ham.phi(prefix, alpha) * dt;
    }
    if (!stopped) ++unstopped;
    reward[static_cast<Eigen::Index>(p)] = acc;
  }
  const auto stats = sample_stats(reward);
  ValueEstimate out;
  out.mean = stats.mean;
  out.std_error = stats.std_error;
  out.n_paths = n_paths;
  out.horizon_used = grid.t_max();
  out.unstopped_fraction = static_cast<double>(unstopped) / static_cast<double>(n_paths);
  out.tail_bound = problem.schedule.tails ? problem.schedule.tails->kf_tail_sup(grid.t_max()) : 0.0;
  return out;
}

ValueEstimate evaluate_J(const RobustStoppingProblem& problem, const PolicyPair& pair, std::size_t n_paths,
                         std::uint64_t seed) {
  return evaluate_J(problem, pair.stop_rule, pair.control, pair.grid, n_paths, seed);
}

std::vector<NamedStoppingRule> standard_stopping_challengers(const RobustStoppingProblem& problem,
                                                             std::uint64_t seed) {
  const HamiltonianSpec ham = completed_hamiltonian(problem);
  std::vector<NamedStoppingRule> out;
  for (const double c : {0.0, 0.5, 2.0}) {
    out.push_back({"stop at t=" + std::to_string(c).substr(0, 3), [c](const PathPrefix& prefix) {
                     return prefix.t >= c - 1e-12;
                   }});
  }
  // thresholds sit 10-50% of the reward scale above the starting barrier level
  Eigen::VectorXd x0 = problem.coeffs.x0;
  const PathPrefix start(0, 0, 0.0, x0.data(), x0.size(), x0.norm());
  const double s0 = std::exp(-ham.rho(0.0)) * ham.psi(start);
  const RandomStream stream(seed, 0);
  for (std::uint64_t j = 0; j < 2; ++j) {
    const double theta = s0 + (0.1 + 0.4 * stream.uniform(j)) * std::max({std::abs(s0), ham.cg_psi, 1e-3});
    out.push_back({"threshold " + std::to_string(theta), [theta, ham](const PathPrefix& prefix) {
                     return std::exp(-ham.rho(prefix.t)) * ham.psi(prefix) >= theta;
                   }});
  }
  return out;
}

std::vector<NamedControl> constant_control_challengers(const ControlSet& control_set) {
  const auto& candidates = control_set.candidates();
  std::vector<NamedControl> out;
  const std::size_t count = std::min<std::size_t>(9, candidates.size());
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t idx = count == 1 ? 0 : (j * (candidates.size() - 1)) / (count - 1);
    const Eigen::VectorXd alpha = candidates[idx];
    std::string name = "alpha=(";
    for (Eigen::Index c = 0; c < alpha.size(); ++c) name += (c ? "," : "") + std::to_string(alpha[c]);
    out.push_back({name + ")", [alpha](const PathPrefix&) { return alpha; }});
  }
  return out;
}

namespace {
// absorbs floating-point reassociation between the solver and forward evaluation
constexpr double kRoundingFloor = 1e-9;
}  // namespace

SaddleReport saddle_check(const RobustStoppingProblem& problem, const InfiniteSolution& solution,
                          const PolicyPair& pair, const std::vector<NamedStoppingRule>& stopping_challengers,
                          const std::vector<NamedControl>& control_challengers, std::size_t n_paths,
                          std::uint64_t seed, double slack) {
  SaddleReport report;
  report.y0 = solution.limit.y0.mean;
  report.y0_std_error = solution.limit.y0.std_error;
  report.slack = slack;
  report.optimal = evaluate_J(problem, pair, n_paths, seed);
  report.value_gap = std::abs(report.y0 - report.optimal.mean);
  report.value_band = 3.0 * (std::hypot(report.y0_std_error, report.optimal.std_error) + slack) + kRoundingFloor;
  report.value_ok = report.value_gap <= report.value_band;

  for (const auto& c : stopping_challengers) {
    const auto v = evaluate_J(problem, c.rule, pair.control, pair.grid, n_paths, seed);
    ChallengerResult r{c.name, "stopping", v.mean, v.std_error, report.y0, 0.0, false};
    r.band = 3.0 * (std::hypot(report.y0_std_error, v.std_error) + slack) + kRoundingFloor;
    r.exceeded = v.mean > report.y0 + r.band;
    report.challengers.push_back(r);
  }
  for (const auto& c : control_challengers) {
    const auto v = evaluate_J(problem, pair.stop_rule, c.policy, pair.grid, n_paths, seed);
    ChallengerResult r{c.name, "control", v.mean, v.std_error, report.optimal.mean, 0.0, false};
    r.band = 3.0 * (std::hypot(report.optimal.std_error, v.std_error) + slack) + kRoundingFloor;
    r.exceeded = v.mean < report.optimal.mean - r.band;
    report.challengers.push_back(r);
  }
  for (const auto& r : report.challengers) report.exceedances += r.exceeded ? 1 : 0;
  const double allowed = report.max_exceedance_fraction * static_cast<double>(report.challengers.size());
  report.gate = report.value_ok && static_cast<double>(report.exceedances) <= allowed;
  return report;
}

double estimate_dt_slack(const InfiniteProblem& problem, const TruncationSchedule& schedule, const PathBundle& coarse,
                         const RegressionBasis& basis, double y0, const SolverConfig& config) {
  TruncationSchedule untailed = schedule;
  untailed.tails.reset();
  const auto sol = solve_truncated(problem, schedule.levels_m.back(), schedule.levels_n.back(), untailed, coarse,
                                   basis, config);
  return std::abs(sol.y0.mean - y0);
}

}  // namespace rbsde
