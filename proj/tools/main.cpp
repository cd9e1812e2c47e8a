#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"

#include "config.hpp"
#include "rbsde/io.hpp"

using namespace rbsde;
using rbsde::cli::ConfigError;
using rbsde::cli::ExperimentConfig;

namespace {

constexpr int kOk = 0;
constexpr int kGateFailure = 1;
constexpr int kConfigError = 2;

struct Output {
  const ExperimentConfig& cfg;
  std::filesystem::path dir;

  std::string file(const std::string& name) const { return (dir / name).string(); }

  Json stanza() const {
    return {{"seed", cfg.seed},
            {"eval_seed", eval_seed()},
            {"config_hash", cfg.hash},
            {"pipeline", cfg.pipeline}};
  }
  std::uint64_t eval_seed() const { return cfg.numerics.eval_seed == 0 ? cfg.seed + 1 : cfg.numerics.eval_seed; }

  void summary(Json body, int exit_code) const {
    body["pipeline"] = cfg.pipeline;
    body["exit_code"] = exit_code;
    body["reproducibility"] = stanza();
    std::ofstream out(file("summary.json"));
    out << std::setprecision(17) << body.dump(2) << "\n";
  }
};

// First `count` paths of a bundle, for CSV export.
PathBundle head(const PathBundle& bundle, std::size_t count) {
  const std::size_t m = std::min(count == 0 ? bundle.n_paths() : count, bundle.n_paths());
  PathBundle out(bundle.grid(), m, bundle.dim(), bundle.seed());
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t i = 0; i < bundle.n_nodes(); ++i) {
      out.state(p, i) = bundle.state(p, i);
      out.running_sup(p, i) = bundle.running_sup(p, i);
      if (i < bundle.grid().n_steps()) out.dw(p, i) = bundle.dw(p, i);
    }
  }
  return out;
}

TimeGrid solve_grid(const ExperimentConfig& cfg) { return build_grid(cfg.numerics.t_max, cfg.numerics.n_steps); }

BundleFactory factory_for(const ExperimentConfig& cfg) {
  const double dt = cfg.numerics.schedule->t_solve / static_cast<double>(cfg.numerics.n_steps);
  return [coeffs = cfg.coeffs, dt, m = cfg.numerics.n_paths, seed = cfg.seed](double t_max) {
    const auto steps = static_cast<std::size_t>(std::llround(t_max / dt));
    return simulate_driftless(coeffs, build_grid(t_max, steps), m, seed);
  };
}

int simulate_forward(const ExperimentConfig& cfg, const Output& out) {
  const TimeGrid grid = solve_grid(cfg);
  const PathBundle bundle = simulate_driftless(cfg.coeffs, grid, cfg.numerics.n_paths, cfg.seed);
  write_bundle_csv(head(bundle, cfg.numerics.csv_paths), out.file("bundle.csv"), cfg.hash);

  const auto d = static_cast<Eigen::Index>(bundle.dim());
  const auto m = static_cast<double>(bundle.n_paths());
  {
    std::ofstream csv(out.file("moments.csv"));
    csv << std::setprecision(17) << "# config_hash=" << cfg.hash << "\nnode,t";
    for (Eigen::Index k = 0; k < d; ++k) csv << ",mean_x" << k << ",var_x" << k;
    csv << "\n";
    for (std::size_t i = 0; i < bundle.n_nodes(); ++i) {
      csv << i << ',' << grid.time(i);
      for (Eigen::Index k = 0; k < d; ++k) {
        const auto stats = sample_stats(bundle.coordinate(i, static_cast<std::size_t>(k)));
        csv << ',' << stats.mean << ',' << stats.stddev * stats.stddev;
      }
      csv << "\n";
    }
  }
  Json dw = Json::array();
  for (Eigen::Index k = 0; k < d; ++k) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
      for (std::size_t i = 0; i < grid.n_steps(); ++i) {
        const double w = bundle.dw(p, i)[k];
        sum += w;
        sq += w * w;
      }
    }
    const double count = m * static_cast<double>(grid.n_steps());
    dw.push_back({{"mean", sum / count}, {"variance", sq / count - (sum / count) * (sum / count)}, {"dt", grid.dt()}});
  }
  const auto moment = empirical_moment(bundle, 2.0, grid.t_max());
  Json terminal = Json::array();
  for (Eigen::Index k = 0; k < d; ++k) terminal.push_back(to_json(sample_stats(bundle.coordinate(grid.n_steps(), static_cast<std::size_t>(k)))));
  out.summary({{"n_paths", bundle.n_paths()},
               {"n_steps", grid.n_steps()},
               {"t_max", grid.t_max()},
               {"terminal_state", terminal},
               {"sup_moment_p2", to_json(moment)},
               {"increments", dw}},
              kOk);
  return kOk;
}

int solve_rbsde(const ExperimentConfig& cfg, const Output& out) {
  RbsdeProblem problem;
  problem.grid = solve_grid(cfg);
  problem.driver = *cfg.driver;
  if (cfg.barrier) problem.barrier = cfg.barrier->fn;
  problem.terminal = cfg.terminal ? cfg.terminal->fn : PathFunctional([](const PathPrefix&) { return 0.0; });
  const PathBundle bundle = simulate_driftless(cfg.coeffs, problem.grid, cfg.numerics.n_paths, cfg.seed);
  const RbsdeSolution sol = solve_reflected(problem, bundle, cfg.basis(), cfg.numerics.solver);
  write_solution_csv(sol, out.file("solution.csv"), cfg.hash, cfg.numerics.csv_paths);
  const auto snell = snell_residual(sol, {}, cfg.numerics.solver.hit_tolerance);
  out.summary({{"solution", solution_summary(sol)}, {"snell", to_json(snell)}, {"driver", problem.driver.description}},
              kOk);
  return kOk;
}

int solve_infinite_cmd(const ExperimentConfig& cfg, const Output& out) {
  InfiniteProblem problem{*cfg.driver, cfg.barrier ? cfg.barrier->fn : PathFunctional{}};
  const auto& schedule = *cfg.numerics.schedule;
  const auto result = solve_infinite(problem, schedule, factory_for(cfg), cfg.basis(), cfg.numerics.solver);
  write_solution_csv(result.limit, out.file("solution.csv"), cfg.hash, cfg.numerics.csv_paths);
  write_convergence_csv(result.report, out.file("convergence.csv"), cfg.hash);
  const auto snell = snell_checks(result.limit, result.bundle, problem.driver, schedule.levels_l.back(),
                                  cfg.numerics.solver.hit_tolerance);
  const int code = result.report.converged ? kOk : kGateFailure;
  out.summary({{"y0", result.limit.y0.mean},
               {"y0_std_error", result.limit.y0.std_error},
               {"solution", solution_summary(result.limit)},
               {"convergence", to_json(result.report)},
               {"snell", to_json(snell)}},
              code);
  return code;
}

int robust_stop(const ExperimentConfig& cfg, const Output& out) {
  RobustStoppingProblem problem = cfg.robust_problem();
  InfiniteProblem rbsde;
  try {
    rbsde = build_rbsde(problem, cfg.build_options());
  } catch (const ProblemRejected& e) {
    out.summary({{"rejected", e.what()}, {"report", Json::parse(e.report())}}, kGateFailure);
    std::cerr << Json{{"error", "rejected"}, {"message", e.what()}, {"report", Json::parse(e.report())}}.dump() << "\n";
    return kGateFailure;
  }
  const RegressionBasis basis = cfg.basis();
  const auto& n = cfg.numerics;
  const double dt = problem.schedule.t_solve / static_cast<double>(n.n_steps);
  if (n.tail_paths > 0) {
    const double horizon = 2.0 * problem.schedule.t_solve;
    const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
    problem.schedule.tails =
        estimate_robust_tails(problem, basis, build_grid(horizon, steps), n.tail_paths, cfg.seed + 2, n.tail_probes);
  }
  const auto result = solve_infinite(rbsde, problem.schedule, factory_for(cfg), basis, n.solver);
  write_convergence_csv(result.report, out.file("convergence.csv"), cfg.hash);
  Json body{{"y0", result.limit.y0.mean},
            {"y0_std_error", result.limit.y0.std_error},
            {"convergence", to_json(result.report)}};
  if (problem.schedule.tails) {
    body["tails"] = {{"kf_tail_sup", problem.schedule.tails->kf_tail_sup(problem.schedule.t_solve)},
                     {"ks_tail_sup", problem.schedule.tails->ks_tail_sup(problem.schedule.t_solve)},
                     {"family", problem.schedule.tails->family()},
                     {"proxy", true}};
  }
  if (!result.report.converged) {
    out.summary(body, kGateFailure);
    return kGateFailure;
  }
  const PolicyPair pair = extract_pair(result, problem, n.solver.hit_tolerance);
  const PathBundle coarse = simulate_driftless(cfg.coeffs, build_grid(problem.schedule.t_solve, n.n_steps / 2),
                                               n.n_paths, cfg.seed);
  const double slack = estimate_dt_slack(rbsde, problem.schedule, coarse, basis, result.limit.y0.mean, n.solver);
  const auto report =
      saddle_check(problem, result, pair, standard_stopping_challengers(problem, n.challenger_seed),
                   constant_control_challengers(problem.control_set), n.eval_paths, out.eval_seed(), slack);
  write_saddle_csv(report, out.file("saddle.csv"), cfg.hash);
  body["saddle"] = to_json(report);
  const int code = report.gate ? kOk : kGateFailure;
  out.summary(body, code);
  return code;
}

int validate(const ExperimentConfig& cfg, const Output& out) {
  RobustStoppingProblem problem;
  problem.coeffs = cfg.coeffs;
  problem.control_set = cfg.control_set;
  problem.ham = *cfg.ham;
  const double horizon = cfg.numerics.schedule ? cfg.numerics.schedule->t_solve : cfg.numerics.t_max;
  const TimeGrid grid = build_grid(horizon, cfg.numerics.n_steps);
  const PathBundle bundle = simulate_driftless(cfg.coeffs, grid, cfg.numerics.validation_paths, cfg.seed);
  const auto coeff = validate_coefficients(cfg.coeffs, cfg.control_set, bundle);
  const HamiltonianSpec ham = completed_hamiltonian(problem);
  const auto rewards = validate_hamiltonian(ham, cfg.control_set, bundle);
  const DriverSpec driver = cfg.driver ? *cfg.driver : hamiltonian_driver(ham, cfg.control_set, cfg.coeffs);
  const auto drv = validate_driver(driver, bundle, cfg.numerics.driver_samples, cfg.seed + 3);
  const auto rho = rho_admissible(ham.rho, ham.q, cfg.coeffs.cg_a, default_rho_probes(horizon));
  const bool ok = coeff.ok() && rewards.ok() && drv.ok() && rho.valid;
  const int code = ok ? kOk : kGateFailure;
  out.summary({{"all_pass", ok},
               {"coefficients", to_json(coeff)},
               {"rewards", to_json(rewards)},
               {"driver", to_json(drv)},
               {"rho", to_json(rho)}},
              code);
  return code;
}

int oracle_compare(const ExperimentConfig& cfg, const Output& out) {
  const auto& c = cfg.coeffs;
  if (c.dim() != 1) throw ConfigError("/problem", "oracle-compare needs a one-dimensional state");
  if (cfg.driver->lipschitz) throw ConfigError("/problem/driver", "oracle-compare needs a z-free driver");
  if ((cfg.barrier && !cfg.barrier->markovian) || (cfg.terminal && !cfg.terminal->markovian)) {
    throw ConfigError("/problem", "oracle-compare rejects path-dependent barrier or terminal forms");
  }
  auto prefix_at = [](double t, const double& x) { return PathPrefix(0, 0, t, &x, 1, std::abs(x)); };
  MarkovianProblem mp;
  const Eigen::VectorXd zero_control = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.control_set.dim()));
  mp.drift = [c, prefix_at](double t, double x) { return c.drift_tilde(prefix_at(t, x))[0]; };
  mp.vol = [c, prefix_at](double t, double x) { return c.sigma(prefix_at(t, x))(0, 0); };
  mp.driver = [f = cfg.driver->f, prefix_at](double t, double x, double y) {
    return f(prefix_at(t, x), y, Eigen::VectorXd::Zero(1));
  };
  if (cfg.barrier) mp.barrier = [b = cfg.barrier->fn, prefix_at](double t, double x) { return b(prefix_at(t, x)); };
  const double t_max = cfg.numerics.t_max;
  mp.terminal = cfg.terminal ? std::function<double(double)>([g = cfg.terminal->fn, prefix_at, t_max](double x) {
                                 return g(prefix_at(t_max, x));
                               })
                             : std::function<double(double)>([](double) { return 0.0; });
  mp.x0 = c.x0[0];
  mp.t_max = t_max;
  mp.exercise_steps = cfg.numerics.n_steps;
  mp.substeps = cfg.numerics.lattice_substeps;
  const auto lattice = lattice_oracle(mp);

  RbsdeProblem problem;
  problem.grid = solve_grid(cfg);
  problem.driver = *cfg.driver;
  if (cfg.barrier) problem.barrier = cfg.barrier->fn;
  problem.terminal = cfg.terminal ? cfg.terminal->fn : PathFunctional([](const PathPrefix&) { return 0.0; });
  const PathBundle bundle = simulate_driftless(c, problem.grid, cfg.numerics.n_paths, cfg.seed);
  const RbsdeSolution sol = solve_reflected(problem, bundle, cfg.basis(), cfg.numerics.solver);
  const auto snell = snell_residual(sol, {}, cfg.numerics.solver.hit_tolerance);
  const double rel = std::abs(sol.y0.mean - lattice.value0) / std::max(std::abs(lattice.value0), 1e-12);
  const bool ok = rel <= cfg.numerics.oracle_tolerance;
  write_solution_csv(sol, out.file("solution.csv"), cfg.hash, cfg.numerics.csv_paths);
  {
    std::ofstream csv(out.file("lattice.csv"));
    csv << std::setprecision(17) << "# config_hash=" << cfg.hash << "\nlevel,x,value\n";
    for (std::size_t lvl = 0; lvl < lattice.values.size(); lvl += mp.substeps) {
      for (Eigen::Index j = 0; j < lattice.values[lvl].size(); ++j) {
        csv << lvl / mp.substeps << ',' << mp.x0 + (static_cast<double>(j) - static_cast<double>(lvl)) * lattice.dx
            << ',' << lattice.values[lvl][j] << '\n';
      }
    }
  }
  const int code = ok ? kOk : kGateFailure;
  out.summary({{"solver", solution_summary(sol)},
               {"lattice_value", lattice.value0},
               {"relative_error", rel},
               {"tolerance", cfg.numerics.oracle_tolerance},
               {"snell", to_json(snell)},
               {"pass", ok}},
              code);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reflected BSDE solver and robust optimal stopping experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::string output_dir;
  std::int64_t seed_override = -1;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate-forward", "simulate the driftless forward SDE and export paths"},
      {"solve-rbsde", "solve a finite-horizon reflected BSDE"},
      {"solve-infinite", "solve the infinite-horizon equation through the truncation schedule"},
      {"robust-stop", "solve the robust stopping problem and run the saddle check"},
      {"validate", "run the assumption validators only"},
      {"oracle-compare", "compare the solver with the lattice oracle on a Markovian problem"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "JSON experiment config")->required();
    sub->add_option("-o,--output", output_dir, "output directory (overrides run.output_dir)");
    sub->add_option("-s,--seed", seed_override, "seed (overrides run.seed)");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string pipeline = app.get_subcommands().front()->get_name();

  try {
    ExperimentConfig cfg = rbsde::cli::load_config(config_path, pipeline);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    std::filesystem::create_directories(cfg.output_dir);
    const Output out{cfg, cfg.output_dir};
    int code = kOk;
    if (pipeline == "simulate-forward") code = simulate_forward(cfg, out);
    if (pipeline == "solve-rbsde") code = solve_rbsde(cfg, out);
    if (pipeline == "solve-infinite") code = solve_infinite_cmd(cfg, out);
    if (pipeline == "robust-stop") code = robust_stop(cfg, out);
    if (pipeline == "validate") code = validate(cfg, out);
    if (pipeline == "oracle-compare") code = oracle_compare(cfg, out);
    std::cout << "wrote " << (out.dir / "summary.json").string() << " (exit " << code << ")\n";
    return code;
  } catch (const ConfigError& e) {
    std::cerr << Json{{"error", "config"}, {"field", e.field()}, {"message", e.message()}}.dump() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "runtime"}, {"message", e.what()}}.dump() << "\n";
    return kGateFailure;
  }
}
