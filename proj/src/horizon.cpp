#include "rbsde/horizon.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rbsde {

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace

double TruncationSchedule::max_level() const {
  double level = 0.0;
  for (const auto* list : {&levels_m, &levels_n, &levels_l}) {
    for (const double v : *list) level = std::max(level, v);
  }
  return level;
}

void TruncationSchedule::validate() const {
  if (levels_m.empty() || levels_n.empty() || levels_l.empty()) {
    throw std::invalid_argument("schedule: levels_m, levels_n and levels_l must be non-empty");
  }
  for (const auto* list : {&levels_m, &levels_n, &levels_l}) {
    for (const double v : *list) {
      if (!(v >= 0.0)) throw std::invalid_argument("schedule: levels must be >= 0");
    }
  }
  if (!(tol > 0.0)) throw std::invalid_argument("schedule: tol must be > 0");
  if (!(t_solve > 0.0)) throw std::invalid_argument("schedule: t_solve must be > 0");
  if (t_solve < max_level() - 1e-12) {
    throw std::invalid_argument("schedule: t_solve = " + fmt(t_solve) + " is below the largest level " +
                                fmt(max_level()));
  }
}

TruncationSchedule TruncationSchedule::doubled() const {
  TruncationSchedule out = *this;
  for (auto* list : {&out.levels_m, &out.levels_n, &out.levels_l}) {
    for (double& v : *list) v *= 2.0;
  }
  out.t_solve *= 2.0;
  return out;
}

PathMatrix driver_lipschitz_matrix(const DriverSpec& driver, const PathBundle& bundle) {
  const auto m = static_cast<Eigen::Index>(bundle.n_paths());
  const std::size_t nodes = bundle.grid().n_nodes();
  PathMatrix out = PathMatrix::Zero(m, static_cast<Eigen::Index>(nodes));
  if (!driver.lipschitz) return out;
  for (Eigen::Index p = 0; p < m; ++p) {
    for (std::size_t i = 0; i < nodes; ++i) {
      out(p, static_cast<Eigen::Index>(i)) = driver.lipschitz(bundle.prefix(static_cast<std::size_t>(p), i));
    }
  }
  return out;
}

double schedule_tail(const TruncationSchedule& schedule) {
  if (!schedule.tails) return 0.0;
  return schedule.tails->kf_tail_sup(schedule.t_solve) + schedule.tails->ks_tail_sup(schedule.t_solve);
}

RbsdeSolution solve_truncated(const InfiniteProblem& problem, double m, double n, const TruncationSchedule& schedule,
                              const PathBundle& bundle, const RegressionBasis& basis, const SolverConfig& config) {
  schedule.validate();
  const auto& grid = bundle.grid();
  if (std::abs(grid.t_max() - schedule.t_solve) > 1e-9 * (1.0 + schedule.t_solve)) {
    throw std::invalid_argument("solve_truncated: bundle horizon " + fmt(grid.t_max()) + " differs from t_solve " +
                                fmt(schedule.t_solve));
  }
  const double tail = schedule_tail(schedule);
  if (tail > schedule.tol) {
    throw TailError("solve_truncated: tail estimate " + fmt(tail) + " beyond t_solve = " + fmt(schedule.t_solve) +
                        " exceeds tol = " + fmt(schedule.tol) + "; raise t_solve to at least " +
                        fmt(2.0 * schedule.t_solve),
                    tail, 2.0 * schedule.t_solve);
  }
  const PathMatrix lip = driver_lipschitz_matrix(problem.driver, bundle);
  RbsdeProblem finite;
  finite.grid = grid;
  finite.driver = truncate_driver(problem.driver, truncation_nodes(lip, m, grid), truncation_nodes(lip, n, grid));
  finite.barrier = problem.barrier;
  finite.terminal = [](const PathPrefix&) { return 0.0; };
  SolverConfig cfg = config;
  cfg.terminal_tolerance = std::max(cfg.terminal_tolerance, schedule.tol);
  return solve_reflected(finite, bundle, basis, cfg);
}

MonotoneCheck check_monotone_in_n(const std::vector<const RbsdeSolution*>& solutions) {
  MonotoneCheck out;
  for (const auto* s : solutions) out.y0.push_back(s->y0.mean);
  for (std::size_t k = 0; k + 1 < solutions.size(); ++k) {
    const auto& lo = *solutions[k];
    const auto& hi = *solutions[k + 1];
    if (!(lo.grid == hi.grid) || lo.y.rows() != hi.y.rows()) {
      throw std::invalid_argument("check_monotone_in_n: solutions must share bundle and grid");
    }
    for (Eigen::Index i = 0; i < lo.y.cols(); ++i) {
      const Eigen::VectorXd diff = hi.y.col(i) - lo.y.col(i);
      const auto stats = sample_stats(diff);
      out.max_pathwise_increase = std::max(out.max_pathwise_increase, diff.maxCoeff());
      const double excess = stats.mean - (1e-6 + 3.0 * stats.std_error);
      out.worst_violation = std::max(out.worst_violation, excess);
      if (excess > 0.0) out.ok = false;
    }
  }
  return out;
}

double check_cauchy(const RbsdeSolution& a, const RbsdeSolution& b, const std::vector<std::size_t>& eta_l_nodes) {
  if (!(a.grid == b.grid) || a.y.rows() != b.y.rows()) {
    throw std::invalid_argument("check_cauchy: solutions must share bundle and grid");
  }
  if (eta_l_nodes.size() != static_cast<std::size_t>(a.y.rows())) {
    throw std::invalid_argument("check_cauchy: one truncation node per path required");
  }
  double acc = 0.0;
  for (Eigen::Index p = 0; p < a.y.rows(); ++p) {
    const auto cap = static_cast<Eigen::Index>(std::min<std::size_t>(eta_l_nodes[static_cast<std::size_t>(p)],
                                                                     a.grid.n_steps()));
    double sup = 0.0;
    for (Eigen::Index i = 0; i <= cap; ++i) sup = std::max(sup, std::abs(a.y(p, i) - b.y(p, i)));
    acc += sup * sup;
  }
  return std::sqrt(acc / static_cast<double>(a.y.rows()));
}

namespace {

// (mean over paths of sup_{t >= from} |Y|^2)^{1/2} and the standard error of the squared sups.
std::pair<double, double> sup_from(const RbsdeSolution& s, double from, double to) {
  const std::size_t lo = s.grid.ceil_index(from);
  const std::size_t hi = s.grid.floor_index(to);
  Eigen::VectorXd sq(s.y.rows());
  for (Eigen::Index p = 0; p < s.y.rows(); ++p) {
    double sup = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) sup = std::max(sup, std::abs(s.y(p, static_cast<Eigen::Index>(i))));
    sq[p] = sup * sup;
  }
  const auto stats = sample_stats(sq);
  const double value = std::sqrt(stats.mean);
  // delta method for the square root
  const double se = value > 0.0 ? stats.std_error / (2.0 * value) : std::sqrt(stats.std_error);
  return {value, se};
}

}  // namespace

InfiniteSolution solve_infinite(const InfiniteProblem& problem, const TruncationSchedule& schedule,
                                const BundleFactory& factory, const RegressionBasis& basis,
                                const SolverConfig& config) {
  schedule.validate();
  ConvergenceReport report;
  report.t_solve = schedule.t_solve;
  report.tol = schedule.tol;

  PathBundle bundle = factory(schedule.t_solve);
  // rows: m, columns: n
  std::vector<std::vector<RbsdeSolution>> table;
  for (const double m : schedule.levels_m) {
    std::vector<RbsdeSolution> row;
    for (const double n : schedule.levels_n) {
      row.push_back(solve_truncated(problem, m, n, schedule, bundle, basis, config));
      report.y0_by_level.push_back({m, n, row.back().y0.mean, row.back().y0.std_error});
    }
    std::vector<const RbsdeSolution*> ptrs;
    for (const auto& s : row) ptrs.push_back(&s);
    const auto mono = check_monotone_in_n(ptrs);
    report.monotone_n_ok = report.monotone_n_ok && mono.ok;
    report.monotone_worst_violation = std::max(report.monotone_worst_violation, mono.worst_violation);
    table.push_back(std::move(row));
  }
  if (!report.monotone_n_ok) report.failures.push_back("Y^{m,n}_0 increases in n beyond the MC band");

  const auto& last_row = table.back();
  const PathMatrix lip = driver_lipschitz_matrix(problem.driver, bundle);
  for (const double l : schedule.levels_l) {
    const auto eta = truncation_nodes(lip, l, bundle.grid());
    for (std::size_t k = 0; k + 1 < last_row.size(); ++k) {
      const double value = check_cauchy(last_row[k], last_row[k + 1], eta);
      report.cauchy.push_back({l, schedule.levels_n[k], schedule.levels_n[k + 1], value});
      if (k + 2 == last_row.size()) report.cauchy_final = std::max(report.cauchy_final, value);
    }
  }
  if (report.cauchy_final > schedule.tol) {
    report.failures.push_back("Cauchy difference " + fmt(report.cauchy_final) + " at the last level pair exceeds tol");
  }

  const RbsdeSolution& limit = last_row.back();
  const TruncationSchedule twice = schedule.doubled();
  PathBundle long_bundle = factory(twice.t_solve);
  TruncationSchedule twice_untailed = twice;
  twice_untailed.tails.reset();
  const RbsdeSolution extended = solve_truncated(problem, twice.levels_m.back(), twice.levels_n.back(),
                                                 twice_untailed, long_bundle, basis, config);
  report.y0_doubled = extended.y0.mean;
  report.y0_doubled_std_error = extended.y0.std_error;
  report.doubling_gap = std::abs(extended.y0.mean - limit.y0.mean);
  const double doubling_band =
      schedule.tol + 3.0 * std::hypot(limit.y0.std_error, extended.y0.std_error);
  report.doubling_ok = report.doubling_gap <= doubling_band;
  if (!report.doubling_ok) report.failures.push_back("Y_0 moved by " + fmt(report.doubling_gap) + " when doubling t_solve");

  double decay_reference = 0.0;
  double decay_se = 0.0;
  if (schedule.tails) {
    report.tail_from_proxy = true;
    report.tail_estimate = schedule_tail(schedule);
    decay_reference = schedule.tails->kf_tail_sup(0.5 * schedule.t_solve) +
                      schedule.tails->ks_tail_sup(0.5 * schedule.t_solve);
  } else {
    report.tail_estimate = sup_from(extended, schedule.t_solve, twice.t_solve).first;
    const auto ref = sup_from(extended, 0.5 * schedule.t_solve, twice.t_solve);
    decay_reference = ref.first;
    decay_se = ref.second;
  }
  if (report.tail_estimate > schedule.tol) {
    report.failures.push_back("tail estimate " + fmt(report.tail_estimate) + " beyond t_solve exceeds tol");
  }
  const auto terminal = sup_from(limit, 0.5 * schedule.t_solve, schedule.t_solve);
  report.terminal_sup = terminal.first;
  report.terminal_decay_ok = terminal.first <= decay_reference + 3.0 * (terminal.second + decay_se) + 1e-12;
  if (!report.terminal_decay_ok) {
    report.failures.push_back("sup |Y| on [t_solve/2, t_solve] = " + fmt(terminal.first) +
                              " exceeds the tail reference " + fmt(decay_reference));
  }

  report.converged = report.failures.empty();
  return {limit, std::move(bundle), std::move(report)};
}

SnellResidual snell_checks(const RbsdeSolution& solution, const PathBundle& bundle, const DriverSpec& driver,
                           double l, double hit_tolerance) {
  const PathMatrix lip = driver_lipschitz_matrix(driver, bundle);
  const auto caps = truncation_nodes(lip, l, bundle.grid());
  return snell_residual(solution, caps, hit_tolerance);
}

}  // namespace rbsde
