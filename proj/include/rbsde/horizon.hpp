#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbsde/driver.hpp"
#include "rbsde/rbsde.hpp"

namespace rbsde {

/// Data of the infinite-horizon problem: Y_t = int_t^inf f ds - int_t^inf Z dW + K_inf - K_t, Y >= S.
struct InfiniteProblem {
  DriverSpec driver;
  PathFunctional barrier;  ///< empty disables reflection
};

struct TruncationSchedule {
  std::vector<double> levels_m;
  std::vector<double> levels_n;
  std::vector<double> levels_l;
  double t_solve = 10.0;
  double tol = 1e-2;
  std::shared_ptr<const TailProcesses> tails;  ///< optional; estimated on a horizon >= t_solve

  /// Throws std::invalid_argument on empty levels, tol <= 0 or t_solve < max level.
  void validate() const;
  double max_level() const;
  /// Same schedule on twice the horizon with every level doubled.
  TruncationSchedule doubled() const;
};

/// Raised when the tail mass beyond t_solve exceeds the tolerance.
class TailError : public std::runtime_error {
 public:
  TailError(const std::string& what, double estimate, double recommended_t_solve)
      : std::runtime_error(what), estimate_(estimate), recommended_(recommended_t_solve) {}
  double estimate() const { return estimate_; }
  double recommended_t_solve() const { return recommended_; }

 private:
  double estimate_;
  double recommended_;
};

/// L_t of the driver on every (path, node) of a bundle.
PathMatrix driver_lipschitz_matrix(const DriverSpec& driver, const PathBundle& bundle);

/// K^f + K^S proxy tail at t_solve, when the schedule carries tail processes (0 otherwise).
double schedule_tail(const TruncationSchedule& schedule);

/// Finite-horizon solve on [0, t_solve] of the equation with driver f^{m,n} and terminal value 0.
/// The bundle grid must end at t_solve. The barrier may exceed 0 at t_solve by at most schedule.tol.
RbsdeSolution solve_truncated(const InfiniteProblem& problem, double m, double n, const TruncationSchedule& schedule,
                              const PathBundle& bundle, const RegressionBasis& basis,
                              const SolverConfig& config = {});

struct MonotoneCheck {
  bool ok = true;
  double worst_violation = 0.0;  ///< max over consecutive pairs and nodes of mean(Y^{n'} - Y^{n}) - band
  double max_pathwise_increase = 0.0;
  std::vector<double> y0;
};

/// Y^{m,n_{k+1}} <= Y^{m,n_k} + 1e-6 + 3 stderr, node by node (mean over paths of the difference).
MonotoneCheck check_monotone_in_n(const std::vector<const RbsdeSolution*>& solutions);

/// (mean over paths of max_{i <= eta_l} |Y^a_i - Y^b_i|^2)^{1/2}.
double check_cauchy(const RbsdeSolution& a, const RbsdeSolution& b, const std::vector<std::size_t>& eta_l_nodes);

struct LevelEntry {
  double m = 0.0;
  double n = 0.0;
  double y0 = 0.0;
  double std_error = 0.0;
};

struct CauchyEntry {
  double l = 0.0;
  double n = 0.0;
  double n_prime = 0.0;
  double value = 0.0;
};

struct ConvergenceReport {
  std::vector<LevelEntry> y0_by_level;
  std::vector<CauchyEntry> cauchy;  ///< consecutive n pairs at the largest m, for every l
  bool monotone_n_ok = true;
  double monotone_worst_violation = 0.0;
  double cauchy_final = 0.0;  ///< max over l at the last n pair
  double tail_estimate = 0.0;
  bool tail_from_proxy = false;  ///< true when TailProcesses supplied the estimate
  double y0_doubled = 0.0;
  double y0_doubled_std_error = 0.0;
  double doubling_gap = 0.0;
  bool doubling_ok = true;
  double terminal_sup = 0.0;  ///< (mean sup_{[T/2, T]} |Y|^2)^{1/2}
  bool terminal_decay_ok = true;
  double t_solve = 0.0;
  double tol = 0.0;
  bool converged = false;
  std::vector<std::string> failures;
};

struct InfiniteSolution {
  RbsdeSolution limit;
  PathBundle bundle;
  ConvergenceReport report;
};

/// Simulates a bundle on [0, t_max] at a fixed step size.
using BundleFactory = std::function<PathBundle(double t_max)>;

/// Solves the truncated family on the (m, n) table, checks monotonicity in n, the Cauchy property on
/// [0, eta_l], tail decay beyond t_solve and stability of Y_0 under one doubling of the horizon.
/// The last (m, n) solve is returned as the limit; `report.converged` is false if any check fails.
InfiniteSolution solve_infinite(const InfiniteProblem& problem, const TruncationSchedule& schedule,
                                const BundleFactory& factory, const RegressionBasis& basis,
                                const SolverConfig& config = {});

/// Snell representation on [0, eta_l] and K-flatness of the limit solution.
SnellResidual snell_checks(const RbsdeSolution& solution, const PathBundle& bundle, const DriverSpec& driver,
                           double l, double hit_tolerance = 1e-6);

}  // namespace rbsde
