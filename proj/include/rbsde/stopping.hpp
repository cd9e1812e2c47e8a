#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbsde/driver.hpp"
#include "rbsde/forward.hpp"
#include "rbsde/horizon.hpp"

namespace rbsde {

/// Robust stopping: maximize over stopping times tau the worst case over controls alpha of
///   J(tau, alpha) = E^alpha[ int_0^tau e^{-rho(t)} phi(t, X, alpha_t) dt + e^{-rho(tau)} psi(tau, X) ].
struct RobustStoppingProblem {
  FsdeCoefficients coeffs;
  HamiltonianSpec ham;  ///< breve_a is filled from coeffs when empty
  ControlSet control_set;
  TruncationSchedule schedule;
};

/// Raised by build_rbsde; `report` is a JSON document describing the failed check.
class ProblemRejected : public std::invalid_argument {
 public:
  ProblemRejected(const std::string& what, std::string report)
      : std::invalid_argument(what), report_(std::move(report)) {}
  const std::string& report() const { return report_; }

 private:
  std::string report_;
};

struct BuildOptions {
  std::size_t validation_paths = 64;
  std::size_t validation_steps = 100;
  std::uint64_t validation_seed = 0x5eed;
  std::size_t driver_samples = 500;
};

/// Hamiltonian with breve_a filled in from the coefficients.
HamiltonianSpec completed_hamiltonian(const RobustStoppingProblem& problem);

/// Driver H*, barrier e^{-rho} psi. Rejects inadmissible rho and failed coefficient, reward or
/// driver validators.
InfiniteProblem build_rbsde(const RobustStoppingProblem& problem, const BuildOptions& options = {});

/// Tail processes of the growth-form integrands under the standard perturbation family, estimated
/// on [0, horizon] with `n_probes` probe nodes.
std::shared_ptr<const TailProcesses> estimate_robust_tails(const RobustStoppingProblem& problem,
                                                           const RegressionBasis& basis, const TimeGrid& grid,
                                                           std::size_t n_paths, std::uint64_t seed,
                                                           std::size_t n_probes = 9);

/// Rule deciding at a node whether to stop, from the path prefix alone.
using StoppingRule = std::function<bool(const PathPrefix&)>;

/// Y = S under the solver's hitting tolerance.
inline bool hits_barrier(double y, double s, double tol) { return y - s <= tol * (1.0 + std::abs(s)); }

/// (tau*, alpha*) as feedback maps evaluable on fresh paths of the solver grid. On a fresh path
/// Y_i is rebuilt as E[V_{i+1} | F_i] + H*(Z_i) dt from the stored regression fits.
struct PolicyPair {
  StoppingRule stop_rule;
  ControlPolicy control;  ///< alpha*(prefix) = control_map(prefix, Z surrogate(prefix))
  std::function<Eigen::VectorXd(const PathPrefix&, const Eigen::VectorXd&)> control_map;
  std::shared_ptr<const RbsdeSolution> solution;
  TimeGrid grid;
  double hit_tolerance = 1e-6;
};

/// Rejects solutions whose convergence report failed.
PolicyPair extract_pair(const InfiniteSolution& solution, const RobustStoppingProblem& problem,
                        double hit_tolerance = 1e-6);

struct ValueEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  double horizon_used = 0.0;
  double unstopped_fraction = 0.0;  ///< paths reaching the horizon without stopping
  double tail_bound = 0.0;          ///< proxy of the reward mass beyond the horizon (not added)
};

/// Direct simulation of X^alpha on `grid`, stopping at the first node where the rule fires.
/// Unstopped paths collect the running reward only.
ValueEstimate evaluate_J(const RobustStoppingProblem& problem, const StoppingRule& stop, const ControlPolicy& control,
                         const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed);
ValueEstimate evaluate_J(const RobustStoppingProblem& problem, const PolicyPair& pair, std::size_t n_paths,
                         std::uint64_t seed);

struct NamedStoppingRule {
  std::string name;
  StoppingRule rule;
};
struct NamedControl {
  std::string name;
  ControlPolicy policy;
};

/// Five seeded rules: stop at t = 0, t = 0.5, t = 2, and two random thresholds on e^{-rho} psi.
std::vector<NamedStoppingRule> standard_stopping_challengers(const RobustStoppingProblem& problem,
                                                             std::uint64_t seed);
/// Constant controls on the control grid, at most 9 (evenly thinned when the grid is larger).
std::vector<NamedControl> constant_control_challengers(const ControlSet& control_set);

struct ChallengerResult {
  std::string name;
  std::string kind;  ///< "stopping" or "control"
  double mean = 0.0;
  double std_error = 0.0;
  double bound = 0.0;  ///< Y_0 (stopping) or J(tau*, alpha*) (control)
  double band = 0.0;
  bool exceeded = false;
};

struct SaddleReport {
  double y0 = 0.0;
  double y0_std_error = 0.0;
  ValueEstimate optimal;
  double slack = 0.0;
  double value_gap = 0.0;  ///< |Y_0 - J(tau*, alpha*)|
  double value_band = 0.0;
  bool value_ok = false;
  std::vector<ChallengerResult> challengers;
  std::size_t exceedances = 0;
  double max_exceedance_fraction = 0.05;
  bool gate = false;
};

/// Value consistency plus one-sided dominance against the challengers, all evaluated with common
/// random numbers from `seed`. Bands are 3 (combined stderr + slack) + 1e-9.
SaddleReport saddle_check(const RobustStoppingProblem& problem, const InfiniteSolution& solution,
                          const PolicyPair& pair, const std::vector<NamedStoppingRule>& stopping_challengers,
                          const std::vector<NamedControl>& control_challengers, std::size_t n_paths,
                          std::uint64_t seed, double slack);

/// |Y_0 - Y_0'| with Y_0' solved at the final levels on `coarse` (same horizon, coarser grid).
double estimate_dt_slack(const InfiniteProblem& problem, const TruncationSchedule& schedule, const PathBundle& coarse,
                         const RegressionBasis& basis, double y0, const SolverConfig& config = {});

}  // namespace rbsde
