#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbsde/driver.hpp"
#include "rbsde/norms.hpp"
#include "rbsde/path_bundle.hpp"
#include "rbsde/regression.hpp"

namespace rbsde {

using PathFunctional = std::function<double(const PathPrefix&)>;

/// Finite-horizon reflected BSDE data (xi, f, S) on a grid.
///   Y_t = xi + int_t^T f ds - int_t^T Z dW + K_T - K_t,  Y >= S,  int (Y - S) dK = 0.
/// An empty barrier (or one returning -infinity) disables reflection.
struct RbsdeProblem {
  DriverSpec driver;
  PathFunctional barrier;
  PathFunctional terminal;  ///< evaluated on the prefix at the last node
  TimeGrid grid;

  bool has_barrier() const { return static_cast<bool>(barrier); }
  double barrier_at(const PathPrefix& prefix) const {
    return barrier ? barrier(prefix) : -std::numeric_limits<double>::infinity();
  }
};

inline constexpr double kNoBarrier = -std::numeric_limits<double>::infinity();

struct SolverConfig {
  /// What node i regresses on. Fitted: Y_{i+1} (adapted values, upward max-bias).
  /// Realized: the pathwise value V_{i+1} of following the scheme's own stopping decisions,
  /// V_i = S_i where Y_i = S_i and V_{i+1} + f_i dt otherwise.
  enum class Target { Realized, Fitted };
  Target target = Target::Realized;
  std::size_t inner_sweeps = 3;
  bool reflect = true;
  /// Y = S is declared when |Y - S| <= hit_tolerance * (1 + |S|).
  double hit_tolerance = 1e-6;
  /// Allowed S_T - xi before the problem is rejected.
  double terminal_tolerance = 1e-8;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::size_t node) : std::runtime_error(what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

/// (Y, Z, K) on a bundle, with the per-node regression fits that produced them.
struct RbsdeSolution {
  TimeGrid grid;
  std::size_t dim = 1;
  PathMatrix y{};              ///< M x (N+1)
  PathMatrix z{};              ///< M x (N*d)
  PathMatrix k{};              ///< M x (N+1), cumulative, k(., 0) = 0
  PathMatrix dk{};             ///< M x N
  PathMatrix barrier{};        ///< M x (N+1), -inf where reflection is disabled
  PathMatrix driver_values{};  ///< M x N, f(t_i, Y~_i, Z_i) used in the step
  /// Fit at node i: column 0 is E[Y_{i+1} | F_i], columns 1..d are E[Y_{i+1} dW_i | F_i].
  std::vector<RegressionFit> fits{};
  SampleStats y0{};
  NormDiagnostics y_norms{}, z_norms{}, k_norms{};
  double skorokhod_residual = 0.0;

  Eigen::VectorXd z_at(std::size_t p, std::size_t i) const {
    return z.row(static_cast<Eigen::Index>(p)).segment(static_cast<Eigen::Index>(i * dim), static_cast<Eigen::Index>(dim)).transpose();
  }
  /// Continuation value and Z at node i for an arbitrary prefix (fresh paths).
  double continuation(const PathPrefix& prefix) const { return fits[prefix.node].evaluate(prefix, 0); }
  Eigen::VectorXd z_surrogate(const PathPrefix& prefix) const;
  double min_gap() const;  ///< min over (path, node) of Y - S
};

/// Backward induction with discrete reflection:
///   Z_i = E[Y_{i+1} dW_i | F_i] / dt,  Y~_i = E[U_{i+1} | F_i] + f(t_i, Y~_i, Z_i) dt (fixed-point sweeps),
///   Y_i = max(Y~_i, S_i),  dK_i = Y_i - Y~_i,
/// with U = Y or U = V according to config.target.
/// At the last node Y_N = max(xi, S_N); S_N may exceed xi by at most config.terminal_tolerance.
RbsdeSolution solve_reflected(const RbsdeProblem& problem, const PathBundle& bundle, const RegressionBasis& basis,
                              const SolverConfig& config = {});

/// Same scheme with the reflection step skipped; K == 0.
RbsdeSolution solve_unreflected(const RbsdeProblem& problem, const PathBundle& bundle, const RegressionBasis& basis,
                                SolverConfig config = {});

struct StabilityDiff {
  double dy = 0.0;  ///< S^2 norm of Y~ - Y
  double dz = 0.0;  ///< H^2 norm of Z~ - Z
  double dk = 0.0;  ///< S^2 norm of K~ - K
};
StabilityDiff stability_probe(const RbsdeProblem& problem, const RbsdeProblem& perturbed, const PathBundle& bundle,
                              const RegressionBasis& basis, const SolverConfig& config = {});
StabilityDiff solution_difference(const RbsdeSolution& a, const RbsdeSolution& b);

/// First node >= start with Y = S under the hitting tolerance, or `cap` if none before it.
std::size_t first_hitting_node(const RbsdeSolution& solution, std::size_t path, std::size_t start, std::size_t cap,
                               double hit_tolerance = 1e-6);

struct SnellResidual {
  double representation_mean = 0.0;
  double std_error = 0.0;
  double residual = 0.0;    ///< |Y_0 - mean representation|
  double k_residual = 0.0;  ///< mean (K_{D_0} - K_0)
};

/// Checks Y_0 = E[sum_{i < D ^ cap} f_i dt + 1_{D < cap} S_D + 1_{D >= cap} Y_cap] and K_{D_0} = K_0,
/// with D the first hitting node. `cap_nodes` empty means cap = N on every path.
SnellResidual snell_residual(const RbsdeSolution& solution, std::span<const std::size_t> cap_nodes,
                             double hit_tolerance = 1e-6);

/// One-dimensional Markovian problem for the lattice oracle.
struct MarkovianProblem {
  std::function<double(double t, double x)> drift;
  std::function<double(double t, double x)> vol;
  std::function<double(double t, double x, double y)> driver;  ///< empty means 0
  std::function<double(double t, double x)> barrier;           ///< empty means no reflection
  std::function<double(double x)> terminal;
  double x0 = 0.0;
  double t_max = 1.0;
  std::size_t exercise_steps = 50;  ///< reflection dates t_i = i T / exercise_steps
  std::size_t substeps = 1;         ///< tree levels per exercise interval
  double dx = 0.0;                  ///< state spacing; 0 picks vol(0, x0) sqrt(3 h)
  bool path_dependent = false;      ///< set by callers that cannot guarantee Markovian inputs
};

struct LatticeValue {
  double value0 = 0.0;
  double dx = 0.0;
  double h = 0.0;
  std::vector<Eigen::VectorXd> values;  ///< values[level](j), j = 0..2*level, x = x0 + (j - level) dx
};

/// Backward DP on a recombining trinomial tree matched to the local mean and variance:
///   V_level(x) = max(S, E_tree[V_{level+1}] + f h) on exercise levels, without the max otherwise.
LatticeValue lattice_oracle(const MarkovianProblem& problem);

}  // namespace rbsde
