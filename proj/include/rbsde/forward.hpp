#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbsde/norms.hpp"
#include "rbsde/path_bundle.hpp"
#include "rbsde/time_grid.hpp"

namespace rbsde {

using StateFunction = std::function<Eigen::VectorXd(const PathPrefix&)>;
using ControlledFunction = std::function<Eigen::VectorXd(const PathPrefix&, const Eigen::VectorXd&)>;
using MatrixFunction = std::function<Eigen::MatrixXd(const PathPrefix&)>;
using ControlPolicy = std::function<Eigen::VectorXd(const PathPrefix&)>;

/// Coefficients of the controlled functional SDE
///   dX = a(t, X, alpha) dt + sigma(t, X) dW,   a = (a1, a2),   sigma = [s11 0; s21 s22].
/// The first block (dimension dim1) is uncontrolled; the control enters only through a2.
struct FsdeCoefficients {
  std::size_t dim1 = 0;
  std::size_t dim2 = 1;
  StateFunction a1;         ///< R^{dim1}; unused when dim1 == 0
  ControlledFunction a2;    ///< R^{dim2}
  MatrixFunction sigma11;   ///< dim1 x dim1
  MatrixFunction sigma21;   ///< dim2 x dim1
  MatrixFunction sigma22;   ///< dim2 x dim2, invertible
  double sigma22_inv_bound = 1.0;
  double cg_a = 0.0;
  std::function<double(double)> cg_sigma;
  double lip_x = 0.0;
  double k_L = 0.0;
  Eigen::VectorXd x0;

  std::size_t dim() const { return dim1 + dim2; }

  Eigen::MatrixXd sigma(const PathPrefix& prefix) const;
  /// (a1, 0): drift of X under the reference measure.
  Eigen::VectorXd drift_tilde(const PathPrefix& prefix) const;
  /// (a1, a2(alpha)): drift of the controlled state.
  Eigen::VectorXd drift(const PathPrefix& prefix, const Eigen::VectorXd& alpha) const;
  /// (0, s22^{-1} a2(alpha)): the z-coefficient of the Hamiltonian.
  Eigen::VectorXd breve_a(const PathPrefix& prefix, const Eigen::VectorXd& alpha) const;

  /// Throws std::invalid_argument when the block layout or x0 is inconsistent.
  void check_shapes() const;
};

/// Box control set A = [lower, upper] searched on a tensor grid.
struct ControlSet {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::size_t grid_points_per_dim = 21;
  std::size_t refine_iters = 0;

  ControlSet() = default;
  ControlSet(Eigen::VectorXd lo, Eigen::VectorXd hi, std::size_t points = 21, std::size_t refine = 0);

  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
  bool contains(const Eigen::VectorXd& alpha, double tol = 1e-12) const;
  Eigen::VectorXd project(const Eigen::VectorXd& alpha) const;
  /// Number of grid points along coordinate k (1 when the interval is degenerate).
  std::size_t points_along(std::size_t k) const;
  double spacing(std::size_t k) const;
  /// Tensor grid in lexicographic order (first coordinate slowest).
  const std::vector<Eigen::VectorXd>& candidates() const { return candidates_; }

 private:
  std::vector<Eigen::VectorXd> candidates_;
};

/// Drift perturbation zeta used to probe the measure class {Q^zeta : |zeta| <= L}.
struct DriftPerturbation {
  std::string name;
  StateFunction zeta;
  bool bound_by_L = true;
};

class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::size_t path, std::size_t node)
      : std::runtime_error(what), path_(path), node_(node) {}
  std::size_t path() const { return path_; }
  std::size_t node() const { return node_; }

 private:
  std::size_t path_;
  std::size_t node_;
};

/// Euler-Maruyama paths of dX = (a1, 0) dt + sigma dW.
PathBundle simulate_driftless(const FsdeCoefficients& coeffs, const TimeGrid& grid, std::size_t n_paths,
                              std::uint64_t seed);

/// Euler-Maruyama paths of dX = a(t, X, alpha_t) dt + sigma dW with alpha_t = policy(prefix).
/// When `controls_out` is given it receives the applied controls (M rows, N*k columns).
PathBundle simulate_controlled(const FsdeCoefficients& coeffs, const ControlSet& control_set,
                               const ControlPolicy& policy, const TimeGrid& grid, std::size_t n_paths,
                               std::uint64_t seed, PathMatrix* controls_out = nullptr);

/// Paths of X under Q^zeta: dX = ((a1, 0) + sigma zeta) dt + sigma dW.
PathBundle simulate_perturbed(const FsdeCoefficients& coeffs, const DriftPerturbation& perturbation,
                              const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed);

/// L_t = max over the control grid of |breve_a(t, X, alpha)|.
double lipschitz_process(const FsdeCoefficients& coeffs, const ControlSet& control_set, const PathPrefix& prefix);
PathMatrix lipschitz_matrix(const FsdeCoefficients& coeffs, const ControlSet& control_set, const PathBundle& bundle);

struct TruncationTime {
  std::size_t node = 0;
  double time = 0.0;
};

/// eta_l = inf{s : L_s >= l} ^ l, snapped to grid nodes (cap: last node <= l, at most N).
TruncationTime truncation_time(std::span<const double> lipschitz_row, double level, const TimeGrid& grid);
/// Node of eta_l for every path of an L matrix.
std::vector<std::size_t> truncation_nodes(const PathMatrix& lipschitz, double level, const TimeGrid& grid);

/// exp(sum zeta . dW - 1/2 sum |zeta|^2 dt) over the steps before time T, per path.
Eigen::VectorXd doleans_exponential(const PathBundle& bundle, const StateFunction& zeta, double horizon);

/// Mean over paths of sup_{t_i <= T} |X_{t_i}|^p, with its standard error.
SampleStats empirical_moment(const PathBundle& bundle, double p, double horizon);

/// Least-squares line through (T, log moment). The slope is compared against p C_a + eps.
struct MomentGrowthFit {
  double slope = 0.0;
  double intercept = 0.0;
};
MomentGrowthFit fit_moment_growth(std::span<const double> horizons, std::span<const double> moments);

/// Sampled checks of the growth, block and inverse-bound conditions on the coefficients.
struct CoefficientReport {
  bool drift_growth_ok = true;
  bool sigma_growth_ok = true;
  bool sigma22_inverse_ok = true;
  bool lipschitz_growth_ok = true;
  double worst_drift_ratio = 0.0;   ///< max |a| / (C_a (1 + sup|x|))
  double worst_sigma_ratio = 0.0;   ///< max |sigma| / C_sigma(t)
  double worst_inverse_norm = 0.0;  ///< max |s22^{-1}|
  double worst_lipschitz_ratio = 0.0;
  std::size_t witness_path = 0;
  std::size_t witness_node = 0;
  bool ok() const { return drift_growth_ok && sigma_growth_ok && sigma22_inverse_ok && lipschitz_growth_ok; }
};
CoefficientReport validate_coefficients(const FsdeCoefficients& coeffs, const ControlSet& control_set,
                                        const PathBundle& bundle);

/// Flat CSV with columns path,node,coordinate,value,dw (dw empty at the last node), after a
/// "# t_max=..,n_steps=..,n_paths=..,dim=..,seed=..[,config_hash=..]" line.
void write_bundle_csv(const PathBundle& bundle, const std::string& path, const std::string& config_hash = "");
PathBundle read_bundle_csv(const std::string& path);

}  // namespace rbsde
