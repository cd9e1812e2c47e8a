#pragma once

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbsde/forward.hpp"
#include "rbsde/regression.hpp"

namespace rbsde {

using DriverFunction = std::function<double(const PathPrefix&, double y, const Eigen::VectorXd& z)>;

/// Driver f(t, X, y, z) together with the constants of its Lipschitz / monotonicity bounds:
///   |f(y',z') - f(y,z)| <= k_f |y'-y| + L_t |z'-z|,   (f(y',z) - f(y,z))(y'-y) <= u_f(t) |y'-y|^2.
struct DriverSpec {
  DriverFunction f;
  double k_f = 0.0;
  std::function<double(double)> u_f;  ///< empty means u_f == 0
  double u_f_integral = 0.0;          ///< declared integral of u_f over [0, inf)
  std::function<double(const PathPrefix&)> lipschitz;  ///< L_t; empty means L == 0
  bool y_independent = false;
  std::string description;

  double operator()(const PathPrefix& prefix, double y, const Eigen::VectorXd& z) const { return f(prefix, y, z); }
  double u(double t) const { return u_f ? u_f(t) : 0.0; }
  double lipschitz_at(const PathPrefix& prefix) const { return lipschitz ? lipschitz(prefix) : 0.0; }
};

/// Ingredients of the robust stopping Hamiltonian
///   H(t, X, z, alpha) = z . breve_a(t, X, alpha) + exp(-rho(t)) phi(t, X, alpha).
struct HamiltonianSpec {
  std::function<double(const PathPrefix&, const Eigen::VectorXd&)> phi;
  std::function<double(const PathPrefix&)> psi;
  std::function<double(double)> rho;
  double q = 0.0;
  double cg_phi = 0.0;
  double cg_psi = 0.0;
  ControlledFunction breve_a;

  double discount(double t) const { return std::exp(-rho(t)); }
};

/// breve_a taken from the FSDE block structure.
ControlledFunction breve_a_from(const FsdeCoefficients& coeffs);

double hamiltonian(const HamiltonianSpec& spec, const ControlSet& control_set, const PathPrefix& prefix,
                   const Eigen::VectorXd& z, const Eigen::VectorXd& alpha);

struct HamiltonianMinimum {
  double value = 0.0;
  Eigen::VectorXd argmin;
};

/// Deterministic measurable selector: grid search over the control set, then `refine_iters`
/// rounds of coordinate refinement with halving steps. Ties go to the lexicographically
/// smallest candidate; `value` is exactly hamiltonian(..., argmin).
HamiltonianMinimum min_hamiltonian(const HamiltonianSpec& spec, const ControlSet& control_set,
                                   const PathPrefix& prefix, const Eigen::VectorXd& z);

/// f(t, y, z) = H*(t, z): y-free, k_f = u_f = 0, Lipschitz process from the control grid.
DriverSpec hamiltonian_driver(const HamiltonianSpec& spec, const ControlSet& control_set,
                              const FsdeCoefficients& coeffs);

/// f^{m,n} = 1_{[0,eta_m]} f^+ - 1_{[0,eta_n]} f^-, pathwise with the truncation nodes of each path.
DriverSpec truncate_driver(const DriverSpec& spec, std::vector<std::size_t> eta_m_nodes,
                           std::vector<std::size_t> eta_n_nodes);

struct DriverReport {
  bool lipschitz_ok = true;
  bool growth_ok = true;
  double worst_lipschitz_violation = 0.0;
  double worst_growth_violation = 0.0;
  std::size_t samples = 0;
  struct Witness {
    std::size_t path = 0;
    std::size_t node = 0;
    double y = 0, y_prime = 0;
    Eigen::VectorXd z, z_prime;
  };
  std::optional<Witness> lipschitz_witness;
  std::optional<Witness> growth_witness;
  bool ok() const { return lipschitz_ok && growth_ok; }
};

/// Samples (path, node, y, y', z, z') and checks both driver inequalities to 1e-9 absolute.
DriverReport validate_driver(const DriverSpec& spec, const PathBundle& bundle, std::size_t budget,
                             std::uint64_t seed, double y_scale = 10.0, double z_scale = 3.0);

struct HamiltonianReport {
  bool phi_growth_ok = true;
  bool psi_growth_ok = true;
  bool rho_ok = true;  ///< rho(0) = 0 and nondecreasing on the sampled nodes
  double worst_phi_ratio = 0.0;
  double worst_psi_ratio = 0.0;
  bool ok() const { return phi_growth_ok && psi_growth_ok && rho_ok; }
};
HamiltonianReport validate_hamiltonian(const HamiltonianSpec& spec, const ControlSet& control_set,
                                       const PathBundle& bundle);

struct RhoAdmissibility {
  bool valid = false;
  double epsilon = 0.0;
  std::string reason;
};

/// eps = inf over probe pairs s < t of (rho(t) - rho(s)) / (t - s) - q C_a; valid iff eps > 0.
RhoAdmissibility rho_admissible(const std::function<double(double)>& rho, double q, double cg_a,
                                std::span<const double> probes);
std::vector<double> default_rho_probes(double horizon, std::size_t count = 101);

/// What the tail processes bound.
struct TailIntegrand {
  /// Running mass at (prefix): growth form C_phi e^{-rho}(1 + sup|X|^q) or |f(t, X, 0, 0)|.
  std::function<double(const PathPrefix&)> running;
  /// Barrier part at (prefix): C_psi e^{-rho}(1 + sup|X|^q) or S^+.
  std::function<double(const PathPrefix&)> barrier;

  static TailIntegrand growth_form(const HamiltonianSpec& spec);
  static TailIntegrand driver_mass(const DriverSpec& driver, std::function<double(const PathPrefix&)> barrier);
};

/// Estimated K^f_t = esssup_Q E^Q[int_t^inf running ds | F_t] and K^S_t = esssup_Q E^Q[sup_{s>=t} barrier | F_t]
/// on a set of probe nodes. The esssup is replaced by a max over a finite perturbation family,
/// so the values are a lower proxy. Integrals stop at the bundle horizon.
class TailProcesses {
 public:
  double kf_bar(const PathPrefix& prefix) const;
  double ks_bar(const PathPrefix& prefix) const;

  /// (mean over reference paths of sup_{probe s >= T} K_s^2)^{1/2}.
  double kf_tail_sup(double horizon) const;
  double ks_tail_sup(double horizon) const;

  double kf_const() const { return kf_const_; }
  double ks_const() const { return ks_const_; }
  const std::vector<std::string>& family() const { return family_; }
  const std::vector<std::size_t>& probe_nodes() const { return probe_nodes_; }
  const TimeGrid& grid() const { return *grid_; }
  bool is_proxy() const { return true; }

 private:
  friend TailProcesses estimate_tails(const TailIntegrand&, const std::vector<DriftPerturbation>&,
                                      const std::vector<const PathBundle*>&, const RegressionBasis&,
                                      std::span<const std::size_t>);
  double evaluate(const PathPrefix& prefix, std::size_t target) const;
  double tail_sup(double horizon, std::size_t target) const;

  std::shared_ptr<const TimeGrid> grid_;
  std::vector<std::string> family_;
  std::vector<std::size_t> probe_nodes_;
  std::vector<std::vector<RegressionFit>> fits_;  // [member][probe]
  PathMatrix reference_kf_;                       // reference paths x probes
  PathMatrix reference_ks_;
  double kf_const_ = 0.0;
  double ks_const_ = 0.0;
};

/// `bundles[j]` must be simulated under `family[j]` on a common grid and seed; family[0] must be
/// the zero perturbation (its bundle is the reference measure).
TailProcesses estimate_tails(const TailIntegrand& integrand, const std::vector<DriftPerturbation>& family,
                             const std::vector<const PathBundle*>& bundles, const RegressionBasis& basis,
                             std::span<const std::size_t> probe_nodes);

/// {zeta = 0, zeta = +-L e_j}: the finite stand-in for the measure class with |zeta| <= L.
std::vector<DriftPerturbation> standard_perturbation_family(const FsdeCoefficients& coeffs,
                                                            const ControlSet& control_set);

}  // namespace rbsde
