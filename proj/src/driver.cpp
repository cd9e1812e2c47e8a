#include "rbsde/driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rbsde/random.hpp"

namespace rbsde {

ControlledFunction breve_a_from(const FsdeCoefficients& coeffs) {
  return [coeffs](const PathPrefix& prefix, const Eigen::VectorXd& alpha) { return coeffs.breve_a(prefix, alpha); };
}

double hamiltonian(const HamiltonianSpec& spec, const ControlSet& control_set, const PathPrefix& prefix,
                   const Eigen::VectorXd& z, const Eigen::VectorXd& alpha) {
  if (!control_set.contains(alpha)) throw std::invalid_argument("hamiltonian: control outside the control set");
  const double running = spec.phi ? spec.phi(prefix, alpha) : 0.0;
  return z.dot(spec.breve_a(prefix, alpha)) + spec.discount(prefix.t) * running;
}

HamiltonianMinimum min_hamiltonian(const HamiltonianSpec& spec, const ControlSet& control_set,
                                   const PathPrefix& prefix, const Eigen::VectorXd& z) {
  const auto& candidates = control_set.candidates();
  if (candidates.empty()) throw std::invalid_argument("min_hamiltonian: empty control set");
  HamiltonianMinimum best{std::numeric_limits<double>::infinity(), candidates.front()};
  for (const auto& alpha : candidates) {
    const double h = hamiltonian(spec, control_set, prefix, z, alpha);
    if (h < best.value) best = {h, alpha};
  }
  std::vector<double> steps(control_set.dim());
  for (std::size_t k = 0; k < steps.size(); ++k) steps[k] = 0.5 * control_set.spacing(k);
  for (std::size_t iter = 0; iter < control_set.refine_iters; ++iter) {
    for (std::size_t k = 0; k < steps.size(); ++k) {
      if (steps[k] == 0.0) continue;
      for (const double sign : {-1.0, 1.0}) {
        Eigen::VectorXd trial = best.argmin;
        trial[static_cast<Eigen::Index>(k)] += sign * steps[k];
        trial = control_set.project(trial);
        const double h = hamiltonian(spec, control_set, prefix, z, trial);
        if (h < best.value) best = {h, trial};
      }
      steps[k] *= 0.5;
    }
  }
  return best;
}

DriverSpec hamiltonian_driver(const HamiltonianSpec& spec, const ControlSet& control_set,
                              const FsdeCoefficients& coeffs) {
  DriverSpec driver;
  driver.f = [spec, control_set](const PathPrefix& prefix, double, const Eigen::VectorXd& z) {
    return min_hamiltonian(spec, control_set, prefix, z).value;
  };
  driver.k_f = 0.0;
  driver.u_f_integral = 0.0;
  driver.y_independent = true;
  driver.lipschitz = [coeffs, control_set](const PathPrefix& prefix) {
    return lipschitz_process(coeffs, control_set, prefix);
  };
  driver.description = "H*(t, z) = min over A of z . breve_a + exp(-rho) phi";
  return driver;
}

DriverSpec truncate_driver(const DriverSpec& spec, std::vector<std::size_t> eta_m_nodes,
                           std::vector<std::size_t> eta_n_nodes) {
  if (eta_m_nodes.size() != eta_n_nodes.size()) {
    throw std::invalid_argument("truncate_driver: eta vectors must cover the same paths");
  }
  auto eta_m = std::make_shared<const std::vector<std::size_t>>(std::move(eta_m_nodes));
  auto eta_n = std::make_shared<const std::vector<std::size_t>>(std::move(eta_n_nodes));
  DriverSpec out = spec;
  out.f = [inner = spec.f, eta_m, eta_n](const PathPrefix& prefix, double y, const Eigen::VectorXd& z) {
    const bool positive_alive = prefix.node <= (*eta_m)[prefix.path];
    const bool negative_alive = prefix.node <= (*eta_n)[prefix.path];
    if (!positive_alive && !negative_alive) return 0.0;
    const double v = inner(prefix, y, z);
    if (v >= 0.0) return positive_alive ? v : 0.0;
    return negative_alive ? v : 0.0;
  };
  out.description = spec.description + " [truncated]";
  return out;
}

DriverReport validate_driver(const DriverSpec& spec, const PathBundle& bundle, std::size_t budget,
                             std::uint64_t seed, double y_scale, double z_scale) {
  if (budget == 0) throw std::invalid_argument("validate_driver: budget must be >= 1");
  DriverReport report;
  const RandomStream stream(seed, 0);
  const auto d = static_cast<Eigen::Index>(bundle.dim());
  std::uint64_t draw = 0;
  auto uniform_index = [&](std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(stream.uniform(draw++) * static_cast<double>(n)));
  };
  auto normal = [&](double scale) { return scale * stream.normal(draw++); };
  constexpr double kTol = 1e-9;
  for (std::size_t s = 0; s < budget; ++s) {
    const std::size_t p = uniform_index(bundle.n_paths());
    const std::size_t i = uniform_index(bundle.n_nodes());
    const auto prefix = bundle.prefix(p, i);
    DriverReport::Witness w{p, i, normal(y_scale), normal(y_scale), Eigen::VectorXd(d), Eigen::VectorXd(d)};
    for (Eigen::Index k = 0; k < d; ++k) w.z[k] = normal(z_scale);
    for (Eigen::Index k = 0; k < d; ++k) w.z_prime[k] = normal(z_scale);
    const double f_yz = spec(prefix, w.y, w.z);
    const double f_pp = spec(prefix, w.y_prime, w.z_prime);
    const double f_pz = spec(prefix, w.y_prime, w.z);
    const double dy = w.y_prime - w.y;
    const double lip_excess =
        std::abs(f_pp - f_yz) - (spec.k_f * std::abs(dy) + spec.lipschitz_at(prefix) * (w.z_prime - w.z).norm());
    const double growth_excess = (f_pz - f_yz) * dy - spec.u(prefix.t) * dy * dy;
    if (!std::isfinite(lip_excess) || lip_excess > kTol) {
      report.lipschitz_ok = false;
      if (!report.lipschitz_witness || lip_excess > report.worst_lipschitz_violation) report.lipschitz_witness = w;
    }
    if (!std::isfinite(growth_excess) || growth_excess > kTol) {
      report.growth_ok = false;
      if (!report.growth_witness || growth_excess > report.worst_growth_violation) report.growth_witness = w;
    }
    report.worst_lipschitz_violation = std::max(report.worst_lipschitz_violation, lip_excess);
    report.worst_growth_violation = std::max(report.worst_growth_violation, growth_excess);
    ++report.samples;
  }
  return report;
}

HamiltonianReport validate_hamiltonian(const HamiltonianSpec& spec, const ControlSet& control_set,
                                       const PathBundle& bundle) {
  HamiltonianReport report;
  if (spec.rho(0.0) != 0.0) report.rho_ok = false;
  const auto& grid = bundle.grid();
  for (std::size_t i = 1; i < grid.n_nodes(); ++i) {
    if (spec.rho(grid.time(i)) < spec.rho(grid.time(i - 1))) report.rho_ok = false;
  }
  auto ratio = [](double value, double bound) {
    if (bound > 0) return value / bound;
    return value > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    for (std::size_t i = 0; i < bundle.n_nodes(); ++i) {
      const auto prefix = bundle.prefix(p, i);
      const double growth = 1.0 + std::pow(prefix.running_sup, spec.q);
      if (spec.phi) {
        for (const auto& alpha : control_set.candidates()) {
          const double v = std::abs(spec.phi(prefix, alpha));
          report.worst_phi_ratio = std::max(report.worst_phi_ratio, ratio(v, spec.cg_phi * growth));
          if (v > spec.cg_phi * growth + 1e-9) report.phi_growth_ok = false;
        }
      }
      if (spec.psi) {
        const double v = std::abs(spec.psi(prefix));
        report.worst_psi_ratio = std::max(report.worst_psi_ratio, ratio(v, spec.cg_psi * growth));
        if (v > spec.cg_psi * growth + 1e-9) report.psi_growth_ok = false;
      }
    }
  }
  return report;
}

RhoAdmissibility rho_admissible(const std::function<double(double)>& rho, double q, double cg_a,
                                std::span<const double> probes) {
  RhoAdmissibility out;
  if (rho(0.0) != 0.0) {
    out.reason = "rho(0) must be 0";
    return out;
  }
  std::vector<double> times(probes.begin(), probes.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.size() < 2) throw std::invalid_argument("rho_admissible: need at least two distinct probe times");
  std::vector<double> values(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) values[i] = rho(times[i]);
  double eps = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (std::size_t j = i + 1; j < times.size(); ++j) {
      eps = std::min(eps, (values[j] - values[i]) / (times[j] - times[i]) - q * cg_a);
    }
  }
  out.epsilon = eps;
  out.valid = eps > 0.0;
  if (!out.valid) out.reason = "rho grows no faster than q * C_a on the probe set";
  return out;
}

std::vector<double> default_rho_probes(double horizon, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = horizon * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

TailIntegrand TailIntegrand::growth_form(const HamiltonianSpec& spec) {
  auto weight = [rho = spec.rho, q = spec.q](const PathPrefix& prefix) {
    return std::exp(-rho(prefix.t)) * (1.0 + std::pow(prefix.running_sup, q));
  };
  return {[weight, c = spec.cg_phi](const PathPrefix& prefix) { return c == 0.0 ? 0.0 : c * weight(prefix); },
          [weight, c = spec.cg_psi](const PathPrefix& prefix) { return c == 0.0 ? 0.0 : c * weight(prefix); }};
}

TailIntegrand TailIntegrand::driver_mass(const DriverSpec& driver, std::function<double(const PathPrefix&)> barrier) {
  return {[driver](const PathPrefix& prefix) {
            const Eigen::VectorXd zero = Eigen::VectorXd::Zero(prefix.x.size());
            return std::abs(driver(prefix, 0.0, zero));
          },
          [barrier = std::move(barrier)](const PathPrefix& prefix) {
            return barrier ? std::max(barrier(prefix), 0.0) : 0.0;
          }};
}

TailProcesses estimate_tails(const TailIntegrand& integrand, const std::vector<DriftPerturbation>& family,
                             const std::vector<const PathBundle*>& bundles, const RegressionBasis& basis,
                             std::span<const std::size_t> probe_nodes) {
  if (family.empty() || family.size() != bundles.size()) {
    throw std::invalid_argument("estimate_tails: one bundle per family member required");
  }
  if (probe_nodes.empty()) throw std::invalid_argument("estimate_tails: no probe nodes");
  const PathBundle& reference = *bundles.front();
  if (family.front().zeta(reference.prefix(0, 0)).norm() != 0.0) {
    throw std::invalid_argument("estimate_tails: the first family member must be the zero perturbation");
  }
  for (const auto* b : bundles) {
    if (!(b->grid() == reference.grid()) || b->n_paths() != reference.n_paths()) {
      throw std::invalid_argument("estimate_tails: bundles must share grid and path count");
    }
  }
  TailProcesses out;
  out.grid_ = std::make_shared<const TimeGrid>(reference.grid());
  out.probe_nodes_.assign(probe_nodes.begin(), probe_nodes.end());
  std::sort(out.probe_nodes_.begin(), out.probe_nodes_.end());
  for (const auto& member : family) out.family_.push_back(member.name);

  const auto& grid = reference.grid();
  const std::size_t n_nodes = grid.n_nodes();
  const auto m = static_cast<Eigen::Index>(reference.n_paths());
  for (const auto* bundle : bundles) {
    // suffix sums of the running mass and suffix maxima of the barrier part, per path
    PathMatrix running_suffix(m, static_cast<Eigen::Index>(n_nodes));
    PathMatrix barrier_suffix(m, static_cast<Eigen::Index>(n_nodes));
    for (Eigen::Index p = 0; p < m; ++p) {
      double acc = 0.0;
      double sup = 0.0;
      for (std::size_t i = n_nodes; i-- > 0;) {
        const auto prefix = bundle->prefix(static_cast<std::size_t>(p), i);
        if (i + 1 < n_nodes) acc += integrand.running(prefix) * grid.dt();
        sup = std::max(sup, integrand.barrier(prefix));
        running_suffix(p, static_cast<Eigen::Index>(i)) = acc;
        barrier_suffix(p, static_cast<Eigen::Index>(i)) = sup;
      }
    }
    std::vector<RegressionFit> fits;
    for (const std::size_t node : out.probe_nodes_) {
      Eigen::MatrixXd targets(m, 2);
      targets.col(0) = running_suffix.col(static_cast<Eigen::Index>(node));
      targets.col(1) = barrier_suffix.col(static_cast<Eigen::Index>(node));
      fits.push_back(basis.fit(*bundle, node, targets));
    }
    out.fits_.push_back(std::move(fits));
  }

  const auto n_probes = static_cast<Eigen::Index>(out.probe_nodes_.size());
  out.reference_kf_.resize(m, n_probes);
  out.reference_ks_.resize(m, n_probes);
  for (Eigen::Index p = 0; p < m; ++p) {
    for (Eigen::Index j = 0; j < n_probes; ++j) {
      const auto prefix = reference.prefix(static_cast<std::size_t>(p), out.probe_nodes_[static_cast<std::size_t>(j)]);
      out.reference_kf_(p, j) = out.evaluate(prefix, 0);
      out.reference_ks_(p, j) = out.evaluate(prefix, 1);
    }
  }
  out.kf_const_ = out.tail_sup(0.0, 0);
  out.ks_const_ = out.tail_sup(0.0, 1);
  return out;
}

double TailProcesses::evaluate(const PathPrefix& prefix, std::size_t target) const {
  auto it = std::upper_bound(probe_nodes_.begin(), probe_nodes_.end(), prefix.node);
  const std::size_t probe = (it == probe_nodes_.begin()) ? 0 : static_cast<std::size_t>(it - probe_nodes_.begin()) - 1;
  double best = 0.0;
  for (const auto& member : fits_) best = std::max(best, member[probe].evaluate(prefix, target));
  return best;
}

double TailProcesses::kf_bar(const PathPrefix& prefix) const { return evaluate(prefix, 0); }
double TailProcesses::ks_bar(const PathPrefix& prefix) const { return evaluate(prefix, 1); }

double TailProcesses::tail_sup(double horizon, std::size_t target) const {
  const PathMatrix& values = target == 0 ? reference_kf_ : reference_ks_;
  double acc = 0.0;
  for (Eigen::Index p = 0; p < values.rows(); ++p) {
    double sup = 0.0;
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (grid_->time(probe_nodes_[static_cast<std::size_t>(j)]) >= horizon - 1e-12) sup = std::max(sup, values(p, j));
    }
    acc += sup * sup;
  }
  return std::sqrt(acc / static_cast<double>(values.rows()));
}

double TailProcesses::kf_tail_sup(double horizon) const { return tail_sup(horizon, 0); }
double TailProcesses::ks_tail_sup(double horizon) const { return tail_sup(horizon, 1); }

std::vector<DriftPerturbation> standard_perturbation_family(const FsdeCoefficients& coeffs,
                                                            const ControlSet& control_set) {
  std::vector<DriftPerturbation> family;
  const auto d = static_cast<Eigen::Index>(coeffs.dim());
  family.push_back({"zero", [d](const PathPrefix&) { return Eigen::VectorXd::Zero(d).eval(); }, true});
  for (Eigen::Index j = 0; j < d; ++j) {
    for (const double sign : {1.0, -1.0}) {
      family.push_back({(sign > 0 ? "+L e" : "-L e") + std::to_string(j),
                        [coeffs, control_set, d, j, sign](const PathPrefix& prefix) {
                          Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
                          z[j] = sign * lipschitz_process(coeffs, control_set, prefix);
                          return z;
                        },
                        true});
    }
  }
  return family;
}

}  // namespace rbsde
