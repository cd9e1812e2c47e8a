#include "rbsde/forward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <cinttypes>
#include <cstdio>
#include <sstream>

#include "rbsde/random.hpp"

namespace rbsde {

Eigen::MatrixXd FsdeCoefficients::sigma(const PathPrefix& prefix) const {
  const auto d = static_cast<Eigen::Index>(dim());
  const auto m1 = static_cast<Eigen::Index>(dim1);
  const auto m2 = static_cast<Eigen::Index>(dim2);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  if (m1 > 0) {
    out.topLeftCorner(m1, m1) = sigma11(prefix);
    if (m2 > 0 && sigma21) out.bottomLeftCorner(m2, m1) = sigma21(prefix);
  }
  if (m2 > 0) out.bottomRightCorner(m2, m2) = sigma22(prefix);
  return out;
}

Eigen::VectorXd FsdeCoefficients::drift_tilde(const PathPrefix& prefix) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
  if (dim1 > 0 && a1) out.head(static_cast<Eigen::Index>(dim1)) = a1(prefix);
  return out;
}

Eigen::VectorXd FsdeCoefficients::drift(const PathPrefix& prefix, const Eigen::VectorXd& alpha) const {
  Eigen::VectorXd out = drift_tilde(prefix);
  if (dim2 > 0) out.tail(static_cast<Eigen::Index>(dim2)) = a2(prefix, alpha);
  return out;
}

Eigen::VectorXd FsdeCoefficients::breve_a(const PathPrefix& prefix, const Eigen::VectorXd& alpha) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
  if (dim2 == 0) return out;
  const Eigen::MatrixXd s22 = sigma22(prefix);
  const Eigen::VectorXd a = a2(prefix, alpha);
  if (dim2 == 1) {
    out[static_cast<Eigen::Index>(dim1)] = a[0] / s22(0, 0);
  } else {
    out.tail(static_cast<Eigen::Index>(dim2)) = s22.partialPivLu().solve(a);
  }
  return out;
}

void FsdeCoefficients::check_shapes() const {
  if (dim() == 0) throw std::invalid_argument("fsde: state dimension must be >= 1");
  if (static_cast<std::size_t>(x0.size()) != dim()) {
    throw std::invalid_argument("fsde: x0 has size " + std::to_string(x0.size()) + ", expected " +
                                std::to_string(dim()));
  }
  if (dim1 > 0 && (!a1 || !sigma11)) throw std::invalid_argument("fsde: a1 and sigma11 required when dim1 > 0");
  if (dim2 > 0 && (!a2 || !sigma22)) throw std::invalid_argument("fsde: a2 and sigma22 required when dim2 > 0");
}

ControlSet::ControlSet(Eigen::VectorXd lo, Eigen::VectorXd hi, std::size_t points, std::size_t refine)
    : lower(std::move(lo)), upper(std::move(hi)), grid_points_per_dim(points), refine_iters(refine) {
  if (lower.size() != upper.size()) throw std::invalid_argument("control set: bound sizes differ");
  for (Eigen::Index k = 0; k < lower.size(); ++k) {
    if (!(lower[k] <= upper[k])) throw std::invalid_argument("control set: lower > upper in coordinate " + std::to_string(k));
  }
  const std::size_t k = dim();
  std::vector<std::size_t> index(k, 0);
  while (true) {
    Eigen::VectorXd alpha(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const std::size_t n = points_along(j);
      alpha[jj] = (n == 1) ? lower[jj]
                  : (index[j] + 1 == n)
                      ? upper[jj]
                      : lower[jj] + (upper[jj] - lower[jj]) * static_cast<double>(index[j]) / static_cast<double>(n - 1);
    }
    candidates_.push_back(std::move(alpha));
    std::size_t j = k;
    while (j > 0) {
      --j;
      if (++index[j] < points_along(j)) break;
      index[j] = 0;
      if (j == 0) return;
    }
    if (k == 0) return;
  }
}

bool ControlSet::contains(const Eigen::VectorXd& alpha, double tol) const {
  if (alpha.size() != lower.size()) return false;
  return ((alpha - lower).array() >= -tol).all() && ((upper - alpha).array() >= -tol).all();
}

Eigen::VectorXd ControlSet::project(const Eigen::VectorXd& alpha) const {
  return alpha.cwiseMax(lower).cwiseMin(upper);
}

std::size_t ControlSet::points_along(std::size_t k) const {
  const auto kk = static_cast<Eigen::Index>(k);
  if (upper[kk] == lower[kk]) return 1;
  return std::max<std::size_t>(2, grid_points_per_dim);
}

double ControlSet::spacing(std::size_t k) const {
  const auto n = points_along(k);
  if (n == 1) return 0.0;
  const auto kk = static_cast<Eigen::Index>(k);
  return (upper[kk] - lower[kk]) / static_cast<double>(n - 1);
}

namespace {

template <typename DriftFn>
PathBundle simulate_impl(const FsdeCoefficients& coeffs, const TimeGrid& grid, std::size_t n_paths,
                         std::uint64_t seed, DriftFn&& drift) {
  coeffs.check_shapes();
  const std::size_t d = coeffs.dim();
  const auto dd = static_cast<Eigen::Index>(d);
  PathBundle bundle(grid, n_paths, d, seed);
  const double dt = grid.dt();
  const double sqrt_dt = std::sqrt(dt);
  Eigen::VectorXd next(dd);
  for (std::size_t p = 0; p < n_paths; ++p) {
    const RandomStream stream(seed, p);
    bundle.state(p, 0) = coeffs.x0;
    bundle.running_sup(p, 0) = coeffs.x0.norm();
    std::uint64_t cached_block = std::numeric_limits<std::uint64_t>::max();
    std::array<double, 2> cached{};
    for (std::size_t i = 0; i < grid.n_steps(); ++i) {
      auto dw = bundle.dw(p, i);
      for (std::size_t k = 0; k < d; ++k) {
        const std::uint64_t j = i * d + k;
        if (j / 2 != cached_block) {
          cached_block = j / 2;
          const auto u = stream.uniform_pair(cached_block);
          const double radius = std::sqrt(-2.0 * std::log(u[0]));
          const double angle = 2.0 * M_PI * u[1];
          cached = {radius * std::cos(angle), radius * std::sin(angle)};
        }
        dw[static_cast<Eigen::Index>(k)] = sqrt_dt * cached[j % 2];
      }
      const PathPrefix prefix = bundle.prefix(p, i);
      const Eigen::MatrixXd sig = coeffs.sigma(prefix);
      const Eigen::VectorXd mu = drift(prefix, sig);
      next = prefix.x + mu * dt + sig * dw;
      if (!next.allFinite()) {
        throw SimulationError("simulation: non-finite state at path " + std::to_string(p) + ", node " +
                                  std::to_string(i + 1),
                              p, i + 1);
      }
      bundle.state(p, i + 1) = next;
      bundle.running_sup(p, i + 1) = std::max(bundle.running_sup(p, i), next.norm());
    }
  }
  return bundle;
}

}  // namespace

PathBundle simulate_driftless(const FsdeCoefficients& coeffs, const TimeGrid& grid, std::size_t n_paths,
                              std::uint64_t seed) {
  return simulate_impl(coeffs, grid, n_paths, seed,
                       [&](const PathPrefix& prefix, const Eigen::MatrixXd&) { return coeffs.drift_tilde(prefix); });
}

PathBundle simulate_controlled(const FsdeCoefficients& coeffs, const ControlSet& control_set,
                               const ControlPolicy& policy, const TimeGrid& grid, std::size_t n_paths,
                               std::uint64_t seed, PathMatrix* controls_out) {
  const auto k = static_cast<Eigen::Index>(control_set.dim());
  if (controls_out != nullptr) {
    controls_out->setZero(static_cast<Eigen::Index>(n_paths), static_cast<Eigen::Index>(grid.n_steps()) * k);
  }
  return simulate_impl(coeffs, grid, n_paths, seed, [&](const PathPrefix& prefix, const Eigen::MatrixXd&) {
    const Eigen::VectorXd alpha = policy(prefix);
    if (!control_set.contains(alpha, 1e-9)) {
      throw SimulationError("simulation: policy value outside the control set at path " +
                                std::to_string(prefix.path) + ", node " + std::to_string(prefix.node),
                            prefix.path, prefix.node);
    }
    if (controls_out != nullptr) {
      controls_out->row(static_cast<Eigen::Index>(prefix.path))
          .segment(static_cast<Eigen::Index>(prefix.node) * k, k) = alpha.transpose();
    }
    return coeffs.drift(prefix, alpha);
  });
}

PathBundle simulate_perturbed(const FsdeCoefficients& coeffs, const DriftPerturbation& perturbation,
                              const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) {
  return simulate_impl(coeffs, grid, n_paths, seed, [&](const PathPrefix& prefix, const Eigen::MatrixXd& sig) {
    Eigen::VectorXd mu = coeffs.drift_tilde(prefix);
    mu += sig * perturbation.zeta(prefix);
    return mu;
  });
}

double lipschitz_process(const FsdeCoefficients& coeffs, const ControlSet& control_set, const PathPrefix& prefix) {
  if (coeffs.dim2 == 0) return 0.0;
  double best = 0.0;
  for (const auto& alpha : control_set.candidates()) best = std::max(best, coeffs.breve_a(prefix, alpha).norm());
  return best;
}

PathMatrix lipschitz_matrix(const FsdeCoefficients& coeffs, const ControlSet& control_set, const PathBundle& bundle) {
  PathMatrix out(static_cast<Eigen::Index>(bundle.n_paths()), static_cast<Eigen::Index>(bundle.n_nodes()));
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    for (std::size_t i = 0; i < bundle.n_nodes(); ++i) {
      out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) =
          lipschitz_process(coeffs, control_set, bundle.prefix(p, i));
    }
  }
  return out;
}

TruncationTime truncation_time(std::span<const double> lipschitz_row, double level, const TimeGrid& grid) {
  if (lipschitz_row.size() != grid.n_nodes()) {
    throw std::invalid_argument("truncation_time: L must be sampled on every grid node");
  }
  const std::size_t cap = grid.floor_index(std::max(level, 0.0));
  for (std::size_t i = 0; i < cap; ++i) {
    if (lipschitz_row[i] >= level) return {i, grid.time(i)};
  }
  return {cap, grid.time(cap)};
}

std::vector<std::size_t> truncation_nodes(const PathMatrix& lipschitz, double level, const TimeGrid& grid) {
  std::vector<std::size_t> out(static_cast<std::size_t>(lipschitz.rows()));
  for (Eigen::Index p = 0; p < lipschitz.rows(); ++p) {
    out[static_cast<std::size_t>(p)] =
        truncation_time(std::span<const double>(lipschitz.row(p).data(), static_cast<std::size_t>(lipschitz.cols())),
                        level, grid)
            .node;
  }
  return out;
}

Eigen::VectorXd doleans_exponential(const PathBundle& bundle, const StateFunction& zeta, double horizon) {
  const auto& grid = bundle.grid();
  const std::size_t steps = grid.floor_index(horizon);
  Eigen::VectorXd out(static_cast<Eigen::Index>(bundle.n_paths()));
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    double exponent = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
      const Eigen::VectorXd z = zeta(bundle.prefix(p, i));
      exponent += z.dot(bundle.dw(p, i)) - 0.5 * z.squaredNorm() * grid.dt();
    }
    out[static_cast<Eigen::Index>(p)] = std::exp(exponent);
  }
  return out;
}

SampleStats empirical_moment(const PathBundle& bundle, double p, double horizon) {
  const std::size_t last = bundle.grid().floor_index(horizon);
  Eigen::VectorXd sample(static_cast<Eigen::Index>(bundle.n_paths()));
  for (std::size_t path = 0; path < bundle.n_paths(); ++path) {
    double sup = 0.0;
    for (std::size_t i = 0; i <= last; ++i) sup = std::max(sup, bundle.state(path, i).norm());
    sample[static_cast<Eigen::Index>(path)] = std::pow(sup, p);
  }
  return sample_stats(sample);
}

MomentGrowthFit fit_moment_growth(std::span<const double> horizons, std::span<const double> moments) {
  if (horizons.size() != moments.size() || horizons.size() < 2) {
    throw std::invalid_argument("fit_moment_growth: need at least two (horizon, moment) pairs");
  }
  const auto n = static_cast<double>(horizons.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    const double x = horizons[i];
    const double y = std::log(moments[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

CoefficientReport validate_coefficients(const FsdeCoefficients& coeffs, const ControlSet& control_set,
                                        const PathBundle& bundle) {
  coeffs.check_shapes();
  CoefficientReport report;
  double worst = -1.0;
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    for (std::size_t i = 0; i < bundle.n_nodes(); ++i) {
      const auto prefix = bundle.prefix(p, i);
      const double growth = 1.0 + prefix.running_sup;
      for (const auto& alpha : control_set.candidates()) {
        const double a = coeffs.drift(prefix, alpha).norm();
        const double ratio = a / (coeffs.cg_a * growth);
        const double r = std::isfinite(ratio) ? ratio : (a == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        report.worst_drift_ratio = std::max(report.worst_drift_ratio, r);
        if (a > coeffs.cg_a * growth + 1e-9) {
          report.drift_growth_ok = false;
          if (r > worst) {
            worst = r;
            report.witness_path = p;
            report.witness_node = i;
          }
        }
      }
      if (coeffs.cg_sigma) {
        const double s = coeffs.sigma(prefix).norm();
        const double bound = coeffs.cg_sigma(prefix.t);
        report.worst_sigma_ratio = std::max(report.worst_sigma_ratio, bound > 0 ? s / bound : (s > 0 ? 1e300 : 0.0));
        if (s > bound + 1e-9) {
          report.sigma_growth_ok = false;
          report.witness_path = p;
          report.witness_node = i;
        }
      }
      if (coeffs.dim2 > 0) {
        const double inv = coeffs.sigma22(prefix).inverse().norm();
        report.worst_inverse_norm = std::max(report.worst_inverse_norm, inv);
        if (!(inv <= coeffs.sigma22_inv_bound + 1e-9)) report.sigma22_inverse_ok = false;
        const double lip = lipschitz_process(coeffs, control_set, prefix);
        const double lip_bound = coeffs.k_L * growth;
        report.worst_lipschitz_ratio =
            std::max(report.worst_lipschitz_ratio, lip_bound > 0 ? lip / lip_bound : (lip > 0 ? 1e300 : 0.0));
        if (lip > lip_bound + 1e-9) report.lipschitz_growth_ok = false;
      }
    }
  }
  return report;
}

void write_bundle_csv(const PathBundle& bundle, const std::string& path, const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << std::setprecision(17);
  out << "# t_max=" << bundle.grid().t_max() << ",n_steps=" << bundle.grid().n_steps()
      << ",n_paths=" << bundle.n_paths() << ",dim=" << bundle.dim() << ",seed=" << bundle.seed();
  if (!config_hash.empty()) out << ",config_hash=" << config_hash;
  out << "\n";
  out << "path,node,coordinate,value,dw\n";
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    for (std::size_t i = 0; i < bundle.n_nodes(); ++i) {
      for (std::size_t k = 0; k < bundle.dim(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        out << p << ',' << i << ',' << k << ',' << bundle.state(p, i)[kk] << ',';
        if (i < bundle.grid().n_steps()) out << bundle.dw(p, i)[kk];
        out << '\n';
      }
    }
  }
}

PathBundle read_bundle_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string header;
  std::getline(in, header);
  double t_max = 0;
  std::size_t n_steps = 0, n_paths = 0, dim = 0;
  std::uint64_t seed = 0;
  if (std::sscanf(header.c_str(), "# t_max=%lf,n_steps=%zu,n_paths=%zu,dim=%zu,seed=%" SCNu64, &t_max, &n_steps,
                  &n_paths, &dim, &seed) != 5) {
    throw std::runtime_error("bundle csv: malformed header in " + path);
  }
  std::string line;
  std::getline(in, line);  // column names
  PathBundle bundle(TimeGrid(t_max, n_steps), n_paths, dim, seed);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    std::size_t p = 0, i = 0, k = 0;
    std::getline(row, field, ',');
    p = std::stoul(field);
    std::getline(row, field, ',');
    i = std::stoul(field);
    std::getline(row, field, ',');
    k = std::stoul(field);
    if (p >= n_paths || i >= bundle.n_nodes() || k >= dim) throw std::runtime_error("bundle csv: index out of range");
    std::getline(row, field, ',');
    bundle.state(p, i)[static_cast<Eigen::Index>(k)] = std::stod(field);
    if (std::getline(row, field, ',') && !field.empty()) bundle.dw(p, i)[static_cast<Eigen::Index>(k)] = std::stod(field);
  }
  for (std::size_t p = 0; p < n_paths; ++p) {
    double sup = 0.0;
    for (std::size_t i = 0; i < bundle.n_nodes(); ++i) {
      sup = std::max(sup, bundle.state(p, i).norm());
      bundle.running_sup(p, i) = sup;
    }
  }
  return bundle;
}

}  // namespace rbsde
