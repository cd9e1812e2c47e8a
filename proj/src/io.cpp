#include "rbsde/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace rbsde {

namespace {

std::ofstream open_csv(const std::string& path, const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
  return out;
}

// JSON has no infinities; encode them as null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Json to_json(const NormDiagnostics& n) {
  return {{"sp_norm", number(n.sp_norm)}, {"hp_norm", number(n.hp_norm)}, {"tail_sp", number(n.tail_sp)}};
}

Json to_json(const SampleStats& s) {
  return {{"mean", number(s.mean)}, {"std_error", number(s.std_error)}, {"stddev", number(s.stddev)}};
}

Json to_json(const CoefficientReport& r) {
  return {{"ok", r.ok()},
          {"drift_growth_ok", r.drift_growth_ok},
          {"sigma_growth_ok", r.sigma_growth_ok},
          {"sigma22_inverse_ok", r.sigma22_inverse_ok},
          {"lipschitz_growth_ok", r.lipschitz_growth_ok},
          {"worst_drift_ratio", number(r.worst_drift_ratio)},
          {"worst_sigma_ratio", number(r.worst_sigma_ratio)},
          {"worst_inverse_norm", number(r.worst_inverse_norm)},
          {"worst_lipschitz_ratio", number(r.worst_lipschitz_ratio)},
          {"witness", {{"path", r.witness_path}, {"node", r.witness_node}}}};
}

Json to_json(const DriverReport& r) {
  Json out{{"ok", r.ok()},
           {"lipschitz_ok", r.lipschitz_ok},
           {"growth_ok", r.growth_ok},
           {"worst_lipschitz_violation", number(r.worst_lipschitz_violation)},
           {"worst_growth_violation", number(r.worst_growth_violation)},
           {"samples", r.samples},
           {"measure_class", "finite perturbation family proxy"}};
  auto witness = [](const DriverReport::Witness& w) {
    return Json{{"path", w.path},
                {"node", w.node},
                {"y", w.y},
                {"y_prime", w.y_prime},
                {"z", std::vector<double>(w.z.data(), w.z.data() + w.z.size())},
                {"z_prime", std::vector<double>(w.z_prime.data(), w.z_prime.data() + w.z_prime.size())}};
  };
  if (r.lipschitz_witness) out["lipschitz_witness"] = witness(*r.lipschitz_witness);
  if (r.growth_witness) out["growth_witness"] = witness(*r.growth_witness);
  return out;
}

Json to_json(const HamiltonianReport& r) {
  return {{"ok", r.ok()},
          {"phi_growth_ok", r.phi_growth_ok},
          {"psi_growth_ok", r.psi_growth_ok},
          {"rho_ok", r.rho_ok},
          {"worst_phi_ratio", number(r.worst_phi_ratio)},
          {"worst_psi_ratio", number(r.worst_psi_ratio)}};
}

Json to_json(const RhoAdmissibility& r) {
  return {{"valid", r.valid}, {"epsilon", number(r.epsilon)}, {"reason", r.reason}};
}

Json to_json(const SnellResidual& r) {
  return {{"representation_mean", number(r.representation_mean)},
          {"std_error", number(r.std_error)},
          {"residual", number(r.residual)},
          {"k_residual", number(r.k_residual)}};
}

Json to_json(const ConvergenceReport& r) {
  Json levels = Json::array();
  for (const auto& e : r.y0_by_level) {
    levels.push_back({{"m", e.m}, {"n", e.n}, {"y0", number(e.y0)}, {"std_error", number(e.std_error)}});
  }
  Json cauchy = Json::array();
  for (const auto& e : r.cauchy) {
    cauchy.push_back({{"l", e.l}, {"n", e.n}, {"n_prime", e.n_prime}, {"value", number(e.value)}});
  }
  return {{"y0_by_level", levels},
          {"cauchy", cauchy},
          {"monotone_n_ok", r.monotone_n_ok},
          {"monotone_worst_violation", number(r.monotone_worst_violation)},
          {"cauchy_final", number(r.cauchy_final)},
          {"tail_estimate", number(r.tail_estimate)},
          {"tail_from_proxy", r.tail_from_proxy},
          {"y0_doubled", number(r.y0_doubled)},
          {"y0_doubled_std_error", number(r.y0_doubled_std_error)},
          {"doubling_gap", number(r.doubling_gap)},
          {"doubling_ok", r.doubling_ok},
          {"terminal_sup", number(r.terminal_sup)},
          {"terminal_decay_ok", r.terminal_decay_ok},
          {"t_solve", r.t_solve},
          {"tol", r.tol},
          {"converged", r.converged},
          {"failures", r.failures}};
}

Json to_json(const ValueEstimate& v) {
  return {{"mean", number(v.mean)},
          {"std_error", number(v.std_error)},
          {"n_paths", v.n_paths},
          {"horizon_used", v.horizon_used},
          {"unstopped_fraction", v.unstopped_fraction},
          {"tail_bound", number(v.tail_bound)}};
}

Json to_json(const SaddleReport& r) {
  Json challengers = Json::array();
  for (const auto& c : r.challengers) {
    challengers.push_back({{"name", c.name},
                           {"kind", c.kind},
                           {"mean", number(c.mean)},
                           {"std_error", number(c.std_error)},
                           {"bound", number(c.bound)},
                           {"band", number(c.band)},
                           {"exceeded", c.exceeded}});
  }
  return {{"y0", number(r.y0)},
          {"y0_std_error", number(r.y0_std_error)},
          {"optimal", to_json(r.optimal)},
          {"slack", number(r.slack)},
          {"value_gap", number(r.value_gap)},
          {"value_band", number(r.value_band)},
          {"value_ok", r.value_ok},
          {"challengers", challengers},
          {"exceedances", r.exceedances},
          {"max_exceedance_fraction", r.max_exceedance_fraction},
          {"gate", r.gate},
          {"verdict", r.gate ? "consistent with a saddle point" : "inconsistent with a saddle point"}};
}

Json solution_summary(const RbsdeSolution& s) {
  return {{"y0", {{"mean", number(s.y0.mean)}, {"std_error", number(s.y0.std_error)}}},
          {"skorokhod_residual", number(s.skorokhod_residual)},
          {"min_gap", number(s.min_gap())},
          {"n_paths", s.y.rows()},
          {"n_steps", s.grid.n_steps()},
          {"t_max", s.grid.t_max()},
          {"norms", {{"y", to_json(s.y_norms)}, {"z", to_json(s.z_norms)}, {"k", to_json(s.k_norms)}}}};
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

void write_solution_csv(const RbsdeSolution& s, const std::string& path, const std::string& config_hash,
                        std::size_t max_paths) {
  auto out = open_csv(path, config_hash);
  out << "path,node,t,Y";
  for (std::size_t k = 0; k < s.dim; ++k) out << ",Z" << k;
  out << ",K\n";
  const std::size_t n = s.grid.n_steps();
  const Eigen::Index rows =
      max_paths == 0 ? s.y.rows() : std::min<Eigen::Index>(s.y.rows(), static_cast<Eigen::Index>(max_paths));
  for (Eigen::Index p = 0; p < rows; ++p) {
    for (std::size_t i = 0; i <= n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      out << p << ',' << i << ',' << s.grid.time(i) << ',' << s.y(p, ii);
      for (std::size_t k = 0; k < s.dim; ++k) {
        out << ',';
        if (i < n) out << s.z(p, static_cast<Eigen::Index>(i * s.dim + k));
      }
      out << ',' << s.k(p, ii) << '\n';
    }
  }
}

void write_convergence_csv(const ConvergenceReport& r, const std::string& path, const std::string& config_hash) {
  auto out = open_csv(path, config_hash);
  out << "m,n,y0,std_error\n";
  for (const auto& e : r.y0_by_level) out << e.m << ',' << e.n << ',' << e.y0 << ',' << e.std_error << '\n';
  out << "\nl,n,n_prime,cauchy\n";
  for (const auto& e : r.cauchy) out << e.l << ',' << e.n << ',' << e.n_prime << ',' << e.value << '\n';
}

void write_saddle_csv(const SaddleReport& r, const std::string& path, const std::string& config_hash) {
  auto out = open_csv(path, config_hash);
  out << "challenger,kind,J,std_error,bound,band,exceeded\n";
  out << "optimal pair,optimal," << r.optimal.mean << ',' << r.optimal.std_error << ',' << r.y0 << ','
      << r.value_band << ',' << (r.value_ok ? 0 : 1) << '\n';
  for (const auto& c : r.challengers) {
    out << '"' << c.name << "\"," << c.kind << ',' << c.mean << ',' << c.std_error << ',' << c.bound << ',' << c.band
        << ',' << (c.exceeded ? 1 : 0) << '\n';
  }
}

}  // namespace rbsde
