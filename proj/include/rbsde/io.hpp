#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "rbsde/driver.hpp"
#include "rbsde/forward.hpp"
#include "rbsde/horizon.hpp"
#include "rbsde/norms.hpp"
#include "rbsde/rbsde.hpp"
#include "rbsde/stopping.hpp"

namespace rbsde {

using Json = nlohmann::json;

Json to_json(const NormDiagnostics& n);
Json to_json(const SampleStats& s);
Json to_json(const CoefficientReport& r);
Json to_json(const DriverReport& r);
Json to_json(const HamiltonianReport& r);
Json to_json(const RhoAdmissibility& r);
Json to_json(const SnellResidual& r);
Json to_json(const ConvergenceReport& r);
Json to_json(const ValueEstimate& v);
Json to_json(const SaddleReport& r);

/// y0 (mean, std_error), skorokhod_residual, min_gap and norm diagnostics of Y, Z, K.
Json solution_summary(const RbsdeSolution& s);

/// 64-bit FNV-1a of a string, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// CSV writers. The first line is "# config_hash=<hash>" when a hash is given.
/// Solution columns: path,node,t,Y,Z0..Z{d-1},K (Z empty at the last node); max_paths = 0 writes all.
void write_solution_csv(const RbsdeSolution& s, const std::string& path, const std::string& config_hash = "",
                        std::size_t max_paths = 0);
/// Columns: m,n,y0,std_error, then a blank line and l,n,n_prime,cauchy.
void write_convergence_csv(const ConvergenceReport& r, const std::string& path, const std::string& config_hash = "");
/// Columns: challenger,kind,J,std_error,bound,band,exceeded (first row is the optimal pair).
void write_saddle_csv(const SaddleReport& r, const std::string& path, const std::string& config_hash = "");

}  // namespace rbsde
