#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbsde/io.hpp"

namespace rbsde::cli {

/// Schema violation; `field` is a JSON pointer to the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)), message_(message) {}
  const std::string& field() const { return field_; }
  const std::string& message() const { return message_; }

 private:
  std::string field_;
  std::string message_;
};

/// Scalar path functional with a flag telling whether it reads only (t, current state).
struct ScalarForm {
  PathFunctional fn;
  bool markovian = true;
};

struct Numerics {
  double t_max = 1.0;
  std::size_t n_steps = 50;
  std::size_t n_paths = 10000;
  int degree = 3;
  double ridge = 1e-8;
  std::vector<Feature> features;  ///< empty: every state coordinate plus running sup
  SolverConfig solver;
  std::optional<TruncationSchedule> schedule;
  std::size_t eval_paths = 10000;
  std::uint64_t eval_seed = 0;  ///< 0: seed + 1
  std::uint64_t challenger_seed = 7;
  std::size_t csv_paths = 100;
  std::size_t lattice_substeps = 20;
  std::size_t validation_paths = 64;
  std::size_t driver_samples = 500;
  double oracle_tolerance = 0.01;
  std::size_t tail_paths = 2000;  ///< 0 disables the tail-process estimate
  std::size_t tail_probes = 9;
};

struct ExperimentConfig {
  Json raw;
  std::string hash;
  std::string pipeline;
  std::uint64_t seed = 42;
  std::string output_dir = "out";

  FsdeCoefficients coeffs;
  ControlSet control_set;

  std::optional<HamiltonianSpec> ham;  ///< present when phi, psi and rho are given
  std::optional<DriverSpec> driver;    ///< explicit driver
  std::optional<ScalarForm> barrier;
  std::optional<ScalarForm> terminal;

  Numerics numerics;

  RegressionBasis basis() const;
  RobustStoppingProblem robust_problem() const;
  BuildOptions build_options() const;
};

/// Validates `doc` against the schema for `pipeline` (empty: take run.pipeline).
ExperimentConfig parse_config(const Json& doc, const std::string& pipeline = "");
ExperimentConfig load_config(const std::string& path, const std::string& pipeline = "");

/// Names accepted in "type" fields, per category.
std::vector<std::string> registry_names(const std::string& category);

}  // namespace rbsde::cli
