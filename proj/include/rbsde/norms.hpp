#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "rbsde/time_grid.hpp"

namespace rbsde {

/// Process sampled on a bundle: one row per path, one column per node.
template <typename Scalar>
using BasicPathMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PathMatrix = BasicPathMatrix<double>;

/// Empirical proxies for the S^p / H^p norms. Reported, never enforced.
struct NormDiagnostics {
  double sp_norm = 0.0;  ///< (E sup_t |v_t|^p)^{1/p}
  double hp_norm = 0.0;  ///< (E (sum |v_t|^2 dt)^{p/2})^{1/p}
  double tail_sp = 0.0;  ///< sp_norm restricted to nodes t_i >= tail_start
};

/// `values` has either N+1 columns (node-valued, the last node is excluded from the dt-sum)
/// or N columns (interval-valued, e.g. Z).
template <typename Derived>
NormDiagnostics estimate_norms(const Eigen::MatrixBase<Derived>& values, const TimeGrid& grid, double p,
                               double tail_start) {
  if (!(p >= 1.0)) throw std::invalid_argument("estimate_norms: exponent p must be >= 1");
  const auto cols = static_cast<std::size_t>(values.cols());
  if (cols != grid.n_nodes() && cols != grid.n_steps()) {
    throw std::invalid_argument("estimate_norms: process must have N or N+1 columns");
  }
  const Eigen::Index rows = values.rows();
  if (rows == 0) return {};
  const std::size_t tail_first = grid.ceil_index(tail_start);
  const std::size_t dt_cols = std::min(cols, grid.n_steps());
  double sp_sum = 0.0, hp_sum = 0.0, tail_sum = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    double sup = 0.0, tail_sup = 0.0, quad = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double a = std::abs(static_cast<double>(values(r, static_cast<Eigen::Index>(c))));
      sup = std::max(sup, a);
      if (c >= tail_first) tail_sup = std::max(tail_sup, a);
      if (c < dt_cols) quad += a * a * grid.dt();
    }
    sp_sum += std::pow(sup, p);
    tail_sum += std::pow(tail_sup, p);
    hp_sum += std::pow(quad, p / 2.0);
  }
  const double n = static_cast<double>(rows);
  return {std::pow(sp_sum / n, 1.0 / p), std::pow(hp_sum / n, 1.0 / p), std::pow(tail_sum / n, 1.0 / p)};
}

/// Mean and standard error of a sample.
struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
  double stddev = 0.0;
};

template <typename Derived>
SampleStats sample_stats(const Eigen::MatrixBase<Derived>& sample) {
  const auto n = static_cast<double>(sample.size());
  if (n == 0) return {};
  const double mean = sample.mean();
  if (n < 2) return {mean, 0.0, 0.0};
  const double var = (sample.array() - mean).square().sum() / (n - 1.0);
  const double sd = std::sqrt(var);
  return {mean, sd / std::sqrt(n), sd};
}

}  // namespace rbsde
