#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rbsde {

/// Uniform discretization t_0 = 0 < t_1 < ... < t_N = t_max.
template <typename Scalar>
class BasicTimeGrid {
 public:
  using Nodes = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  /// Unit interval with two steps; placeholder until a real grid is assigned.
  BasicTimeGrid() : BasicTimeGrid(Scalar(1), 2) {}
  BasicTimeGrid(Scalar t_max, std::size_t n_steps) : t_max_(t_max), n_steps_(n_steps) {
    if (!(t_max > Scalar(0)) || !std::isfinite(static_cast<double>(t_max))) {
      throw std::invalid_argument("time grid: t_max must be positive and finite, got " +
                                  std::to_string(static_cast<double>(t_max)));
    }
    if (n_steps < 2) {
      throw std::invalid_argument("time grid: n_steps must be >= 2, got " + std::to_string(n_steps));
    }
    dt_ = t_max / static_cast<Scalar>(n_steps);
    nodes_.resize(static_cast<Eigen::Index>(n_steps + 1));
    for (std::size_t i = 0; i < n_steps; ++i) {
      nodes_[static_cast<Eigen::Index>(i)] = static_cast<Scalar>(i) * dt_;
    }
    nodes_[static_cast<Eigen::Index>(n_steps)] = t_max;
  }

  Scalar t_max() const { return t_max_; }
  std::size_t n_steps() const { return n_steps_; }
  std::size_t n_nodes() const { return n_steps_ + 1; }
  Scalar dt() const { return dt_; }
  const Nodes& nodes() const { return nodes_; }
  Scalar time(std::size_t i) const { return nodes_[static_cast<Eigen::Index>(i)]; }

  /// Largest node index i with t_i <= t (clamped to [0, N]).
  std::size_t floor_index(Scalar t) const {
    if (t <= Scalar(0)) return 0;
    const auto raw = std::floor(static_cast<double>(t / dt_) + 1e-9);
    if (raw >= static_cast<double>(n_steps_)) return n_steps_;
    return static_cast<std::size_t>(raw);
  }

  /// Smallest node index i with t_i >= t (clamped to [0, N]).
  std::size_t ceil_index(Scalar t) const {
    if (t <= Scalar(0)) return 0;
    const auto raw = std::ceil(static_cast<double>(t / dt_) - 1e-9);
    if (raw >= static_cast<double>(n_steps_)) return n_steps_;
    return static_cast<std::size_t>(raw);
  }

  bool operator==(const BasicTimeGrid& other) const {
    return t_max_ == other.t_max_ && n_steps_ == other.n_steps_;
  }

 private:
  Scalar t_max_;
  std::size_t n_steps_;
  Scalar dt_{};
  Nodes nodes_;
};

using TimeGrid = BasicTimeGrid<double>;

inline TimeGrid build_grid(double t_max, std::size_t n_steps) { return TimeGrid(t_max, n_steps); }

}  // namespace rbsde
