#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <stdexcept>
#include <type_traits>
#include <utility>

#include <Eigen/Dense>

#include "rbsde/time_grid.hpp"

namespace rbsde {

/// What a path functional may see at node i: time, the current state and the running sup of |X|.
/// Path dependence is restricted to this feature set so that it stays regressable.
struct PathPrefix {
  std::size_t path = 0;
  std::size_t node = 0;
  double t = 0.0;
  Eigen::Map<const Eigen::VectorXd> x{nullptr, 0};
  double running_sup = 0.0;

  PathPrefix() = default;
  PathPrefix(std::size_t path_, std::size_t node_, double t_, const double* state, Eigen::Index dim,
             double sup)
      : path(path_), node(node_), t(t_), x(state, dim), running_sup(sup) {}
  PathPrefix(const PathPrefix& o) : PathPrefix(o.path, o.node, o.t, o.x.data(), o.x.size(), o.running_sup) {}
  PathPrefix& operator=(const PathPrefix& o) {
    path = o.path;
    node = o.node;
    t = o.t;
    new (&x) Eigen::Map<const Eigen::VectorXd>(o.x.data(), o.x.size());
    running_sup = o.running_sup;
    return *this;
  }
};

/// Simulated state paths X[p][i] (i = 0..N) with the Brownian increments dW[p][i] (i = 0..N-1)
/// that produced them. Row-major so one path is contiguous.
template <typename Scalar>
class BasicPathBundle {
 public:
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BasicPathBundle(BasicTimeGrid<Scalar> grid, std::size_t n_paths, std::size_t dim, std::uint64_t seed)
      : grid_(std::move(grid)), n_paths_(n_paths), dim_(dim), seed_(seed) {
    if (n_paths == 0) throw std::invalid_argument("path bundle: n_paths must be >= 1");
    if (dim == 0) throw std::invalid_argument("path bundle: dim must be >= 1");
    const auto rows = static_cast<Eigen::Index>(n_paths);
    states_.setZero(rows, static_cast<Eigen::Index>(grid_.n_nodes() * dim));
    dw_.setZero(rows, static_cast<Eigen::Index>(grid_.n_steps() * dim));
    running_sup_.setZero(rows, static_cast<Eigen::Index>(grid_.n_nodes()));
  }

  const BasicTimeGrid<Scalar>& grid() const { return grid_; }
  std::size_t n_paths() const { return n_paths_; }
  std::size_t dim() const { return dim_; }
  std::size_t n_nodes() const { return grid_.n_nodes(); }
  std::uint64_t seed() const { return seed_; }

  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> state(std::size_t p, std::size_t i) const {
    return {state_ptr(p, i), static_cast<Eigen::Index>(dim_)};
  }
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> state(std::size_t p, std::size_t i) {
    return {state_ptr(p, i), static_cast<Eigen::Index>(dim_)};
  }
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> dw(std::size_t p, std::size_t i) const {
    return {dw_ptr(p, i), static_cast<Eigen::Index>(dim_)};
  }
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> dw(std::size_t p, std::size_t i) {
    return {dw_ptr(p, i), static_cast<Eigen::Index>(dim_)};
  }

  Scalar running_sup(std::size_t p, std::size_t i) const {
    return running_sup_(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i));
  }
  Scalar& running_sup(std::size_t p, std::size_t i) {
    return running_sup_(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i));
  }

  /// Coordinate k of X at node i for every path.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coordinate(std::size_t i, std::size_t k) const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(static_cast<Eigen::Index>(n_paths_));
    for (std::size_t p = 0; p < n_paths_; ++p) out[static_cast<Eigen::Index>(p)] = state_ptr(p, i)[k];
    return out;
  }

  PathPrefix prefix(std::size_t p, std::size_t i) const
    requires std::is_same_v<Scalar, double>
  {
    return PathPrefix(p, i, grid_.time(i), state_ptr(p, i), static_cast<Eigen::Index>(dim_), running_sup(p, i));
  }

  const Storage& states() const { return states_; }
  const Storage& increments() const { return dw_; }

  bool operator==(const BasicPathBundle& o) const {
    return grid_ == o.grid_ && n_paths_ == o.n_paths_ && dim_ == o.dim_ && seed_ == o.seed_ &&
           states_ == o.states_ && dw_ == o.dw_;
  }

 private:
  const Scalar* state_ptr(std::size_t p, std::size_t i) const {
    return states_.data() + p * static_cast<std::size_t>(states_.cols()) + i * dim_;
  }
  Scalar* state_ptr(std::size_t p, std::size_t i) {
    return states_.data() + p * static_cast<std::size_t>(states_.cols()) + i * dim_;
  }
  const Scalar* dw_ptr(std::size_t p, std::size_t i) const {
    return dw_.data() + p * static_cast<std::size_t>(dw_.cols()) + i * dim_;
  }
  Scalar* dw_ptr(std::size_t p, std::size_t i) {
    return dw_.data() + p * static_cast<std::size_t>(dw_.cols()) + i * dim_;
  }

  BasicTimeGrid<Scalar> grid_;
  std::size_t n_paths_;
  std::size_t dim_;
  std::uint64_t seed_;
  Storage states_;
  Storage dw_;
  Storage running_sup_;
};

using PathBundle = BasicPathBundle<double>;

}  // namespace rbsde
