#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbsde/path_bundle.hpp"

namespace rbsde {

/// Path functional usable as a regressor.
struct Feature {
  enum class Kind { Time, State, RunningSup };
  Kind kind = Kind::State;
  std::size_t coordinate = 0;  ///< only for Kind::State

  static Feature time() { return {Kind::Time, 0}; }
  static Feature state(std::size_t k) { return {Kind::State, k}; }
  static Feature running_sup() { return {Kind::RunningSup, 0}; }

  double evaluate(const PathPrefix& prefix) const {
    switch (kind) {
      case Kind::Time: return prefix.t;
      case Kind::State: return prefix.x[static_cast<Eigen::Index>(coordinate)];
      case Kind::RunningSup: return prefix.running_sup;
    }
    return 0.0;
  }
};

class RegressionError : public std::runtime_error {
 public:
  RegressionError(const std::string& what, std::size_t node) : std::runtime_error(what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

/// Least-squares fit of several targets at one node: polynomial of total degree <= d in the
/// standardized active features. Features that are constant across paths at the node are dropped.
class RegressionFit {
 public:
  RegressionFit() = default;

  std::size_t n_targets() const { return static_cast<std::size_t>(coefficients_.cols()); }
  std::size_t n_terms() const { return exponents_.size(); }
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }

  /// Row of basis values for one prefix.
  Eigen::RowVectorXd basis_row(const PathPrefix& prefix) const;
  Eigen::VectorXd evaluate(const PathPrefix& prefix) const {
    return (basis_row(prefix) * coefficients_).transpose();
  }
  double evaluate(const PathPrefix& prefix, std::size_t target) const {
    return basis_row(prefix).dot(coefficients_.col(static_cast<Eigen::Index>(target)));
  }
  /// Same basis with the targets of `other` appended; both fits must come from one node design.
  RegressionFit joined(const RegressionFit& other) const;

 private:
  friend class RegressionBasis;
  friend class NodeDesign;
  std::vector<Feature> features_;
  std::vector<std::size_t> active_;  // indices into features_
  Eigen::VectorXd center_;           // per active feature
  Eigen::VectorXd scale_;
  std::vector<std::vector<int>> exponents_;  // per term, per active feature
  int degree_ = 1;
  Eigen::MatrixXd coefficients_;  // n_terms x n_targets
};

/// Factorized design at one node; solves any number of target sets against it.
class NodeDesign {
 public:
  RegressionFit fit(const Eigen::MatrixXd& targets, Eigen::MatrixXd* fitted_out = nullptr) const;
  std::size_t node() const { return node_; }

 private:
  friend class RegressionBasis;
  RegressionFit skeleton_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> design_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  std::size_t node_ = 0;
};

/// Regression basis realizing E[ . | F_t_i] on a path bundle.
class RegressionBasis {
 public:
  RegressionBasis(std::vector<Feature> features, int degree, double ridge);

  /// Default: every state coordinate plus running sup |X|, total degree 3, ridge 1e-8.
  static RegressionBasis standard(std::size_t dim, int degree = 3, double ridge = 1e-8);

  const std::vector<Feature>& features() const { return features_; }
  int degree() const { return degree_; }
  double ridge() const { return ridge_; }

  /// Builds and factorizes the design at `node`; throws RegressionError on rank failure.
  NodeDesign design(const PathBundle& bundle, std::size_t node) const;

  /// Fits the columns of `targets` (one row per path) against the features at `node`.
  /// When `fitted_out` is given it receives the fitted values on the training paths.
  RegressionFit fit(const PathBundle& bundle, std::size_t node, const Eigen::MatrixXd& targets,
                    Eigen::MatrixXd* fitted_out = nullptr) const;

  /// Fitted values on the training paths, one row per path.
  Eigen::MatrixXd fitted(const RegressionFit& fit, const PathBundle& bundle, std::size_t node) const;

 private:
  std::vector<Feature> features_;
  int degree_;
  double ridge_;
};

}  // namespace rbsde
