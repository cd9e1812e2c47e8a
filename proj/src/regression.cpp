#include "rbsde/regression.hpp"

#include <cmath>

namespace rbsde {
namespace {

void enumerate_exponents(std::size_t n_features, int degree, std::vector<int>& current, std::size_t position,
                         int remaining, std::vector<std::vector<int>>& out) {
  if (position == n_features) {
    out.push_back(current);
    return;
  }
  for (int e = 0; e <= remaining; ++e) {
    current[position] = e;
    enumerate_exponents(n_features, degree, current, position + 1, remaining - e, out);
  }
  current[position] = 0;
}

// Fills `row` with the monomials of the standardized active features.
void fill_row(const std::vector<std::vector<int>>& exponents, const Eigen::MatrixXd& powers, double* row) {
  for (std::size_t term = 0; term < exponents.size(); ++term) {
    double value = 1.0;
    const auto& e = exponents[term];
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (e[k] != 0) value *= powers(static_cast<Eigen::Index>(k), e[k]);
    }
    row[term] = value;
  }
}

}  // namespace

Eigen::RowVectorXd RegressionFit::basis_row(const PathPrefix& prefix) const {
  const auto k = static_cast<Eigen::Index>(active_.size());
  Eigen::MatrixXd powers(k, degree_ + 1);
  for (Eigen::Index a = 0; a < k; ++a) {
    const double z = (features_[active_[static_cast<std::size_t>(a)]].evaluate(prefix) - center_[a]) / scale_[a];
    powers(a, 0) = 1.0;
    for (int d = 1; d <= degree_; ++d) powers(a, d) = powers(a, d - 1) * z;
  }
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(exponents_.size()));
  fill_row(exponents_, powers, row.data());
  return row;
}

RegressionBasis::RegressionBasis(std::vector<Feature> features, int degree, double ridge)
    : features_(std::move(features)), degree_(degree), ridge_(ridge) {
  if (degree < 1) throw std::invalid_argument("regression basis: degree must be >= 1");
  if (!(ridge >= 0.0)) throw std::invalid_argument("regression basis: ridge must be >= 0");
}

RegressionBasis RegressionBasis::standard(std::size_t dim, int degree, double ridge) {
  std::vector<Feature> features;
  features.push_back(Feature::time());
  for (std::size_t k = 0; k < dim; ++k) features.push_back(Feature::state(k));
  features.push_back(Feature::running_sup());
  return RegressionBasis(std::move(features), degree, ridge);
}

NodeDesign RegressionBasis::design(const PathBundle& bundle, std::size_t node) const {
  const auto m = static_cast<Eigen::Index>(bundle.n_paths());
  for (const auto& f : features_) {
    if (f.kind == Feature::Kind::State && f.coordinate >= bundle.dim()) {
      throw std::invalid_argument("regression: state feature coordinate out of range");
    }
  }

  NodeDesign out;
  out.node_ = node;
  RegressionFit& fit = out.skeleton_;
  fit.features_ = features_;
  fit.degree_ = degree_;

  Eigen::MatrixXd raw(m, static_cast<Eigen::Index>(features_.size()));
  for (Eigen::Index p = 0; p < m; ++p) {
    const auto prefix = bundle.prefix(static_cast<std::size_t>(p), node);
    for (std::size_t f = 0; f < features_.size(); ++f) raw(p, static_cast<Eigen::Index>(f)) = features_[f].evaluate(prefix);
  }
  std::vector<double> centers, scales;
  for (std::size_t f = 0; f < features_.size(); ++f) {
    const auto col = raw.col(static_cast<Eigen::Index>(f));
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().mean());
    if (sd > 1e-12 * (1.0 + std::abs(mean))) {
      fit.active_.push_back(f);
      centers.push_back(mean);
      scales.push_back(sd);
    }
  }
  const auto k = static_cast<Eigen::Index>(fit.active_.size());
  fit.center_ = Eigen::Map<Eigen::VectorXd>(centers.data(), k);
  fit.scale_ = Eigen::Map<Eigen::VectorXd>(scales.data(), k);
  std::vector<int> current(fit.active_.size(), 0);
  enumerate_exponents(fit.active_.size(), degree_, current, 0, degree_, fit.exponents_);

  const auto n_terms = static_cast<Eigen::Index>(fit.exponents_.size());
  out.design_.resize(m, n_terms);
  Eigen::MatrixXd powers(k, degree_ + 1);
  for (Eigen::Index p = 0; p < m; ++p) {
    for (Eigen::Index a = 0; a < k; ++a) {
      const double z = (raw(p, static_cast<Eigen::Index>(fit.active_[static_cast<std::size_t>(a)])) - fit.center_[a]) /
                       fit.scale_[a];
      powers(a, 0) = 1.0;
      for (int d = 1; d <= degree_; ++d) powers(a, d) = powers(a, d - 1) * z;
    }
    fill_row(fit.exponents_, powers, out.design_.row(p).data());
  }

  Eigen::MatrixXd gram = Eigen::MatrixXd(out.design_.transpose() * out.design_) / static_cast<double>(m);
  gram.diagonal().array() += ridge_;
  out.ldlt_.compute(gram);
  const auto pivots = out.ldlt_.vectorD();
  if (out.ldlt_.info() != Eigen::Success || !out.ldlt_.isPositive() ||
      pivots.minCoeff() <= 1e-13 * std::max(1.0, pivots.maxCoeff())) {
    throw RegressionError("regression: design matrix is rank deficient at node " + std::to_string(node), node);
  }
  return out;
}

RegressionFit NodeDesign::fit(const Eigen::MatrixXd& targets, Eigen::MatrixXd* fitted_out) const {
  if (targets.rows() != design_.rows()) throw std::invalid_argument("regression: target rows must equal n_paths");
  RegressionFit fit = skeleton_;
  const Eigen::MatrixXd rhs = Eigen::MatrixXd(design_.transpose() * targets) / static_cast<double>(design_.rows());
  fit.coefficients_ = ldlt_.solve(rhs);
  if (!fit.coefficients_.allFinite()) {
    throw RegressionError("regression: non-finite coefficients at node " + std::to_string(node_), node_);
  }
  if (fitted_out != nullptr) *fitted_out = design_ * fit.coefficients_;
  return fit;
}

RegressionFit RegressionBasis::fit(const PathBundle& bundle, std::size_t node, const Eigen::MatrixXd& targets,
                                   Eigen::MatrixXd* fitted_out) const {
  if (targets.rows() != static_cast<Eigen::Index>(bundle.n_paths())) {
    throw std::invalid_argument("regression: target rows must equal n_paths");
  }
  return design(bundle, node).fit(targets, fitted_out);
}

RegressionFit RegressionFit::joined(const RegressionFit& other) const {
  if (exponents_ != other.exponents_ || active_ != other.active_ || coefficients_.rows() != other.coefficients_.rows()) {
    throw std::invalid_argument("regression: joined fits must share a design");
  }
  RegressionFit out = *this;
  out.coefficients_.conservativeResize(Eigen::NoChange, coefficients_.cols() + other.coefficients_.cols());
  out.coefficients_.rightCols(other.coefficients_.cols()) = other.coefficients_;
  return out;
}

Eigen::MatrixXd RegressionBasis::fitted(const RegressionFit& fit, const PathBundle& bundle, std::size_t node) const {
  const auto m = static_cast<Eigen::Index>(bundle.n_paths());
  Eigen::MatrixXd out(m, fit.coefficients().cols());
  for (Eigen::Index p = 0; p < m; ++p) {
    out.row(p) = fit.basis_row(bundle.prefix(static_cast<std::size_t>(p), node)) * fit.coefficients();
  }
  return out;
}

}  // namespace rbsde
